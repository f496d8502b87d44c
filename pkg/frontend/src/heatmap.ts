/** Impact-grid view model: a diverging palette centered at zero.
 *
 * Palette range is set by the grid's own max |cell| so each grid uses its
 * full color depth; exact-zero and zero-delta cells render neutrally.
 */

import type { SweepResponse } from "./types.js";
import { formatCellValue, formatDelta } from "./format.js";

export interface HeatmapCell {
  row: number;
  col: number;
  value: number | null;
  color: string;
  label: string;
  neutral: boolean;
  error: string | null;
}

export interface HeatmapView {
  rows: number;
  cols: number;
  rowLabels: string[];
  colLabels: string[];
  rowAxisTitle: string;
  colAxisTitle: string;
  cells: HeatmapCell[];
  maxAbs: number;
  target: string;
}

const NEUTRAL = "#f5f5f4";

/** Blue (negative) to white (zero) to red (positive). */
export function divergingColor(value: number, maxAbs: number): string {
  if (maxAbs <= 0 || value === 0) return NEUTRAL;
  const t = Math.max(-1, Math.min(1, value / maxAbs));
  const lighten = 1 - Math.abs(t);
  const channel = Math.round(235 * lighten + 20 * Math.abs(t));
  if (t > 0) {
    const red = Math.round(200 + 35 * Math.abs(t));
    return `rgb(${red}, ${channel}, ${channel})`;
  }
  const blue = Math.round(200 + 35 * Math.abs(t));
  return `rgb(${channel}, ${channel}, ${blue})`;
}

export function buildHeatmap(grid: SweepResponse): HeatmapView {
  const values = grid.cells.flat().filter((v): v is number => v !== null);
  const maxAbs = values.reduce((acc, v) => Math.max(acc, Math.abs(v)), 0);
  const isPair = grid.kind === "pair";
  const rowLabels = isPair
    ? grid.deltas.map(formatDelta)
    : grid.row_labels.slice();
  const colLabels = grid.deltas.map(formatDelta);
  const cells: HeatmapCell[] = [];
  for (let r = 0; r < grid.cells.length; r++) {
    for (let c = 0; c < grid.cells[r].length; c++) {
      const value = grid.cells[r][c];
      const error = grid.errors[`${r},${c}`] ?? null;
      const rowDelta = isPair ? grid.deltas[r] : null;
      const colDelta = grid.deltas[c];
      const neutral = isPair
        ? rowDelta === 0 && colDelta === 0
        : colDelta === 0;
      cells.push({
        row: r,
        col: c,
        value,
        color:
          value === null || neutral ? NEUTRAL : divergingColor(value, maxAbs),
        label: error ? "error" : formatCellValue(value),
        neutral,
        error,
      });
    }
  }
  return {
    rows: grid.cells.length,
    cols: grid.deltas.length,
    rowLabels,
    colLabels,
    rowAxisTitle: isPair && grid.feature_pair ? grid.feature_pair[0] : "feature",
    colAxisTitle:
      isPair && grid.feature_pair ? grid.feature_pair[1] : "input change",
    cells,
    maxAbs,
    target: grid.target,
  };
}

/** HTML table rendering of the view model (no numeric recomputation). */
export function heatmapHtml(view: HeatmapView): string {
  const header = view.colLabels.map((l) => `<th>${l}</th>`).join("");
  const body = [];
  for (let r = 0; r < view.rows; r++) {
    const cells = view.cells
      .filter((cell) => cell.row === r)
      .map((cell) => {
        const classes = cell.neutral ? "cell neutral" : "cell";
        const title = cell.error ?? `${view.target}: ${cell.label}`;
        return (
          `<td class="${classes}" style="background:${cell.color}"` +
          ` title="${title}">${cell.label}</td>`
        );
      })
      .join("");
    body.push(`<tr><th>${view.rowLabels[r]}</th>${cells}</tr>`);
  }
  return (
    `<table class="heatmap" data-rows="${view.rows}" data-cols="${view.cols}">` +
    `<thead><tr><th>${view.rowAxisTitle} ↓ ${view.colAxisTitle} →</th>${header}</tr></thead>` +
    `<tbody>${body.join("")}</tbody></table>`
  );
}

/** Error panel shown instead of a blank page when a grid cannot render. */
export function heatmapErrorHtml(message: string): string {
  return `<div class="error-panel">Heatmap unavailable: ${message}</div>`;
}
