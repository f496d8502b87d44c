/** Number formatting helpers; the UI never recomputes engine numbers. */

/** Impact percent with explicit sign and two decimals, e.g. "+12.34%". */
export function formatImpact(pct: number): string {
  const sign = pct > 0 ? "+" : pct < 0 ? "-" : "";
  return `${sign}${Math.abs(pct).toFixed(2)}%`;
}

/** Axis label for a fractional delta, e.g. -0.2 -> "-20%". */
export function formatDelta(delta: number): string {
  const pct = Math.round(delta * 100);
  return `${pct > 0 ? "+" : ""}${pct}%`;
}

/** Compact value for cell tooltips: full precision, no rounding surprises. */
export function formatCellValue(value: number | null): string {
  if (value === null || Number.isNaN(value)) return "error";
  return `${value >= 0 ? "+" : ""}${value.toFixed(3)}%`;
}

export function formatSeriesValue(value: number): string {
  return Math.abs(value) >= 1000 ? value.toFixed(0) : value.toPrecision(5);
}
