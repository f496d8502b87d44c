/** Overlay line chart (baseline vs counterfactual) as a pure SVG builder. */

export interface ChartSeries {
  name: string;
  values: number[];
  cssClass: string;
}

export interface ChartView {
  width: number;
  height: number;
  paths: { name: string; d: string; cssClass: string; points: number }[];
  yTicks: { y: number; label: string }[];
  xTicks: { x: number; label: string }[];
}

const WIDTH = 760;
const HEIGHT = 280;
const PAD = { left: 64, right: 16, top: 12, bottom: 28 };

function niceTicks(lo: number, hi: number, count = 5): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const err = span / count / step;
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const tick = mult * step;
  const start = Math.ceil(lo / tick) * tick;
  const ticks = [];
  for (let v = start; v <= hi + 1e-12; v += tick) ticks.push(v);
  return ticks;
}

export function buildChart(timestamps: string[], series: ChartSeries[]): ChartView {
  const all = series.flatMap((s) => s.values);
  const lo = Math.min(...all);
  const hi = Math.max(...all);
  const yLo = lo === hi ? lo - 1 : lo;
  const yHi = lo === hi ? hi + 1 : hi;
  const innerW = WIDTH - PAD.left - PAD.right;
  const innerH = HEIGHT - PAD.top - PAD.bottom;
  const n = timestamps.length;

  const sx = (i: number) => PAD.left + (n <= 1 ? 0 : (i / (n - 1)) * innerW);
  const sy = (v: number) => PAD.top + innerH - ((v - yLo) / (yHi - yLo)) * innerH;

  const paths = series.map((s) => ({
    name: s.name,
    cssClass: s.cssClass,
    points: s.values.length,
    d: s.values
      .map((v, i) => `${i === 0 ? "M" : "L"}${sx(i).toFixed(1)},${sy(v).toFixed(1)}`)
      .join(""),
  }));

  const yTicks = niceTicks(yLo, yHi).map((v) => ({
    y: sy(v),
    label: Math.abs(v) >= 1000 ? v.toFixed(0) : v.toPrecision(4),
  }));
  const xIdx = [0, Math.floor(n / 2), n - 1].filter((i, k, arr) => arr.indexOf(i) === k);
  const xTicks = xIdx.map((i) => ({
    x: sx(i),
    label: (timestamps[i] ?? "").replace("T", " ").replace("Z", ""),
  }));
  return { width: WIDTH, height: HEIGHT, paths, yTicks, xTicks };
}

export function chartSvg(view: ChartView): string {
  const grid = view.yTicks
    .map(
      (t) =>
        `<line class="grid" x1="${PAD.left}" x2="${WIDTH - PAD.right}" ` +
        `y1="${t.y.toFixed(1)}" y2="${t.y.toFixed(1)}"/>` +
        `<text class="tick" x="${PAD.left - 6}" y="${(t.y + 4).toFixed(1)}" ` +
        `text-anchor="end">${t.label}</text>`,
    )
    .join("");
  const xAxis = view.xTicks
    .map(
      (t) =>
        `<text class="tick" x="${t.x.toFixed(1)}" y="${HEIGHT - 8}" ` +
        `text-anchor="middle">${t.label}</text>`,
    )
    .join("");
  const lines = view.paths
    .map((p) => `<path class="${p.cssClass}" d="${p.d}" fill="none"/>`)
    .join("");
  return (
    `<svg viewBox="0 0 ${view.width} ${view.height}" role="img">` +
    `${grid}${xAxis}${lines}</svg>`
  );
}
