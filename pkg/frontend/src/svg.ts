/** Minimal deterministic SVG emitter: fixed canvas, fixed style, no
 * timestamps or generated ids, so identical input renders byte-identical
 * output. */

export const WIDTH = 760;
export const HEIGHT = 480;
const MARGIN = { left: 72, right: 24, top: 44, bottom: 52 };

export const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

export function fmt(x: number): string {
  if (x === 0) return "0";
  const ax = Math.abs(x);
  if (ax >= 1e4 || ax < 1e-3) {
    return x.toExponential(2).replace("e", "e");
  }
  return Number(x.toPrecision(6)).toString();
}

export interface Series {
  label: string;
  x: number[];
  y: number[];
  color?: string;
}

export interface AxesSpec {
  title: string;
  xlabel: string;
  ylabel: string;
  logY?: boolean;
}

function niceTicks(lo: number, hi: number, count = 5): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const err = span / (count * step);
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = mult * step;
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / s) * s; v <= hi + 1e-12 * span; v += s) {
    ticks.push(Math.abs(v) < 1e-12 * span ? 0 : v);
  }
  return ticks;
}

export function lineChart(series: Series[], spec: AxesSpec): string {
  const pts = series.flatMap((s) => s.x.map((x, i) => [x, s.y[i]]));
  const xs = pts.map((p) => p[0]);
  const ysRaw = pts.map((p) => p[1]);
  const ys = spec.logY ? ysRaw.filter((v) => v > 0).map(Math.log10) : ysRaw;
  let x0 = Math.min(...xs);
  let x1 = Math.max(...xs);
  let y0 = Math.min(...ys);
  let y1 = Math.max(...ys);
  if (x1 === x0) { x0 -= 0.5; x1 += 0.5; }
  if (y1 === y0) { y0 -= 0.5; y1 += 0.5; }
  const iw = WIDTH - MARGIN.left - MARGIN.right;
  const ih = HEIGHT - MARGIN.top - MARGIN.bottom;
  const px = (x: number) => MARGIN.left + ((x - x0) / (x1 - x0)) * iw;
  const py = (y: number) => MARGIN.top + ih - ((y - y0) / (y1 - y0)) * ih;

  const parts: string[] = [];
  parts.push(header());
  parts.push(`<text x="${WIDTH / 2}" y="24" text-anchor="middle" font-size="16" font-family="monospace">${esc(spec.title)}</text>`);
  // frame
  parts.push(`<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${iw}" height="${ih}" fill="none" stroke="#333" stroke-width="1"/>`);
  // ticks
  for (const t of niceTicks(x0, x1)) {
    const X = px(t);
    parts.push(`<line x1="${fmt(X)}" y1="${MARGIN.top + ih}" x2="${fmt(X)}" y2="${MARGIN.top + ih + 5}" stroke="#333"/>`);
    parts.push(`<text x="${fmt(X)}" y="${MARGIN.top + ih + 20}" text-anchor="middle" font-size="11" font-family="monospace">${fmt(t)}</text>`);
  }
  for (const t of niceTicks(y0, y1)) {
    const Y = py(t);
    const label = spec.logY ? `1e${fmt(t)}` : fmt(t);
    parts.push(`<line x1="${MARGIN.left - 5}" y1="${fmt(Y)}" x2="${MARGIN.left}" y2="${fmt(Y)}" stroke="#333"/>`);
    parts.push(`<text x="${MARGIN.left - 8}" y="${fmt(Y + 4)}" text-anchor="end" font-size="11" font-family="monospace">${label}</text>`);
  }
  parts.push(`<text x="${WIDTH / 2}" y="${HEIGHT - 12}" text-anchor="middle" font-size="13" font-family="monospace">${esc(spec.xlabel)}</text>`);
  parts.push(`<text x="18" y="${HEIGHT / 2}" text-anchor="middle" font-size="13" font-family="monospace" transform="rotate(-90 18 ${HEIGHT / 2})">${esc(spec.ylabel)}</text>`);
  series.forEach((s, si) => {
    const color = s.color ?? PALETTE[si % PALETTE.length];
    const coords: string[] = [];
    s.x.forEach((x, i) => {
      const yv = spec.logY ? (s.y[i] > 0 ? Math.log10(s.y[i]) : null) : s.y[i];
      if (yv !== null && yv !== undefined && Number.isFinite(yv)) {
        coords.push(`${fmt(px(x))},${fmt(py(yv))}`);
      }
    });
    parts.push(`<polyline points="${coords.join(" ")}" fill="none" stroke="${color}" stroke-width="1.6"/>`);
    const lx = MARGIN.left + iw - 150;
    const ly = MARGIN.top + 16 + 18 * si;
    parts.push(`<line x1="${lx}" y1="${ly - 4}" x2="${lx + 26}" y2="${ly - 4}" stroke="${color}" stroke-width="2"/>`);
    parts.push(`<text x="${lx + 32}" y="${ly}" font-size="12" font-family="monospace">${esc(s.label)}</text>`);
  });
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

export interface HeatCell {
  ix: number;
  iy: number;
  value: number;
}

export function heatmap(
  cells: HeatCell[],
  xLabels: string[],
  yLabels: string[],
  spec: AxesSpec,
): string {
  const vals = cells.map((c) => c.value);
  const lo = Math.min(...vals);
  const hi = Math.max(...vals);
  const iw = WIDTH - MARGIN.left - MARGIN.right - 70; // room for the bar
  const ih = HEIGHT - MARGIN.top - MARGIN.bottom;
  const cw = iw / xLabels.length;
  const ch = ih / yLabels.length;
  const parts: string[] = [header()];
  parts.push(`<text x="${WIDTH / 2}" y="24" text-anchor="middle" font-size="16" font-family="monospace">${esc(spec.title)}</text>`);
  for (const c of cells) {
    const frac = hi > lo ? (c.value - lo) / (hi - lo) : 0.5;
    parts.push(
      `<rect x="${fmt(MARGIN.left + c.ix * cw)}" y="${fmt(MARGIN.top + c.iy * ch)}" ` +
        `width="${fmt(cw)}" height="${fmt(ch)}" fill="${colorScale(frac)}" stroke="#222" stroke-width="0.5"/>`,
    );
    parts.push(
      `<text x="${fmt(MARGIN.left + (c.ix + 0.5) * cw)}" y="${fmt(MARGIN.top + (c.iy + 0.5) * ch + 4)}" ` +
        `text-anchor="middle" font-size="11" font-family="monospace" fill="#fff">${c.value.toExponential(1)}</text>`,
    );
  }
  xLabels.forEach((lb, i) => {
    parts.push(`<text x="${fmt(MARGIN.left + (i + 0.5) * cw)}" y="${MARGIN.top + ih + 18}" text-anchor="middle" font-size="12" font-family="monospace">${esc(lb)}</text>`);
  });
  yLabels.forEach((lb, i) => {
    parts.push(`<text x="${MARGIN.left - 8}" y="${fmt(MARGIN.top + (i + 0.5) * ch + 4)}" text-anchor="end" font-size="12" font-family="monospace">${esc(lb)}</text>`);
  });
  parts.push(`<text x="${WIDTH / 2}" y="${HEIGHT - 12}" text-anchor="middle" font-size="13" font-family="monospace">${esc(spec.xlabel)}</text>`);
  parts.push(`<text x="18" y="${HEIGHT / 2}" text-anchor="middle" font-size="13" font-family="monospace" transform="rotate(-90 18 ${HEIGHT / 2})">${esc(spec.ylabel)}</text>`);
  // color bar
  const bx = WIDTH - MARGIN.right - 40;
  for (let i = 0; i < 40; i++) {
    const frac = 1 - i / 39;
    parts.push(`<rect x="${bx}" y="${fmt(MARGIN.top + (i * ih) / 40)}" width="16" height="${fmt(ih / 40 + 0.5)}" fill="${colorScale(frac)}"/>`);
  }
  parts.push(`<text x="${bx + 20}" y="${MARGIN.top + 10}" font-size="10" font-family="monospace">${hi.toExponential(1)}</text>`);
  parts.push(`<text x="${bx + 20}" y="${MARGIN.top + ih}" font-size="10" font-family="monospace">${lo.toExponential(1)}</text>`);
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

function header(): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
    `viewBox="0 0 ${WIDTH} ${HEIGHT}">\n<rect width="${WIDTH}" height="${HEIGHT}" fill="#ffffff"/>`
  );
}

function colorScale(frac: number): string {
  // dark blue -> teal -> yellow, three-stop linear interpolation
  const stops: [number, number, number][] = [
    [40, 50, 105],
    [38, 130, 142],
    [253, 231, 37],
  ];
  const t = Math.min(1, Math.max(0, frac)) * (stops.length - 1);
  const i = Math.min(stops.length - 2, Math.floor(t));
  const f = t - i;
  const mix = stops[i].map((c, k) => Math.round(c + f * (stops[i + 1][k] - c)));
  return `rgb(${mix[0]},${mix[1]},${mix[2]})`;
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}
