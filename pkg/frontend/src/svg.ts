/**
 * Minimal deterministic SVG scene builder.
 *
 * All coordinates are formatted with a fixed number of decimals and styles
 * are constants, so identical inputs always produce byte-identical output.
 * No timestamps, no randomness, no environment lookups.
 */

export const WIDTH = 640;
export const HEIGHT = 420;
export const MARGIN = { left: 58, right: 16, top: 34, bottom: 44 };

export const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
  "#17becf",
  "#7f7f7f",
];

const px = (x: number): string => x.toFixed(2);

export interface Range {
  min: number;
  max: number;
}

export function rangeOf(values: number[], padFrac = 0.05): Range {
  let min = Infinity;
  let max = -Infinity;
  for (const v of values) {
    if (v < min) min = v;
    if (v > max) max = v;
  }
  if (!Number.isFinite(min) || !Number.isFinite(max)) {
    min = 0;
    max = 1;
  }
  if (min === max) {
    min -= 0.5;
    max += 0.5;
  }
  const pad = (max - min) * padFrac;
  return { min: min - pad, max: max + pad };
}

export class Scene {
  private parts: string[] = [];
  constructor(
    public readonly xr: Range,
    public readonly yr: Range,
    title: string,
    xLabel: string,
    yLabel: string
  ) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
        `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="monospace" font-size="12">`
    );
    this.parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="#ffffff"/>`);
    this.axes(title, xLabel, yLabel);
  }

  x(v: number): number {
    const { min, max } = this.xr;
    return MARGIN.left + ((v - min) / (max - min)) * (WIDTH - MARGIN.left - MARGIN.right);
  }

  y(v: number): number {
    const { min, max } = this.yr;
    return HEIGHT - MARGIN.bottom - ((v - min) / (max - min)) * (HEIGHT - MARGIN.top - MARGIN.bottom);
  }

  private axes(title: string, xLabel: string, yLabel: string): void {
    const x0 = MARGIN.left;
    const x1 = WIDTH - MARGIN.right;
    const y0 = HEIGHT - MARGIN.bottom;
    const y1 = MARGIN.top;
    this.parts.push(
      `<line x1="${px(x0)}" y1="${px(y0)}" x2="${px(x1)}" y2="${px(y0)}" stroke="#000000"/>`
    );
    this.parts.push(
      `<line x1="${px(x0)}" y1="${px(y0)}" x2="${px(x0)}" y2="${px(y1)}" stroke="#000000"/>`
    );
    this.parts.push(
      `<text x="${px((x0 + x1) / 2)}" y="20" text-anchor="middle">${esc(title)}</text>`
    );
    this.parts.push(
      `<text x="${px((x0 + x1) / 2)}" y="${px(HEIGHT - 10)}" text-anchor="middle">${esc(xLabel)}</text>`
    );
    this.parts.push(
      `<text x="14" y="${px((y0 + y1) / 2)}" text-anchor="middle" ` +
        `transform="rotate(-90 14 ${px((y0 + y1) / 2)})">${esc(yLabel)}</text>`
    );
    for (const frac of [0, 0.25, 0.5, 0.75, 1]) {
      const xv = this.xr.min + frac * (this.xr.max - this.xr.min);
      const yv = this.yr.min + frac * (this.yr.max - this.yr.min);
      const xp = this.x(xv);
      const yp = this.y(yv);
      this.parts.push(
        `<line x1="${px(xp)}" y1="${px(y0)}" x2="${px(xp)}" y2="${px(y0 + 4)}" stroke="#000000"/>`
      );
      this.parts.push(
        `<text x="${px(xp)}" y="${px(y0 + 17)}" text-anchor="middle">${fmtTick(xv)}</text>`
      );
      this.parts.push(
        `<line x1="${px(x0 - 4)}" y1="${px(yp)}" x2="${px(x0)}" y2="${px(yp)}" stroke="#000000"/>`
      );
      this.parts.push(
        `<text x="${px(x0 - 7)}" y="${px(yp + 4)}" text-anchor="end">${fmtTick(yv)}</text>`
      );
    }
  }

  polyline(points: Array<[number, number]>, color: string, dash = ""): void {
    const pts = points.map(([a, b]) => `${px(this.x(a))},${px(this.y(b))}`).join(" ");
    const dashAttr = dash === "" ? "" : ` stroke-dasharray="${dash}"`;
    this.parts.push(
      `<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="1.5"${dashAttr}/>`
    );
  }

  dots(points: Array<[number, number]>, color: string, r = 3): void {
    for (const [a, b] of points) {
      this.parts.push(
        `<circle cx="${px(this.x(a))}" cy="${px(this.y(b))}" r="${r}" fill="${color}"/>`
      );
    }
  }

  hline(yValue: number, color: string, label: string): void {
    const yp = this.y(yValue);
    this.parts.push(
      `<line x1="${px(MARGIN.left)}" y1="${px(yp)}" x2="${px(WIDTH - MARGIN.right)}" ` +
        `y2="${px(yp)}" stroke="${color}" stroke-dasharray="6 3"/>`
    );
    this.parts.push(
      `<text x="${px(WIDTH - MARGIN.right)}" y="${px(yp - 5)}" text-anchor="end" ` +
        `fill="${color}">${esc(label)}</text>`
    );
  }

  band(xFrom: number, xTo: number, color: string): void {
    const a = this.x(xFrom);
    const b = this.x(xTo);
    this.parts.push(
      `<rect x="${px(a)}" y="${px(MARGIN.top)}" width="${px(Math.max(b - a, 0.5))}" ` +
        `height="${px(HEIGHT - MARGIN.top - MARGIN.bottom)}" fill="${color}" fill-opacity="0.25"/>`
    );
  }

  legend(entries: Array<[string, string]>): void {
    let y = MARGIN.top + 14;
    for (const [label, color] of entries) {
      const x = WIDTH - MARGIN.right - 150;
      this.parts.push(
        `<line x1="${px(x)}" y1="${px(y - 4)}" x2="${px(x + 18)}" y2="${px(y - 4)}" ` +
          `stroke="${color}" stroke-width="2"/>`
      );
      this.parts.push(`<text x="${px(x + 24)}" y="${px(y)}">${esc(label)}</text>`);
      y += 16;
    }
  }

  render(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function fmtTick(v: number): string {
  const a = Math.abs(v);
  if (a !== 0 && (a >= 10000 || a < 0.01)) return v.toExponential(1);
  return v.toFixed(3).replace(/0+$/, "").replace(/\.$/, "");
}
