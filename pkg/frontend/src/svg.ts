/**
 * Dependency-free SVG rendering of mean ± std training curves.
 *
 * Each mean polyline carries machine-readable `data-x` / `data-mean`
 * attributes holding the unscaled values it plots, so tests (and anyone
 * scraping figures) can recover the numbers exactly.
 */

import { Curve } from "./curves";

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

const WIDTH = 720;
const HEIGHT = 480;
const MARGIN = { left: 70, right: 20, top: 40, bottom: 55 };

interface Scale {
  (value: number): number;
  ticks: number[];
}

function linearScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  const scale = ((value: number) =>
    outLo + ((value - lo) / (hi - lo)) * (outHi - outLo)) as Scale;
  const step = niceStep(hi - lo);
  const ticks: number[] = [];
  for (let t = Math.ceil(lo / step) * step; t <= hi + 1e-12 * Math.abs(hi); t += step) {
    ticks.push(Number(t.toPrecision(12)));
  }
  scale.ticks = ticks;
  return scale;
}

function logScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const safeLo = Math.log10(Math.max(lo, Number.MIN_VALUE));
  const safeHi = Math.log10(Math.max(hi, lo * 10 || 1));
  const inner = linearScale(safeLo, safeHi, outLo, outHi);
  const scale = ((value: number) =>
    inner(Math.log10(Math.max(value, Number.MIN_VALUE)))) as Scale;
  const ticks: number[] = [];
  for (let p = Math.ceil(safeLo); p <= Math.floor(safeHi); p++) {
    ticks.push(10 ** p);
  }
  scale.ticks = ticks.length ? ticks : [10 ** Math.round((safeLo + safeHi) / 2)];
  return scale;
}

function niceStep(span: number): number {
  const raw = span / 6;
  const magnitude = 10 ** Math.floor(Math.log10(raw));
  const residual = raw / magnitude;
  if (residual >= 5) return 5 * magnitude;
  if (residual >= 2) return 2 * magnitude;
  return magnitude;
}

function formatTick(value: number): string {
  if (value === 0) return "0";
  const abs = Math.abs(value);
  if (abs >= 1e5 || abs < 1e-3) return value.toExponential(0);
  return Number(value.toPrecision(6)).toString();
}

function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export interface RenderOptions {
  metric: string;
  logX: boolean;
  logY: boolean;
  title?: string;
}

export function renderCurves(curves: Curve[], options: RenderOptions): string {
  if (!curves.length) {
    throw new Error("nothing to plot");
  }
  const xs = curves.flatMap((c) => c.x);
  const lows = curves.flatMap((c) => c.mean.map((m, i) => m - c.std[i]));
  const highs = curves.flatMap((c) => c.mean.map((m, i) => m + c.std[i]));
  const xScale = (options.logX ? logScale : linearScale)(
    Math.min(...xs),
    Math.max(...xs),
    MARGIN.left,
    WIDTH - MARGIN.right
  );
  const yValues = options.logY ? curves.flatMap((c) => c.mean) : lows.concat(highs);
  const yScale = (options.logY ? logScale : linearScale)(
    Math.min(...yValues),
    Math.max(...yValues),
    HEIGHT - MARGIN.bottom,
    MARGIN.top
  );

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
      `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="sans-serif" font-size="12">`
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  if (options.title) {
    parts.push(
      `<text x="${WIDTH / 2}" y="22" text-anchor="middle" font-size="15">` +
        `${escapeXml(options.title)}</text>`
    );
  }

  // axes
  const x0 = MARGIN.left;
  const y0 = HEIGHT - MARGIN.bottom;
  parts.push(
    `<line x1="${x0}" y1="${y0}" x2="${WIDTH - MARGIN.right}" y2="${y0}" stroke="black"/>`
  );
  parts.push(`<line x1="${x0}" y1="${MARGIN.top}" x2="${x0}" y2="${y0}" stroke="black"/>`);
  for (const tick of xScale.ticks) {
    const px = xScale(tick);
    parts.push(`<line x1="${px}" y1="${y0}" x2="${px}" y2="${y0 + 5}" stroke="black"/>`);
    parts.push(
      `<text x="${px}" y="${y0 + 20}" text-anchor="middle">${formatTick(tick)}</text>`
    );
  }
  for (const tick of yScale.ticks) {
    const py = yScale(tick);
    parts.push(`<line x1="${x0 - 5}" y1="${py}" x2="${x0}" y2="${py}" stroke="black"/>`);
    parts.push(
      `<text x="${x0 - 8}" y="${py + 4}" text-anchor="end">${formatTick(tick)}</text>`
    );
  }
  parts.push(
    `<text x="${(x0 + WIDTH - MARGIN.right) / 2}" y="${HEIGHT - 12}" ` +
      `text-anchor="middle">trajectories</text>`
  );
  parts.push(
    `<text x="18" y="${(MARGIN.top + y0) / 2}" text-anchor="middle" ` +
      `transform="rotate(-90 18 ${(MARGIN.top + y0) / 2})">${escapeXml(options.metric)}</text>`
  );

  // bands then lines, so every mean stays visible
  curves.forEach((curve, index) => {
    const color = PALETTE[index % PALETTE.length];
    if (curve.std.some((s) => s > 0)) {
      const upper = curve.x.map(
        (x, i) => `${xScale(x)},${yScale(curve.mean[i] + curve.std[i])}`
      );
      const lower = curve.x
        .map((x, i) => `${xScale(x)},${yScale(Math.max(curve.mean[i] - curve.std[i], options.logY ? Number.MIN_VALUE : -Infinity))}`)
        .reverse();
      parts.push(
        `<polygon points="${upper.concat(lower).join(" ")}" fill="${color}" ` +
          `fill-opacity="0.15" stroke="none"/>`
      );
    }
    const points = curve.x.map((x, i) => `${xScale(x)},${yScale(curve.mean[i])}`);
    parts.push(
      `<polyline points="${points.join(" ")}" fill="none" stroke="${color}" ` +
        `stroke-width="1.8" data-label="${escapeXml(curve.label)}" ` +
        `data-x="${curve.x.join(" ")}" data-mean="${curve.mean.join(" ")}" ` +
        `data-std="${curve.std.join(" ")}"/>`
    );
  });

  // legend
  curves.forEach((curve, index) => {
    const color = PALETTE[index % PALETTE.length];
    const y = MARGIN.top + 16 * index;
    const note = curve.aligned ? ", nearest-x aligned" : "";
    parts.push(
      `<line x1="${WIDTH - 190}" y1="${y}" x2="${WIDTH - 165}" y2="${y}" ` +
        `stroke="${color}" stroke-width="2"/>`
    );
    parts.push(
      `<text x="${WIDTH - 158}" y="${y + 4}">${escapeXml(curve.label)} ` +
        `(${curve.seeds} seeds${note})</text>`
    );
  });

  parts.push("</svg>");
  return parts.join("\n");
}
