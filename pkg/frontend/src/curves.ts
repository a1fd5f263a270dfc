/**
 * Aggregation of per-seed metric rows into mean ± std curves.
 *
 * Seeds of one method may have been evaluated at different trajectory
 * counts; series are aligned onto the first run's grid by nearest-x
 * lookup (noted on the figure when it actually happens).
 */

import { RunData, loadRun } from "./csv";

export interface CurveSpec {
  metric: string;
  groups: { label: string; directories: string[] }[];
  logX: boolean;
  logY: boolean;
  output: string;
  title?: string;
}

export interface Curve {
  label: string;
  x: number[];
  mean: number[];
  std: number[];
  seeds: number;
  aligned: boolean; // true when nearest-x interpolation had to kick in
}

function extractSeries(run: RunData, metric: string): { x: number[]; y: number[] } {
  if (!run.columns.includes(metric)) {
    throw new Error(`run ${run.directory} has no "${metric}" column`);
  }
  const x: number[] = [];
  const y: number[] = [];
  for (const row of run.rows) {
    const value = row[metric];
    if (value !== null && !Number.isNaN(value)) {
      x.push(row.trajectories);
      y.push(value);
    }
  }
  if (!x.length) {
    throw new Error(`run ${run.directory} has no values for "${metric}"`);
  }
  return { x, y };
}

/** Index of the x-grid point nearest to the query (ties go left). */
function nearestIndex(grid: number[], query: number): number {
  let best = 0;
  let bestGap = Math.abs(grid[0] - query);
  for (let i = 1; i < grid.length; i++) {
    const gap = Math.abs(grid[i] - query);
    if (gap < bestGap) {
      best = i;
      bestGap = gap;
    }
  }
  return best;
}

export function buildCurve(label: string, runs: RunData[], metric: string): Curve {
  if (!runs.length) {
    throw new Error(`group "${label}" has no runs`);
  }
  const series = runs.map((run) => extractSeries(run, metric));
  const grid = series[0].x;
  let aligned = false;
  const perSeed: number[][] = series.map((s) => {
    if (s.x.length === grid.length && s.x.every((v, i) => v === grid[i])) {
      return s.y;
    }
    aligned = true;
    return grid.map((q) => s.y[nearestIndex(s.x, q)]);
  });
  const mean = grid.map((_, i) => {
    let total = 0;
    for (const seed of perSeed) total += seed[i];
    return total / perSeed.length;
  });
  const std = grid.map((_, i) => {
    const m = mean[i];
    let total = 0;
    for (const seed of perSeed) total += (seed[i] - m) ** 2;
    return Math.sqrt(total / perSeed.length);
  });
  return { label, x: grid, mean, std, seeds: runs.length, aligned };
}

export function buildCurves(spec: CurveSpec): Curve[] {
  return spec.groups.map((group) =>
    buildCurve(group.label, group.directories.map(loadRun), spec.metric)
  );
}
