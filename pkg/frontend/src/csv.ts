/**
 * Reader for the training harness metrics files.
 *
 * Schema: trajectories,l1,tv_exact,loss,modes,seconds,seed: one row per
 * evaluation, blank cells where a metric does not apply to the run.
 */

import * as fs from "fs";
import * as path from "path";

export interface MetricsRow {
  trajectories: number;
  [metric: string]: number | null;
}

export interface RunData {
  directory: string;
  rows: MetricsRow[];
  columns: string[];
}

export function parseMetricsCsv(text: string): { rows: MetricsRow[]; columns: string[] } {
  const lines = text.trim().split(/\r?\n/);
  if (lines.length < 2) {
    throw new Error("metrics CSV has no data rows");
  }
  const columns = lines[0].split(",").map((c) => c.trim());
  if (!columns.includes("trajectories")) {
    throw new Error('metrics CSV is missing the "trajectories" column');
  }
  const rows: MetricsRow[] = [];
  for (const line of lines.slice(1)) {
    if (!line.trim()) continue;
    const cells = line.split(",");
    if (cells.length !== columns.length) {
      throw new Error(`row has ${cells.length} cells, expected ${columns.length}: ${line}`);
    }
    const row: MetricsRow = { trajectories: NaN };
    columns.forEach((name, i) => {
      const cell = cells[i].trim();
      row[name] = cell === "" ? null : Number(cell);
      if (cell !== "" && Number.isNaN(row[name])) {
        throw new Error(`non-numeric cell "${cell}" in column ${name}`);
      }
    });
    if (row.trajectories === null || Number.isNaN(row.trajectories)) {
      throw new Error(`row is missing a trajectory count: ${line}`);
    }
    rows.push(row);
  }
  return { rows, columns };
}

/** Load one run directory (expects a metrics.csv inside). */
export function loadRun(directory: string): RunData {
  const file = path.join(directory, "metrics.csv");
  const { rows, columns } = parseMetricsCsv(fs.readFileSync(file, "utf8"));
  return { directory, rows, columns };
}
