#!/usr/bin/env node
/**
 * Render mean ± std training curves from harness run directories.
 *
 * Usage:
 *   softflow-plots --metric l1 \
 *     --group "mdqn=runs/mdqn-seed0,runs/mdqn-seed1,runs/mdqn-seed2" \
 *     --group "tb=runs/tb-seed0,runs/tb-seed1" \
 *     --out l1.svg [--log-x] [--log-y] [--title "8x8 grid"]
 *
 * Every --group is one labeled curve averaged over its run directories.
 */

import * as fs from "fs";
import * as path from "path";
import { CurveSpec, buildCurves } from "./curves";
import { renderCurves } from "./svg";

export function parseArgs(argv: string[]): CurveSpec {
  const spec: CurveSpec = {
    metric: "l1",
    groups: [],
    logX: false,
    logY: false,
    output: "curves.svg",
  };
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => {
      if (i + 1 >= argv.length) throw new Error(`${arg} needs a value`);
      return argv[++i];
    };
    switch (arg) {
      case "--metric":
        spec.metric = next();
        break;
      case "--group": {
        const raw = next();
        const eq = raw.indexOf("=");
        if (eq <= 0) throw new Error(`--group expects "label=dir1,dir2", got "${raw}"`);
        spec.groups.push({
          label: raw.slice(0, eq),
          directories: raw
            .slice(eq + 1)
            .split(",")
            .map((d) => d.trim())
            .filter(Boolean),
        });
        break;
      }
      case "--out":
        spec.output = next();
        break;
      case "--title":
        spec.title = next();
        break;
      case "--log-x":
        spec.logX = true;
        break;
      case "--log-y":
        spec.logY = true;
        break;
      default:
        throw new Error(`unknown argument: ${arg}`);
    }
  }
  if (!spec.groups.length) {
    throw new Error("at least one --group is required");
  }
  return spec;
}

export function run(argv: string[]): string {
  const spec = parseArgs(argv);
  const curves = buildCurves(spec);
  const svg = renderCurves(curves, {
    metric: spec.metric,
    logX: spec.logX,
    logY: spec.logY,
    title: spec.title,
  });
  fs.mkdirSync(path.dirname(path.resolve(spec.output)), { recursive: true });
  fs.writeFileSync(spec.output, svg + "\n", "utf8");
  return spec.output;
}

if (require.main === module) {
  try {
    const output = run(process.argv.slice(2));
    console.log(`wrote ${output}`);
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    process.exit(1);
  }
}
