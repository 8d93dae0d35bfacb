/**
 * Standalone batch renderer.
 *
 * Usage:
 *   node render.js convergence --trace t.csv --series s.csv [--k-max N] --out fig.svg
 *   node render.js gelation    --window w.json --series s.csv           --out fig.svg
 *   node render.js diagnostic  --report d.json                          --out fig.svg
 *
 * Exit codes: 0 success, 1 on bad arguments, unreadable inputs, or schema
 * violations (the offending row is included in the message).
 */

import * as fs from "fs";

import { parseCsv, SchemaError } from "./csv";
import {
  InputError,
  convergenceFigure,
  diagnosticFigure,
  gelationFigure,
  parseDiagnosticReport,
  parseWindowReport,
} from "./figures";

const USAGE =
  "usage: render <convergence|gelation|diagnostic> [--trace F] [--series F] " +
  "[--window F] [--report F] [--k-max N] --out F";

function parseArgs(argv: string[]): { kind: string; opts: Map<string, string> } {
  if (argv.length === 0) throw new InputError(USAGE);
  const [kind, ...rest] = argv;
  const opts = new Map<string, string>();
  for (let i = 0; i < rest.length; i += 2) {
    const flag = rest[i];
    if (!flag.startsWith("--") || i + 1 >= rest.length) {
      throw new InputError(`bad argument ${flag}; ${USAGE}`);
    }
    opts.set(flag.slice(2), rest[i + 1]);
  }
  return { kind, opts };
}

function need(opts: Map<string, string>, name: string): string {
  const v = opts.get(name);
  if (v === undefined) throw new InputError(`missing required flag --${name}`);
  return v;
}

function readText(path: string): string {
  try {
    return fs.readFileSync(path, "utf8");
  } catch (e) {
    throw new InputError(`cannot read ${path}: ${(e as Error).message}`);
  }
}

export function main(argv: string[]): number {
  try {
    const { kind, opts } = parseArgs(argv);
    const out = need(opts, "out");
    let svg: string;
    if (kind === "convergence") {
      const trace = parseCsv(readText(need(opts, "trace")), opts.get("trace"));
      const series = parseCsv(readText(need(opts, "series")), opts.get("series"));
      const kMaxRaw = opts.get("k-max") ?? "5";
      const kMax = Number(kMaxRaw);
      if (!Number.isInteger(kMax) || kMax < 1) {
        throw new InputError(`--k-max must be a positive integer, got ${kMaxRaw}`);
      }
      svg = convergenceFigure(trace, series, kMax);
    } else if (kind === "gelation") {
      const windowPath = need(opts, "window");
      const window = parseWindowReport(readText(windowPath), windowPath);
      const series = parseCsv(readText(need(opts, "series")), opts.get("series"));
      svg = gelationFigure(window, series);
    } else if (kind === "diagnostic") {
      const reportPath = need(opts, "report");
      const report = parseDiagnosticReport(readText(reportPath), reportPath);
      svg = diagnosticFigure(report);
    } else {
      throw new InputError(`unknown figure kind "${kind}"; ${USAGE}`);
    }
    fs.writeFileSync(out, svg);
    return 0;
  } catch (e) {
    if (e instanceof SchemaError || e instanceof InputError) {
      console.error(`error: ${e.message}`);
      return 1;
    }
    console.error(`error: ${(e as Error).message}`);
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
