/**
 * The three figure kinds, each a pure function from parsed inputs to SVG text.
 *
 * convergence: ODE curves rho_k(t) with empirical points N_k/n on top.
 * gelation:    gel mass 1 - M(t) with the bracketing window shaded.
 * diagnostic:  per-run max window deviation of Z against the n^(1/2+2*lam)
 *              envelope.
 */

import { Row, curvesByK, ofKind, SchemaError } from "./csv";
import { PALETTE, Scene, rangeOf } from "./svg";

export class InputError extends Error {}

export function convergenceFigure(traceRows: Row[], seriesRows: Row[], kMax = 5): string {
  const odeCurves = curvesByK(seriesRows, "rhok");
  const empCurves = curvesByK(traceRows, "nk");
  if (odeCurves.size === 0) throw new InputError("series input has no rhok rows");
  if (empCurves.size === 0) throw new InputError("trace input has no nk rows");
  const ks: number[] = [];
  for (let k = 1; k <= kMax; k++) {
    if (odeCurves.has(k) && empCurves.has(k)) ks.push(k);
  }
  if (ks.length === 0) throw new InputError(`no common k <= ${kMax} in the inputs`);
  const ts: number[] = [];
  const vs: number[] = [];
  for (const k of ks) {
    for (const [t, v] of odeCurves.get(k)!) {
      ts.push(t);
      vs.push(v);
    }
    for (const [t, v] of empCurves.get(k)!) {
      ts.push(t);
      vs.push(v);
    }
  }
  const scene = new Scene(
    rangeOf(ts, 0.02),
    rangeOf(vs.concat([0]), 0.05),
    "component mass fractions: ODE curves vs simulation points",
    "t",
    "N_k/n and rho_k(t)"
  );
  const legend: Array<[string, string]> = [];
  ks.forEach((k, i) => {
    const color = PALETTE[i % PALETTE.length];
    scene.polyline(odeCurves.get(k)!, color);
    scene.dots(empCurves.get(k)!, color);
    legend.push([`k = ${k}`, color]);
  });
  scene.legend(legend);
  return scene.render();
}

export interface WindowReport {
  kind: string;
  rule: string;
  K: number;
  t_lower: number | null;
  t_upper: number | null;
  one_sided: boolean;
}

export function parseWindowReport(text: string, path = "<window>"): WindowReport {
  if (text.trim() === "") throw new InputError(`${path}: empty window file`);
  let data: any;
  try {
    data = JSON.parse(text);
  } catch (e) {
    throw new InputError(`${path}: not valid JSON (${(e as Error).message})`);
  }
  if (!data || data.kind !== "gelation_window") {
    throw new InputError(`${path}: expected a gelation_window report`);
  }
  if (data.t_lower == null && data.t_upper == null) {
    throw new InputError(`${path}: window has neither bound; nothing to draw`);
  }
  return data as WindowReport;
}

export function gelationFigure(window: WindowReport, seriesRows: Row[]): string {
  const gel = ofKind(seriesRows, "gel")
    .map((r): [number, number] => [r.t, r.value])
    .sort((a, b) => a[0] - b[0]);
  if (gel.length === 0) throw new InputError("series input has no gel rows");
  const ts = gel.map((p) => p[0]);
  const vs = gel.map((p) => p[1]).concat([0, 1]);
  const scene = new Scene(
    rangeOf(ts, 0.02),
    rangeOf(vs, 0.05),
    `gel mass with gelation window (rule ${window.rule}, K=${window.K})`,
    "t",
    "1 - M(t)"
  );
  const lo = window.t_lower ?? ts[0];
  const hi = window.t_upper ?? ts[ts.length - 1];
  scene.band(lo, hi, "#ffbb44");
  scene.polyline(gel, PALETTE[0]);
  const legend: Array<[string, string]> = [["gel mass", PALETTE[0]], ["window", "#ffbb44"]];
  scene.legend(legend);
  return scene.render();
}

export interface DiagnosticReport {
  kind: string;
  lam: number;
  n: number;
  bound: number;
  ks: number[];
  max_dev: number[][];
  passes: boolean[];
}

export function parseDiagnosticReport(text: string, path = "<report>"): DiagnosticReport {
  if (text.trim() === "") throw new InputError(`${path}: empty report file`);
  let data: any;
  try {
    data = JSON.parse(text);
  } catch (e) {
    throw new InputError(`${path}: not valid JSON (${(e as Error).message})`);
  }
  if (!data || data.kind !== "martingale_diagnostic") {
    throw new InputError(`${path}: expected a martingale_diagnostic report`);
  }
  if (!Array.isArray(data.max_dev) || data.max_dev.length === 0) {
    throw new InputError(`${path}: report has no max_dev entries`);
  }
  return data as DiagnosticReport;
}

export function diagnosticFigure(report: DiagnosticReport): string {
  // envelope computed from the metadata, not trusted from the report body
  const envelope = Math.pow(report.n, 0.5 + 2 * report.lam);
  const runs = report.max_dev.length;
  const points: Array<Array<[number, number]>> = report.ks.map(() => []);
  for (let r = 0; r < runs; r++) {
    report.ks.forEach((_, i) => {
      points[i].push([r + 1, report.max_dev[r][i]]);
    });
  }
  const all: number[] = [envelope];
  for (const arr of points) for (const [, v] of arr) all.push(v);
  const scene = new Scene(
    { min: 0, max: runs + 1 },
    rangeOf(all.concat([0]), 0.05),
    `max window |Z| per run (n=${report.n}, lam=${report.lam})`,
    "run",
    "max |Z(m2) - Z(m1)|"
  );
  const legend: Array<[string, string]> = [];
  report.ks.forEach((k, i) => {
    const color = PALETTE[i % PALETTE.length];
    scene.dots(points[i], color);
    legend.push([`k = ${k}`, color]);
  });
  scene.hline(envelope, "#d62728", `envelope n^(1/2+2*lam) = ${envelope}`);
  scene.legend(legend);
  return scene.render();
}

export { SchemaError };
