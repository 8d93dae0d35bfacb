import { execFileSync } from "child_process";
import { existsSync, mkdtempSync, readFileSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import { describe, expect, it } from "vitest";

import { parseCsv } from "../src/csv";
import {
  InputError,
  convergenceFigure,
  diagnosticFigure,
  gelationFigure,
  parseDiagnosticReport,
  parseWindowReport,
} from "../src/figures";
import { main } from "../src/render";

const FIX = join(__dirname, "fixtures");
const read = (name: string) => readFileSync(join(FIX, name), "utf8");

describe("convergence figure", () => {
  it("renders byte-deterministically", () => {
    const trace = parseCsv(read("trace.csv"));
    const series = parseCsv(read("series.csv"));
    const a = convergenceFigure(trace, series, 5);
    const b = convergenceFigure(parseCsv(read("trace.csv")), parseCsv(read("series.csv")), 5);
    expect(a).toBe(b);
    expect(a.startsWith("<svg")).toBe(true);
    expect(a).toContain("k = 1");
  });

  it("rejects inputs without common k", () => {
    const trace = parseCsv("t,k,value,kind\n0.1,0,0.5,l1\n");
    const series = parseCsv(read("series.csv"));
    expect(() => convergenceFigure(trace, series)).toThrowError(InputError);
  });
});

describe("gelation figure", () => {
  it("renders the window band", () => {
    const win = parseWindowReport(read("window.json"));
    const series = parseCsv(read("series.csv"));
    const svg = gelationFigure(win, series);
    expect(svg).toContain("fill-opacity");
    expect(svg).toBe(gelationFigure(win, series));
  });

  it("errors on an empty window file", () => {
    expect(() => parseWindowReport("", "empty.json")).toThrowError(/empty window file/);
  });

  it("errors on the wrong report kind", () => {
    expect(() => parseWindowReport(read("diag.json"), "diag.json")).toThrowError(
      /gelation_window/
    );
  });
});

describe("diagnostic figure", () => {
  it("draws the envelope at n^0.75 = 1000 for n = 10^4", () => {
    const rep = parseDiagnosticReport(read("diag.json"));
    expect(rep.n).toBe(10000);
    const svg = diagnosticFigure(rep);
    expect(svg).toContain("envelope n^(1/2+2*lam) = 1000");
    expect(svg).toBe(diagnosticFigure(rep));
  });

  it("rejects empty reports", () => {
    expect(() => parseDiagnosticReport("{}", "x.json")).toThrowError(InputError);
  });
});

describe("render entry point", () => {
  it("exits nonzero with usage on bad arguments", () => {
    expect(main([])).toBe(1);
    expect(main(["sculpture", "--out", "x.svg"])).toBe(1);
  });

  it("writes the three figure kinds with exit 0", () => {
    const dir = mkdtempSync(join(tmpdir(), "achlio-plots-"));
    const jobs: Array<[string, string[]]> = [
      ["convergence", ["--trace", join(FIX, "trace.csv"), "--series", join(FIX, "series.csv")]],
      ["gelation", ["--window", join(FIX, "window.json"), "--series", join(FIX, "series.csv")]],
      ["diagnostic", ["--report", join(FIX, "diag.json")]],
    ];
    for (const [kind, args] of jobs) {
      const out = join(dir, `${kind}.svg`);
      expect(main([kind, ...args, "--out", out])).toBe(0);
      expect(readFileSync(out, "utf8").startsWith("<svg")).toBe(true);
    }
  });

  it("compiled dist renderer is byte-deterministic", () => {
    const dist = join(__dirname, "..", "dist", "render.js");
    expect(existsSync(dist)).toBe(true);
    const dir = mkdtempSync(join(tmpdir(), "achlio-plots-"));
    const outs: Buffer[] = [];
    for (const name of ["a.svg", "b.svg"]) {
      const out = join(dir, name);
      execFileSync(process.execPath, [
        dist,
        "convergence",
        "--trace",
        join(FIX, "trace.csv"),
        "--series",
        join(FIX, "series.csv"),
        "--out",
        out,
      ]);
      outs.push(readFileSync(out));
    }
    expect(outs[0].equals(outs[1])).toBe(true);
  });

  it("propagates schema violations with the offending row", () => {
    const dir = mkdtempSync(join(tmpdir(), "achlio-plots-"));
    const bad = join(dir, "bad.csv");
    writeFileSync(bad, "t,k,value,kind\n0.1,oops,0.5,nk\n");
    expect(
      main(["convergence", "--trace", bad, "--series", join(FIX, "series.csv"), "--out", join(dir, "o.svg")])
    ).toBe(1);
  });
});
