import { readFileSync } from "fs";
import { join } from "path";
import { describe, expect, it } from "vitest";

import { SchemaError, curvesByK, ofKind, parseCsv } from "../src/csv";

const FIX = join(__dirname, "fixtures");

describe("parseCsv", () => {
  it("parses a real trace artifact", () => {
    const rows = parseCsv(readFileSync(join(FIX, "trace.csv"), "utf8"), "trace.csv");
    expect(rows.length).toBeGreaterThan(0);
    const kinds = new Set(rows.map((r) => r.kind));
    expect(kinds).toContain("nk");
    expect(kinds).toContain("l1");
    // scalar kinds carry k = 0
    for (const r of rows) if (r.kind !== "nk") expect(r.k).toBe(0);
  });

  it("rejects a wrong header", () => {
    expect(() => parseCsv("a,b,c,d\n", "x.csv")).toThrowError(SchemaError);
    expect(() => parseCsv("a,b,c,d\n", "x.csv")).toThrowError(/x\.csv:1/);
  });

  it("reports the offending row on violation", () => {
    const text = "t,k,value,kind\n0.1,1,0.5,nk\n0.2,zebra,0.5,nk\n";
    expect(() => parseCsv(text, "bad.csv")).toThrowError(/bad\.csv:3.*zebra/);
  });

  it("rejects rows with the wrong column count", () => {
    const text = "t,k,value,kind\n0.1,1,0.5\n";
    expect(() => parseCsv(text, "bad.csv")).toThrowError(/expected 4 columns/);
  });

  it("groups per-k curves sorted by t", () => {
    const text = "t,k,value,kind\n0.2,1,0.5,nk\n0.1,1,0.9,nk\n0.1,2,0.1,nk\n0.1,0,1.0,l1\n";
    const rows = parseCsv(text);
    const curves = curvesByK(rows, "nk");
    expect(curves.get(1)).toEqual([
      [0.1, 0.9],
      [0.2, 0.5],
    ]);
    expect(curves.get(2)).toEqual([[0.1, 0.1]]);
    expect(ofKind(rows, "l1")).toHaveLength(1);
  });
});
