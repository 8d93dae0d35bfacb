/**
 * Parser for the shared artifact CSV schema: `t,k,value,kind`.
 *
 * Scalar-in-t kinds carry k = 0.  Schema violations raise SchemaError with
 * the offending row (file, line number, raw content).
 */

export interface Row {
  t: number;
  k: number;
  value: number;
  kind: string;
}

export class SchemaError extends Error {}

const HEADER = "t,k,value,kind";

export function parseCsv(text: string, path = "<csv>"): Row[] {
  const lines = text.split(/\r?\n/);
  if (lines.length === 0 || lines[0].trim() !== HEADER) {
    throw new SchemaError(
      `${path}:1: expected header "${HEADER}", got "${lines[0] ?? ""}"`
    );
  }
  const rows: Row[] = [];
  for (let i = 1; i < lines.length; i++) {
    const line = lines[i];
    if (line.trim() === "") continue;
    const parts = line.split(",");
    if (parts.length !== 4) {
      throw new SchemaError(`${path}:${i + 1}: expected 4 columns, got row "${line}"`);
    }
    const t = Number(parts[0]);
    const k = Number(parts[1]);
    const value = Number(parts[2]);
    const kind = parts[3];
    if (!Number.isFinite(t) || !Number.isFinite(value)) {
      throw new SchemaError(`${path}:${i + 1}: non-numeric field in row "${line}"`);
    }
    if (!Number.isInteger(k) || k < 0) {
      throw new SchemaError(`${path}:${i + 1}: k must be an integer >= 0 in row "${line}"`);
    }
    if (kind === "") {
      throw new SchemaError(`${path}:${i + 1}: empty kind in row "${line}"`);
    }
    rows.push({ t, k, value, kind });
  }
  return rows;
}

/** Rows of one kind, in file order. */
export function ofKind(rows: Row[], kind: string): Row[] {
  return rows.filter((r) => r.kind === kind);
}

/** Group rows of a per-k kind into k -> sorted [t, value] pairs. */
export function curvesByK(rows: Row[], kind: string): Map<number, Array<[number, number]>> {
  const out = new Map<number, Array<[number, number]>>();
  for (const r of ofKind(rows, kind)) {
    let arr = out.get(r.k);
    if (arr === undefined) {
      arr = [];
      out.set(r.k, arr);
    }
    arr.push([r.t, r.value]);
  }
  for (const arr of out.values()) arr.sort((a, b) => a[0] - b[0]);
  return out;
}
