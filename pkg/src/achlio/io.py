"""Artifact files: one metadata JSON plus one CSV per artifact.

Every artifact is a pair ``<stem>.json`` (metadata: full config, seed,
package version) and ``<stem>.csv`` with the shared column schema
``t,k,value,kind``.  Scalar-in-t kinds use k = 0.  Floats are serialized
with 17 significant digits, so reading an artifact back reproduces the
in-memory doubles bit-exactly.

Trace kinds:   nk, tail, l1, chi, chi_nolargest
Series kinds:  rhok, mass, gel, chi
Reports additionally serialize to ``<stem>.json`` / ``<stem>.txt`` via their
``to_json_dict`` / ``to_text`` methods; deviation reports also get a CSV
(kinds: empirical, ode, deviation, l1_empirical, l1_ode).
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Union

import numpy as np

from .kinetics import OdeSeries
from .process import Trace

__all__ = [
    "TRACE_KINDS",
    "SERIES_KINDS",
    "stem_of",
    "write_trace",
    "read_trace",
    "write_series",
    "read_series",
    "write_report",
    "read_json",
]

TRACE_KINDS = ("nk", "tail", "l1", "chi", "chi_nolargest")
SERIES_KINDS = ("rhok", "mass", "gel", "chi")

_HEADER = ["t", "k", "value", "kind"]


def stem_of(path: Union[str, Path]) -> Path:
    """Artifact stem: the path with any .json/.csv/.txt suffix stripped."""
    p = Path(path)
    if p.suffix in (".json", ".csv", ".txt"):
        return p.with_suffix("")
    return p


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _prepare(stem: Union[str, Path], suffixes, force: bool) -> Path:
    stem = stem_of(stem)
    if not force:
        for suf in suffixes:
            p = stem.with_suffix(suf)
            if p.exists():
                raise FileExistsError(f"{p} exists; pass force to overwrite")
    stem.parent.mkdir(parents=True, exist_ok=True)
    return stem


def _write_json(path: Path, payload: dict):
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def read_json(path: Union[str, Path]) -> dict:
    with open(stem_of(path).with_suffix(".json")) as f:
        return json.load(f)


def _write_rows(path: Path, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(_HEADER)
        w.writerows(rows)


def _read_rows(path: Path):
    with open(path, newline="") as f:
        r = csv.reader(f)
        header = next(r)
        if header != _HEADER:
            raise ValueError(f"{path}: expected header {','.join(_HEADER)}, got {','.join(header)}")
        for t, k, value, kind in r:
            yield float(t), int(k), float(value), kind


def write_trace(trace: Trace, stem: Union[str, Path], force: bool = False) -> Path:
    """Write a Trace artifact; returns the stem used."""
    stem = _prepare(stem, (".json", ".csv"), force)
    _write_json(stem.with_suffix(".json"), {"artifact": "trace", **trace.meta})
    rows = []
    K = trace.nk.shape[1]
    for i, t in enumerate(trace.t):
        ts = _fmt(t)
        for k in range(1, K + 1):
            rows.append((ts, k, _fmt(trace.nk[i, k - 1]), "nk"))
        rows.append((ts, 0, _fmt(trace.tail[i]), "tail"))
        rows.append((ts, 0, _fmt(trace.l1[i]), "l1"))
        rows.append((ts, 0, _fmt(trace.chi[i]), "chi"))
        rows.append((ts, 0, _fmt(trace.chi_nolargest[i]), "chi_nolargest"))
    _write_rows(stem.with_suffix(".csv"), rows)
    return stem


def read_trace(stem: Union[str, Path]) -> Trace:
    """Read a Trace artifact back.

    Per-step drift records and the final census are not part of the file
    format and come back as None.
    """
    stem = stem_of(stem)
    meta = read_json(stem)
    if meta.pop("artifact", "trace") != "trace":
        raise ValueError(f"{stem}.json is not a trace artifact")
    per_t = {}
    order = []
    for t, k, value, kind in _read_rows(stem.with_suffix(".csv")):
        if kind not in TRACE_KINDS:
            raise ValueError(f"{stem}.csv: unknown trace kind {kind!r}")
        if t not in per_t:
            per_t[t] = {"nk": {}}
            order.append(t)
        if kind == "nk":
            per_t[t]["nk"][k] = value
        else:
            per_t[t][kind] = value
    K = max((max(d["nk"], default=0) for d in per_t.values()), default=0)
    S = len(order)
    nk = np.zeros((S, K))
    tail = np.zeros(S)
    l1 = np.zeros(S)
    chi = np.zeros(S)
    chinl = np.zeros(S)
    for i, t in enumerate(order):
        d = per_t[t]
        for k, v in d["nk"].items():
            nk[i, k - 1] = v
        tail[i] = d["tail"]
        l1[i] = d["l1"]
        chi[i] = d["chi"]
        chinl[i] = d["chi_nolargest"]
    return Trace(
        meta=meta,
        t=np.array(order),
        nk=nk,
        tail=tail,
        l1=l1,
        chi=chi,
        chi_nolargest=chinl,
        big_components=np.zeros(S, np.int64),
    )


def write_series(series: OdeSeries, stem: Union[str, Path], force: bool = False) -> Path:
    """Write an OdeSeries artifact; returns the stem used."""
    stem = _prepare(stem, (".json", ".csv"), force)
    _write_json(stem.with_suffix(".json"), {"artifact": "series", **series.meta})
    rows = []
    mass = series.mass
    gel = series.gel
    chi = series.chi
    for i, t in enumerate(series.t):
        ts = _fmt(t)
        for k in range(1, series.K + 1):
            rows.append((ts, k, _fmt(series.rho[i, k - 1]), "rhok"))
        rows.append((ts, 0, _fmt(mass[i]), "mass"))
        rows.append((ts, 0, _fmt(gel[i]), "gel"))
        rows.append((ts, 0, _fmt(chi[i]), "chi"))
    _write_rows(stem.with_suffix(".csv"), rows)
    return stem


def read_series(stem: Union[str, Path]) -> OdeSeries:
    stem = stem_of(stem)
    meta = read_json(stem)
    if meta.pop("artifact", "series") != "series":
        raise ValueError(f"{stem}.json is not a series artifact")
    per_t = {}
    order = []
    for t, k, value, kind in _read_rows(stem.with_suffix(".csv")):
        if kind not in SERIES_KINDS:
            raise ValueError(f"{stem}.csv: unknown series kind {kind!r}")
        if t not in per_t:
            per_t[t] = {}
            order.append(t)
        if kind == "rhok":
            per_t[t][k] = value
    K = max((max(d, default=0) for d in per_t.values()), default=0)
    rho = np.zeros((len(order), K))
    for i, t in enumerate(order):
        for k, v in per_t[t].items():
            rho[i, k - 1] = v
    return OdeSeries(t=np.array(order), rho=rho, meta=meta)


def write_report(report, stem: Union[str, Path], force: bool = False) -> Path:
    """Write an analysis report: JSON + aligned text, plus CSV for deviations."""
    payload = report.to_json_dict()
    suffixes = [".json", ".txt"]
    is_deviation = payload.get("kind") == "deviation_report"
    if is_deviation:
        suffixes.append(".csv")
    stem = _prepare(stem, suffixes, force)
    _write_json(stem.with_suffix(".json"), {"artifact": "report", **payload})
    with open(stem.with_suffix(".txt"), "w") as f:
        f.write(report.to_text() + "\n")
    if is_deviation:
        rows = []
        for i, t in enumerate(report.t_grid):
            ts = _fmt(t)
            for k in range(1, report.k_max + 1):
                rows.append((ts, k, _fmt(report.empirical[i, k - 1]), "empirical"))
                rows.append((ts, k, _fmt(report.ode[i, k - 1]), "ode"))
                rows.append((ts, k, _fmt(report.deviation[i, k - 1]), "deviation"))
            rows.append((ts, 0, _fmt(report.l1_empirical[i]), "l1_empirical"))
            rows.append((ts, 0, _fmt(report.l1_ode[i]), "l1_ode"))
        _write_rows(stem.with_suffix(".csv"), rows)
    return stem
