"""Seeded simulator for l-vertex processes on n vertices.

A run samples vertex tuples, applies the rule, maintains a disjoint-set
forest with an exact component-size census, and records snapshots at the
requested times (step m = floor(t * n)).  Catalogued rules run through the
numba kernels in ``achlio._kernels``; custom rules fall back to a
pure-Python loop that consumes the identical random stream, so traces are
bit-identical across both paths for the same (config, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .rules import RuleSpec, decide as rule_decide, Partition

__all__ = [
    "SplitMix64",
    "seed_state",
    "split_seed",
    "Census",
    "susceptibility",
    "ProcessConfig",
    "Trace",
    "DriftRecord",
    "StepRecord",
    "ProcessState",
    "run",
]

_MASK = (1 << 64) - 1
_GOLD = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def seed_state(seed: int, stream: int = 0) -> int:
    """Initial splitmix64 state for (seed, stream); streams are independent."""
    return _mix64(_mix64(seed & _MASK) ^ ((stream * _GOLD) & _MASK))


def split_seed(seed: int, index: int) -> int:
    """Derive the seed of the index-th member of a seed sweep."""
    return seed_state(seed, index)


class SplitMix64:
    """Pure-Python mirror of the kernel RNG (same outputs, same order)."""

    def __init__(self, state: int):
        self.state = state & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GOLD) & _MASK
        return _mix64(self.state)

    def below(self, n: int) -> int:
        return self.next_u64() % n

    def uniform(self) -> float:
        return self.next_u64() / 2.0**64


@dataclass
class Census:
    """Component-size census: size k -> number of components of size k."""

    count: dict
    n: int

    def __post_init__(self):
        total = sum(k * c for k, c in self.count.items())
        if total != self.n:
            raise ValueError(f"census mass {total} != n {self.n}")

    @property
    def largest(self) -> int:
        return max((k for k, c in self.count.items() if c > 0), default=0)

    def top_sizes(self, j: int) -> list:
        """Sizes of the j largest components, descending."""
        out = []
        for k in sorted((k for k, c in self.count.items() if c > 0), reverse=True):
            out.extend([k] * min(self.count[k], j - len(out)))
            if len(out) >= j:
                break
        return out

    @classmethod
    def from_array(cls, count: np.ndarray, n: int) -> "Census":
        nz = np.nonzero(count)[0]
        return cls({int(k): int(count[k]) for k in nz if k >= 1}, n)


def susceptibility(census: Census, exclude_largest: bool = False) -> float:
    """Average size of the component of a random vertex, sum k^2 count_k / n.

    With ``exclude_largest`` the single largest component is dropped from the
    sum; by convention the result is 0 when it holds every vertex.
    """
    total = sum(k * k * c for k, c in census.count.items())
    if exclude_largest:
        l1 = census.largest
        if l1 == census.n:
            return 0.0
        total -= l1 * l1
    return total / census.n


@dataclass
class ProcessConfig:
    n: int
    rule: RuleSpec
    t_max: float
    snapshot_times: Sequence[float]
    seed: int
    K_report: int = 100
    drift_k_set: Sequence[int] = ()
    eta: float = 0.01  # "large component" threshold for the one-giant count
    distinct_vertices: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.t_max < 0:
            raise ValueError("t_max must be >= 0")
        times = list(self.snapshot_times)
        if any(t < 0 or t > self.t_max for t in times):
            raise ValueError("snapshot times must lie in [0, t_max]")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("snapshot times must be strictly increasing")
        if self.K_report < 1:
            raise ValueError("K_report must be >= 1")
        if self.drift_k_set and any(k < 1 for k in self.drift_k_set):
            raise ValueError("drift sizes must be >= 1")


@dataclass
class DriftRecord:
    """Per-step martingale increments Y = realized change minus conditional mean."""

    ks: tuple
    Y: np.ndarray  # (steps, len(ks))
    ell: int
    n: int


@dataclass
class Trace:
    """Snapshots of one seeded run; immutable once produced."""

    meta: dict
    t: np.ndarray
    nk: np.ndarray  # (S, K_report) vertex-mass fractions N_k / n
    tail: np.ndarray  # 1 - sum of reported fractions
    l1: np.ndarray  # largest component / n
    chi: np.ndarray
    chi_nolargest: np.ndarray
    big_components: np.ndarray  # number of components >= eta * n
    drift: Optional[DriftRecord] = None
    final_census: Optional[Census] = None

    @property
    def n(self) -> int:
        return self.meta["n"]

    def nk_at(self, t: float, k: int) -> float:
        idx = int(np.argmin(np.abs(self.t - t)))
        if abs(self.t[idx] - t) > 1e-9:
            raise ValueError(f"t={t} not among the snapshots")
        return float(self.nk[idx, k - 1])


_RULE_CODES = {
    "always_first": _kernels.ER,
    "min_min": _kernels.DCDGM,
    "adjacent": _kernels.ADJACENT,
}


def _kernel_dispatch(rule: RuleSpec):
    """(rule_code, B, table_array) for the numba path, or None."""
    if rule.kernel is None:
        return None
    tag = rule.kernel[0]
    dummy = np.zeros(1, np.int8)
    if tag in _RULE_CODES:
        return _RULE_CODES[tag], 1, dummy
    if tag == "pair_score":
        code = _kernels.PRODUCT if rule.kernel[1] == "product" else _kernels.SUM
        return code, 1, dummy
    if tag == "bounded_table":
        B, table = rule.kernel[1], rule.kernel[2]
        nclass = B + 1
        flat = np.zeros(nclass**4, np.int8)
        for (a, b, c, d), choice in table.items():
            idx = ((a - 1) * nclass + (b - 1)) * nclass * nclass + (c - 1) * nclass + (d - 1)
            flat[idx] = choice
        return _kernels.BOUNDED, B, flat
    return None


@dataclass
class StepRecord:
    m: int
    vertices: tuple
    sizes: tuple  # component size per sampled index
    partition: Partition  # which sampled indices shared a component
    edges: frozenset  # the applied EdgeChoice's edges
    merges: list  # (a, b) size pairs actually merged


class ProcessState:
    """Explicit simulator state with a step-at-a-time interface.

    Mirrors the kernel exactly (RNG stream, union order, census updates);
    used for custom rules and for step-level inspection in tests.
    """

    def __init__(self, config: ProcessConfig, stream: int = 0):
        n = config.n
        self.config = config
        self.rule = config.rule
        self.n = n
        self.rng = SplitMix64(seed_state(config.seed, stream))
        self.parent = np.arange(n, dtype=np.int64)
        self.size = np.ones(n, dtype=np.int64)
        self.count = np.zeros(n + 1, dtype=np.int64)
        self.count[1] = n
        self.l1 = 1
        self.sum_k2 = n
        self.eta_thresh = max(1, math.ceil(config.eta * n))
        self.big = n if self.eta_thresh <= 1 else 0
        self.m = 0

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return int(x)

    def _draw(self):
        ell = self.rule.ell
        while True:
            vs = tuple(self.rng.below(self.n) for _ in range(ell))
            if not self.config.distinct_vertices or len(set(vs)) == ell:
                return vs

    def _merge_roots(self, ra: int, rb: int):
        if ra == rb:
            return None
        a, b = int(self.size[ra]), int(self.size[rb])
        if a < b:
            ra, rb, a, b = rb, ra, b, a
        self.parent[rb] = ra
        self.size[ra] = a + b
        self.count[a] -= 1
        self.count[b] -= 1
        self.count[a + b] += 1
        self.sum_k2 += 2 * a * b
        self.l1 = max(self.l1, a + b)
        th = self.eta_thresh
        self.big += (1 if a + b >= th else 0) - (1 if a >= th else 0) - (1 if b >= th else 0)
        return (a, b)

    def step(self) -> StepRecord:
        vs = self._draw()
        roots = [self.find(v) for v in vs]
        sizes = tuple(int(self.size[r]) for r in roots)
        block_ids = {}
        block_of = []
        for r in roots:
            block_of.append(block_ids.setdefault(r, len(block_ids)))
        partition = Partition(tuple(block_of))
        choices = rule_decide(self.rule, sizes, partition)
        if len(choices) == 1:
            choice = choices[0]
        else:
            u = self.rng.uniform()
            acc = 0.0
            choice = choices[-1]
            for ch in choices:
                acc += ch.weight
                if u < acc:
                    choice = ch
                    break
        merges = []
        for edge in sorted(tuple(sorted(e)) for e in choice.edges):
            i, j = edge
            merged = self._merge_roots(self.find(vs[i]), self.find(vs[j]))
            if merged is not None:
                merges.append(merged)
        self.m += 1
        return StepRecord(self.m, vs, sizes, partition, choice.edges, merges)

    def census(self) -> Census:
        return Census.from_array(self.count, self.n)

    def snapshot_row(self, K_report: int):
        n = self.n
        kmax = min(K_report, n)
        nk = np.zeros(K_report)
        ks = np.arange(1, kmax + 1)
        nk[:kmax] = self.count[1 : kmax + 1] * ks / n
        tail = 1.0 - nk.sum()
        chinl = 0.0 if self.l1 == n else (self.sum_k2 - self.l1 * self.l1) / n
        return nk, tail, self.l1 / n, self.sum_k2 / n, chinl, self.big


def _snap_steps(config: ProcessConfig) -> np.ndarray:
    return np.array([math.floor(t * config.n) for t in config.snapshot_times], dtype=np.int64)


def _meta(config: ProcessConfig) -> dict:
    from . import __version__

    return {
        "n": config.n,
        "rule": config.rule.name,
        "ell": config.rule.ell,
        "seed": config.seed,
        "t_max": config.t_max,
        "snapshot_times": [float(t) for t in config.snapshot_times],
        "K_report": config.K_report,
        "eta": config.eta,
        "distinct_vertices": config.distinct_vertices,
        "rng": "splitmix64",
        "version": __version__,
    }


def run(config: ProcessConfig) -> Trace:
    """Simulate one run and return its Trace.

    Identical (config, seed) pairs produce bit-identical traces regardless of
    whether the numba or the pure-Python path executes the run.
    """
    steps_total = math.floor(config.t_max * config.n)
    snap_steps = _snap_steps(config)
    state0 = seed_state(config.seed, 0)
    eta_thresh = max(1, math.ceil(config.eta * config.n))
    dispatch = _kernel_dispatch(config.rule)
    if dispatch is not None:
        code, B, table = dispatch
        nk, tail, l1, chi, chinl, bigc, count = _kernels.run_builtin(
            config.n, code, B, table, steps_total, snap_steps, config.K_report,
            eta_thresh, np.uint64(state0), config.distinct_vertices,
        )
        census = Census.from_array(count, config.n)
    else:
        state = ProcessState(config)
        S = len(snap_steps)
        nk = np.zeros((S, config.K_report))
        tail = np.zeros(S)
        l1 = np.zeros(S)
        chi = np.zeros(S)
        chinl = np.zeros(S)
        bigc = np.zeros(S, np.int64)
        si = 0
        for m in range(steps_total + 1):
            while si < S and snap_steps[si] == m:
                nk[si], tail[si], l1[si], chi[si], chinl[si], bigc[si] = state.snapshot_row(
                    config.K_report
                )
                si += 1
            if m == steps_total:
                break
            state.step()
        census = state.census()
    drift = None
    if config.drift_k_set:
        if config.rule.kernel != ("always_first",):
            raise ValueError(
                "per-step conditional drift recording is only implemented for the "
                "2-vertex always-first-pair rule (erdos_renyi), where the exact "
                "pre-draw expectation has a closed form"
            )
        ks = np.array(sorted(config.drift_k_set), dtype=np.int64)
        Y, _ = _kernels.run_er_drift(config.n, steps_total, np.uint64(state0), ks)
        drift = DriftRecord(ks=tuple(int(k) for k in ks), Y=Y, ell=config.rule.ell, n=config.n)
    return Trace(
        meta=_meta(config),
        t=np.array([float(t) for t in config.snapshot_times]),
        nk=nk,
        tail=tail,
        l1=l1,
        chi=chi,
        chi_nolargest=chinl,
        big_components=bigc,
        drift=drift,
        final_census=census,
    )
