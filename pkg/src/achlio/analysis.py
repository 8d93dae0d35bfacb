"""Cross-validation of simulation against kinetics, gelation bracketing, and
concentration diagnostics.

All operations are pure functions over immutable ``Trace`` / ``OdeSeries``
inputs; aggregation across seeds is deterministic (fixed iteration order).
Each report type serializes to a JSON-ready dict (``to_json_dict``) and an
aligned-column text table (``to_text``).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .kinetics import KineticsConfig, OdeSeries, integrate, make_rhs
from .process import Census, ProcessConfig, Trace, run, split_seed
from .rules import RuleSpec

__all__ = [
    "DeviationReport",
    "GelationWindow",
    "CrossingEstimate",
    "MartingaleDiagnostic",
    "OneStepReport",
    "compare",
    "gelation_window",
    "empirical_gelation",
    "martingale_diagnostic",
    "onestep_consistency",
]


def _grid_index(times: np.ndarray, t: float, what: str) -> int:
    idx = int(np.argmin(np.abs(times - t)))
    if abs(times[idx] - t) > 1e-9:
        raise KeyError(t)
    return idx


# ---------------------------------------------------------------------------
# compare: simulation vs integrated kinetics
# ---------------------------------------------------------------------------


@dataclass
class DeviationReport:
    """Pointwise |empirical N_k/n - rho_k(t)| over a (t, k) grid."""

    t_grid: np.ndarray  # (T,)
    k_max: int
    empirical: np.ndarray  # (T, k_max) seed-averaged N_k / n
    ode: np.ndarray  # (T, k_max) rho_k(t)
    deviation: np.ndarray  # (T, k_max) absolute deviations
    l1_empirical: np.ndarray  # (T,) seed-averaged largest component / n
    l1_ode: np.ndarray  # (T,) ODE gel mass 1 - M(t)
    l1_deviation: np.ndarray  # (T,)
    n_traces: int
    meta: dict = field(default_factory=dict)

    @property
    def sup_deviation(self) -> float:
        return float(self.deviation.max())

    @property
    def sup_l1_deviation(self) -> float:
        return float(self.l1_deviation.max())

    def to_json_dict(self) -> dict:
        return {
            "kind": "deviation_report",
            "t_grid": [float(t) for t in self.t_grid],
            "k_max": self.k_max,
            "empirical": self.empirical.tolist(),
            "ode": self.ode.tolist(),
            "deviation": self.deviation.tolist(),
            "l1_empirical": self.l1_empirical.tolist(),
            "l1_ode": self.l1_ode.tolist(),
            "l1_deviation": self.l1_deviation.tolist(),
            "sup_deviation": self.sup_deviation,
            "sup_l1_deviation": self.sup_l1_deviation,
            "n_traces": self.n_traces,
            "meta": self.meta,
        }

    def to_text(self) -> str:
        lines = [
            f"deviation report: {self.n_traces} trace(s), k <= {self.k_max}",
            f"sup |N_k/n - rho_k|   : {self.sup_deviation:.6g}",
            f"sup |L1/n - (1-M(t))| : {self.sup_l1_deviation:.6g}",
            "",
            f"{'t':>8} {'k':>4} {'empirical':>14} {'ode':>14} {'deviation':>12}",
        ]
        for i, t in enumerate(self.t_grid):
            for k in range(1, self.k_max + 1):
                lines.append(
                    f"{t:8.4f} {k:4d} {self.empirical[i, k - 1]:14.8f} "
                    f"{self.ode[i, k - 1]:14.8f} {self.deviation[i, k - 1]:12.3e}"
                )
        return "\n".join(lines)


def compare(
    traces: Union[Trace, Sequence[Trace]],
    series: OdeSeries,
    k_max: int,
    t_grid: Sequence[float],
) -> DeviationReport:
    """Deviation of (seed-averaged) simulation fractions from the ODE solution.

    ``traces`` may be a single Trace or a sequence over seeds; the empirical
    side is their mean.  Every t in ``t_grid`` must be a snapshot time of each
    trace and a grid point of the series, and k_max must not exceed either
    truncation order.
    """
    trace_list = [traces] if isinstance(traces, Trace) else list(traces)
    if not trace_list:
        raise ValueError("need at least one trace")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    K_rep = trace_list[0].nk.shape[1]
    if any(tr.nk.shape[1] != K_rep for tr in trace_list):
        raise ValueError("traces report different K_report values")
    if k_max > K_rep or k_max > series.K:
        raise ValueError(
            f"k_max={k_max} exceeds a truncation order (trace K_report={K_rep}, series K={series.K})"
        )
    t_grid = np.asarray([float(t) for t in t_grid])
    missing = []
    for t in t_grid:
        for tr in trace_list:
            try:
                _grid_index(tr.t, t, "trace")
            except KeyError:
                missing.append(("trace", float(t)))
                break
        try:
            _grid_index(series.t, t, "series")
        except KeyError:
            missing.append(("series", float(t)))
    if missing:
        raise ValueError(f"t_grid points missing from inputs: {missing}")

    T = len(t_grid)
    emp = np.zeros((T, k_max))
    ode = np.zeros((T, k_max))
    l1_emp = np.zeros(T)
    l1_ode = np.zeros(T)
    gel = series.gel
    for i, t in enumerate(t_grid):
        rows = [tr.nk[_grid_index(tr.t, t, "trace")][:k_max] for tr in trace_list]
        emp[i] = np.mean(rows, axis=0)
        l1_emp[i] = np.mean([tr.l1[_grid_index(tr.t, t, "trace")] for tr in trace_list])
        si = _grid_index(series.t, t, "series")
        ode[i] = series.rho[si, :k_max]
        l1_ode[i] = gel[si]
    meta = {"traces": [tr.meta for tr in trace_list], "series": series.meta}
    return DeviationReport(
        t_grid=t_grid,
        k_max=k_max,
        empirical=emp,
        ode=ode,
        deviation=np.abs(emp - ode),
        l1_empirical=l1_emp,
        l1_ode=l1_ode,
        l1_deviation=np.abs(l1_emp - l1_ode),
        n_traces=len(trace_list),
        meta=meta,
    )


# ---------------------------------------------------------------------------
# gelation_window: ODE-side bracketing of the phase transition
# ---------------------------------------------------------------------------


@dataclass
class GelationWindow:
    """Bracket [t_lower, t_upper] for the onset of the giant component.

    t_lower: largest probed time at which the with_gel solution still holds
    essentially full mass (and little mass is parked near the truncation
    order, so the statement is not a truncation artifact).  t_upper: smallest
    probed time by which the gel-free solution has shed more than delta_gel
    mass, i.e. the sol-only system is already inconsistent.  A missing side
    (threshold never reached on the probed interval) is reported as None with
    ``one_sided`` set.
    """

    rule: str
    K: int
    delta_mass: float
    delta_gel: float
    t_probe: float
    grid_step: float
    t_lower: Optional[float]
    t_upper: Optional[float]
    sensitivity: dict = field(default_factory=dict)  # same scan at K // 2
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.t_lower is not None and self.t_upper is not None:
            if self.t_lower > self.t_upper + 1e-12:
                raise ValueError(
                    f"inconsistent window: t_lower={self.t_lower} > t_upper={self.t_upper}"
                )

    @property
    def one_sided(self) -> bool:
        return self.t_lower is None or self.t_upper is None

    @property
    def midpoint(self) -> Optional[float]:
        if self.one_sided:
            return None
        return 0.5 * (self.t_lower + self.t_upper)

    def to_json_dict(self) -> dict:
        return {
            "kind": "gelation_window",
            "rule": self.rule,
            "K": self.K,
            "delta_mass": self.delta_mass,
            "delta_gel": self.delta_gel,
            "t_probe": self.t_probe,
            "grid_step": self.grid_step,
            "t_lower": self.t_lower,
            "t_upper": self.t_upper,
            "one_sided": self.one_sided,
            "sensitivity": self.sensitivity,
            "meta": self.meta,
        }

    def to_text(self) -> str:
        fmt = lambda v: "none" if v is None else f"{v:.4f}"
        lines = [
            f"gelation window for rule {self.rule!r} (K={self.K})",
            f"{'t_lower':>10} {'t_upper':>10} {'one_sided':>10}",
            f"{fmt(self.t_lower):>10} {fmt(self.t_upper):>10} {str(self.one_sided):>10}",
        ]
        if self.sensitivity:
            s = self.sensitivity
            lines.append(
                f"at K={s['K']}: t_lower={fmt(s['t_lower'])} t_upper={fmt(s['t_upper'])}"
            )
        return "\n".join(lines)


def _window_scan(rule: RuleSpec, K: int, grid: np.ndarray, delta_mass: float,
                 delta_gel: float, **kin_kwargs):
    with_gel = integrate(KineticsConfig(rule=rule, K=K, t_end=float(grid[-1]),
                                        gel_mode="with_gel", grid=grid, **kin_kwargs))
    no_gel = integrate(KineticsConfig(rule=rule, K=K, t_end=float(grid[-1]),
                                      gel_mode="no_gel", grid=grid, **kin_kwargs))
    mass_ok = (with_gel.mass >= 1.0 - delta_mass) & (with_gel.leakage() < delta_mass / 2.0)
    lower_idx = np.nonzero(mass_ok)[0]
    t_lower = float(grid[lower_idx[-1]]) if len(lower_idx) else None
    defect = 1.0 - no_gel.mass
    upper_idx = np.nonzero(defect > delta_gel)[0]
    t_upper = float(grid[upper_idx[0]]) if len(upper_idx) else None
    return t_lower, t_upper, with_gel, no_gel


def gelation_window(
    rule: RuleSpec,
    K: int,
    delta_mass: float = 1e-2,
    delta_gel: float = 1e-2,
    t_probe: float = 1.0,
    grid_step: float = 0.01,
    sensitivity: bool = True,
    **kin_kwargs,
) -> GelationWindow:
    """Bracket the gelation time by integrating both gel modes on a time grid.

    Thresholds default to 1e-2, calibrated on the always-first-pair rule where
    the transition point is known.  When ``sensitivity`` is set the scan is
    repeated at K // 2 and reported alongside, as a truncation-dependence
    check.  Extra keyword arguments are forwarded to :class:`KineticsConfig`.
    """
    if not 0 < delta_mass < 1 or not 0 < delta_gel < 1:
        raise ValueError("thresholds must lie in (0, 1)")
    n_pts = int(round(t_probe / grid_step)) + 1
    grid = np.linspace(0.0, t_probe, n_pts)
    t_lower, t_upper, wg, ng = _window_scan(rule, K, grid, delta_mass, delta_gel,
                                            **kin_kwargs)
    sens = {}
    if sensitivity and K >= 4:
        sl, su, _, _ = _window_scan(rule, K // 2, grid, delta_mass, delta_gel,
                                    **kin_kwargs)
        sens = {"K": K // 2, "t_lower": sl, "t_upper": su}
    meta = {"with_gel": wg.meta, "no_gel": ng.meta}
    return GelationWindow(
        rule=rule.name, K=K, delta_mass=delta_mass, delta_gel=delta_gel,
        t_probe=t_probe, grid_step=grid_step, t_lower=t_lower, t_upper=t_upper,
        sensitivity=sens, meta=meta,
    )


# ---------------------------------------------------------------------------
# empirical_gelation: crossing of L1/n across an n-ladder
# ---------------------------------------------------------------------------


@dataclass
class CrossingEstimate:
    """First snapshot time with median L1/n >= eps, per ladder size."""

    n_ladder: tuple
    eps: float
    t_grid: np.ndarray
    seeds: int
    crossings: list  # per n: float, or None when L1/n never reaches eps
    medians: np.ndarray  # (len(n_ladder), len(t_grid))

    @property
    def t_max(self) -> float:
        return float(self.t_grid[-1])

    @property
    def spread(self) -> Optional[float]:
        vals = [c for c in self.crossings if c is not None]
        if len(vals) < 2:
            return None
        return float(max(vals) - min(vals))

    def to_json_dict(self) -> dict:
        return {
            "kind": "crossing_estimate",
            "n_ladder": list(self.n_ladder),
            "eps": self.eps,
            "t_grid": [float(t) for t in self.t_grid],
            "seeds": self.seeds,
            "crossings": [
                c if c is not None else f"> {self.t_max:g}" for c in self.crossings
            ],
            "medians": self.medians.tolist(),
            "spread": self.spread,
        }

    def to_text(self) -> str:
        lines = [
            f"empirical gelation crossings (eps={self.eps:g}, {self.seeds} seeds)",
            f"{'n':>10} {'crossing':>12}",
        ]
        for n, c in zip(self.n_ladder, self.crossings):
            cs = f"> {self.t_max:g}" if c is None else f"{c:.4f}"
            lines.append(f"{n:>10} {cs:>12}")
        if self.spread is not None:
            lines.append(f"spread: {self.spread:.4f}")
        return "\n".join(lines)


def empirical_gelation(
    rule: RuleSpec,
    n_ladder: Sequence[int],
    eps: float,
    seeds: int,
    t_grid: Optional[Sequence[float]] = None,
    base_seed: int = 0,
) -> CrossingEstimate:
    """Estimate the transition point from simulation runs at increasing n.

    For each ladder size, ``seeds`` independent runs record L1/n on the
    snapshot grid; the crossing is the first time with *median* L1/n >= eps
    (median, not mean: near-critical fluctuations are heavy-tailed).  A level
    never reached is reported as None, printed as "> t_max".
    """
    ns = tuple(int(n) for n in n_ladder)
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n_ladder must be strictly increasing")
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    if seeds < 1:
        raise ValueError("need at least one seed")
    if t_grid is None:
        t_grid = np.round(np.linspace(0.02, 1.5, 75), 10)
    t_grid = np.asarray([float(t) for t in t_grid])
    medians = np.zeros((len(ns), len(t_grid)))
    crossings = []
    run_index = 0
    for i, n in enumerate(ns):
        l1 = np.zeros((seeds, len(t_grid)))
        for s in range(seeds):
            cfg = ProcessConfig(
                n=n, rule=rule, t_max=float(t_grid[-1]),
                snapshot_times=list(t_grid), seed=split_seed(base_seed, run_index),
            )
            l1[s] = run(cfg).l1
            run_index += 1
        medians[i] = np.median(l1, axis=0)
        hit = np.nonzero(medians[i] >= eps)[0]
        crossings.append(float(t_grid[hit[0]]) if len(hit) else None)
    return CrossingEstimate(
        n_ladder=ns, eps=eps, t_grid=t_grid, seeds=seeds,
        crossings=crossings, medians=medians,
    )


# ---------------------------------------------------------------------------
# martingale_diagnostic: concentration of the compensated increments
# ---------------------------------------------------------------------------


@dataclass
class MartingaleDiagnostic:
    """Sliding-window concentration check of Z = cumulative compensated drift.

    For each run and tracked k, the maximum of |Z_{m2} - Z_{m1}| over window
    pairs with m2 - m1 <= n^{1 + lam} is compared against the bound
    n^{1/2 + 2 lam}; a run passes when every tracked k stays below the bound.
    """

    lam: float
    ks: tuple
    n: int
    window: int
    bound: float
    max_dev: np.ndarray  # (runs, len(ks))
    max_increment: np.ndarray  # (runs, len(ks)) max |Y|
    increment_bound: np.ndarray  # (len(ks),) = 2 * ell * k
    passes: np.ndarray  # (runs,) bool
    meta: dict = field(default_factory=dict)

    @property
    def pass_fraction(self) -> float:
        return float(np.mean(self.passes))

    @property
    def increments_ok(self) -> bool:
        return bool(np.all(self.max_increment <= self.increment_bound + 1e-12))

    def to_json_dict(self) -> dict:
        return {
            "kind": "martingale_diagnostic",
            "lam": self.lam,
            "ks": list(self.ks),
            "n": self.n,
            "window": self.window,
            "bound": self.bound,
            "max_dev": self.max_dev.tolist(),
            "max_increment": self.max_increment.tolist(),
            "increment_bound": self.increment_bound.tolist(),
            "passes": [bool(p) for p in self.passes],
            "pass_fraction": self.pass_fraction,
            "increments_ok": self.increments_ok,
            "meta": self.meta,
        }

    def to_text(self) -> str:
        lines = [
            f"martingale diagnostic: lam={self.lam:g}, n={self.n}, "
            f"window<={self.window}, bound={self.bound:.4g}",
            f"pass fraction: {self.pass_fraction:.3f} "
            f"({int(self.passes.sum())}/{len(self.passes)} runs)",
            f"increment bound |Y| <= 2*ell*k respected: {self.increments_ok}",
            f"{'k':>6} {'max |dZ| (worst run)':>22} {'bound':>12}",
        ]
        for i, k in enumerate(self.ks):
            lines.append(
                f"{k:>6} {self.max_dev[:, i].max():>22.4f} {self.bound:>12.4f}"
            )
        return "\n".join(lines)


def _window_extreme(Z: np.ndarray, W: int) -> float:
    """max |Z[j] - Z[i]| over 0 <= j - i <= W, via monotone deques."""
    if W >= len(Z) - 1:
        return float(Z.max() - Z.min())
    best = 0.0
    hi, lo = deque(), deque()
    for j in range(len(Z)):
        first = j - W
        while hi and hi[0] < first:
            hi.popleft()
        while lo and lo[0] < first:
            lo.popleft()
        while hi and Z[hi[-1]] <= Z[j]:
            hi.pop()
        hi.append(j)
        while lo and Z[lo[-1]] >= Z[j]:
            lo.pop()
        lo.append(j)
        best = max(best, Z[j] - Z[lo[0]], Z[hi[0]] - Z[j])
    return best


def martingale_diagnostic(
    traces: Union[Trace, Sequence[Trace]],
    k_set: Optional[Sequence[int]] = None,
    lam: float = 0.125,
) -> MartingaleDiagnostic:
    """Measure concentration of the compensated increment sums.

    Each trace must carry drift records (``drift_k_set`` in the process
    config).  Z is the cumulative sum of Y = realized change minus the exact
    conditional expectation; windows of length up to n^{1+lam} are scanned
    for the largest |Z_{m2} - Z_{m1}| and checked against n^{1/2 + 2 lam}.
    """
    if not 0 < lam < 0.25:
        raise ValueError("lam must lie in (0, 1/4)")
    trace_list = [traces] if isinstance(traces, Trace) else list(traces)
    if not trace_list:
        raise ValueError("need at least one trace")
    for tr in trace_list:
        if tr.drift is None:
            raise ValueError(
                "trace carries no drift records; rerun with drift_k_set set"
            )
    d0 = trace_list[0].drift
    n = d0.n
    if any(tr.drift.n != n or tr.drift.ks != d0.ks for tr in trace_list):
        raise ValueError("traces must share n and the tracked k set")
    ks = tuple(d0.ks) if k_set is None else tuple(sorted(set(int(k) for k in k_set)))
    cols = []
    for k in ks:
        if k not in d0.ks:
            raise ValueError(f"k={k} was not tracked in the drift records")
        cols.append(d0.ks.index(k))
    window = int(math.floor(n ** (1.0 + lam)))
    bound = n ** (0.5 + 2.0 * lam)
    R = len(trace_list)
    max_dev = np.zeros((R, len(ks)))
    max_inc = np.zeros((R, len(ks)))
    for r, tr in enumerate(trace_list):
        Y = tr.drift.Y
        for i, c in enumerate(cols):
            Z = np.concatenate([[0.0], np.cumsum(Y[:, c])])
            max_dev[r, i] = _window_extreme(Z, window)
            max_inc[r, i] = float(np.abs(Y[:, c]).max()) if len(Y) else 0.0
    inc_bound = np.array([2.0 * d0.ell * k for k in ks])
    passes = np.all(max_dev < bound, axis=1)
    return MartingaleDiagnostic(
        lam=lam, ks=ks, n=n, window=window, bound=float(bound),
        max_dev=max_dev, max_increment=max_inc, increment_bound=inc_bound,
        passes=passes, meta={"traces": [tr.meta for tr in trace_list]},
    )


# ---------------------------------------------------------------------------
# onestep_consistency: census drift vs the RHS on empirical fractions
# ---------------------------------------------------------------------------


@dataclass
class OneStepReport:
    """Residual between the census-exact one-step drift and the RHS value."""

    rule: str
    k: int
    gamma: float
    S: int
    drift: float  # expectation under the census distribution with true giant mass
    f_k: float  # RHS on the empirical fractions (residual mass as giant)
    error_budget: float  # 2*ell*k * (ell^2 * S / n + 2 * ell * gamma)
    n_big_components: int
    big_mass: float  # fraction of vertices in components >= gamma * n
    dropped_mass: float  # fraction in components of size in (S, gamma * n)

    @property
    def residual(self) -> float:
        return abs(self.drift - self.f_k)

    def to_json_dict(self) -> dict:
        return {
            "kind": "onestep_report",
            "rule": self.rule,
            "k": self.k,
            "gamma": self.gamma,
            "S": self.S,
            "drift": self.drift,
            "f_k": self.f_k,
            "residual": self.residual,
            "error_budget": self.error_budget,
            "n_big_components": self.n_big_components,
            "big_mass": self.big_mass,
            "dropped_mass": self.dropped_mass,
        }

    def to_text(self) -> str:
        return "\n".join([
            f"one-step consistency for rule {self.rule!r}, k={self.k} "
            f"(gamma={self.gamma:g}, S={self.S})",
            f"{'drift':>16} {'f_k':>16} {'residual':>12} {'budget':>12}",
            f"{self.drift:>16.8f} {self.f_k:>16.8f} "
            f"{self.residual:>12.3e} {self.error_budget:>12.3e}",
        ])


def onestep_consistency(
    census: Census,
    rule: RuleSpec,
    k: int,
    gamma: float = 0.01,
    S: int = 100,
) -> OneStepReport:
    """Compare the census-driven expected change of N_k with the RHS value.

    The drift side draws component sizes iid from the census: finite sizes
    below min(S + 1, gamma * n) keep their empirical weight, all components
    of size >= gamma * n contribute their combined mass as the giant, and
    mass strictly between is dropped (it is covered by the reported error
    budget).  The RHS side evaluates the same kernel on the same finite
    weights with the *residual* mass as the giant, i.e. the value the
    truncated ODE would use.  More than ell - 1 components of size
    >= gamma * n puts the census outside the regime the comparison is built
    for, and is refused.
    """
    if not rule.is_merging:
        raise ValueError("onestep_consistency requires a merging rule")
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    if S < k:
        raise ValueError("S must be >= k so the target size is representable")
    n = census.n
    giant_cut = gamma * n
    n_big = sum(c for s, c in census.count.items() if s >= giant_cut)
    if n_big > rule.ell - 1:
        raise ValueError(
            f"{n_big} components of size >= gamma*n = {giant_cut:g}; at most "
            f"ell-1 = {rule.ell - 1} are allowed for the giant identification"
        )
    big_mass = sum(s * c for s, c in census.count.items() if s >= giant_cut) / n
    w = np.zeros(S)
    dropped = 0.0
    for s, c in census.count.items():
        if s >= giant_cut:
            continue
        if s <= S:
            w[s - 1] = s * c / n
        else:
            dropped += s * c / n
    kernel = make_rhs(rule, S, gel_mode="with_gel")
    drift = float(kernel.expected_change(w, big_mass)[k - 1])
    f_k = float(kernel(w)[k - 1])
    budget = 2.0 * rule.ell * k * (rule.ell**2 * S / n + 2.0 * rule.ell * gamma)
    return OneStepReport(
        rule=rule.name, k=k, gamma=gamma, S=S, drift=drift, f_k=f_k,
        error_budget=budget, n_big_components=int(n_big),
        big_mass=float(big_mass), dropped_mass=float(dropped),
    )
