"""Truncated coagulation ODE systems associated with l-vertex rules.

The state is the vector of vertex-mass fractions (rho_1, ..., rho_K); the
mass not accounted for below the truncation order, 1 - sum(rho), plays the
role of the gel (giant component).  Three right-hand-side evaluators are
provided:

* ``rhs_er_closed`` -- the classical coagulation convolution for the
  always-first-pair (Erdos--Renyi) rule, O(K^2);
* ``GenericKernel`` -- exact enumeration over size tuples driven by the
  rule's decision function; exponential in ``ell``, used as an oracle and
  for custom rules at small K;
* ``PairKernel`` -- closed forms for all catalogued rules, exploiting that
  each of them joins exactly one pair per step, O(K^2) per evaluation.

``gel_mode`` selects whether tuples containing the giant contribute
("with_gel") or are zeroed out ("no_gel", the sol-only system).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .rules import GIANT, Partition, RuleSpec, is_giant

__all__ = [
    "KineticsConfig",
    "OdeSeries",
    "IntegrationError",
    "EnumerationBudgetError",
    "initial_state",
    "rhs_er_closed",
    "er_analytic",
    "er_analytic_state",
    "er_analytic_derivative",
    "ode_susceptibility",
    "GenericKernel",
    "PairKernel",
    "make_rhs",
    "integrate",
]

GEL_MODES = ("with_gel", "no_gel")

#: largest number of ordered size tuples GenericKernel will enumerate
GENERIC_TUPLE_BUDGET = 2_000_000


class IntegrationError(RuntimeError):
    """Step-size underflow; carries the last time reached."""

    def __init__(self, message, t_last):
        super().__init__(message)
        self.t_last = t_last


class EnumerationBudgetError(ValueError):
    """K too large for the ell-fold tuple enumeration."""


def initial_state(K: int) -> np.ndarray:
    """All vertices isolated: rho_1 = 1, the rest 0."""
    rho = np.zeros(K)
    rho[0] = 1.0
    return rho


def ode_susceptibility(rho: np.ndarray) -> float:
    """Average size of the component of a random vertex, sum k * rho_k."""
    K = len(rho)
    return float(np.arange(1, K + 1) @ rho)


def gel_mass(rho: np.ndarray) -> float:
    return float(max(0.0, 1.0 - rho.sum()))


def rhs_er_closed(rho: np.ndarray) -> np.ndarray:
    """Coagulation convolution for the always-first-pair rule.

    rho_k' = -2 k rho_k + k * sum_{a+b=k} rho_a rho_b
    """
    K = len(rho)
    k = np.arange(1, K + 1)
    birth = np.zeros(K)
    conv = np.convolve(rho, rho)  # conv[i] = sum_{a+b=i+2} rho_a rho_b
    birth[1:] = conv[: K - 1]
    return -2.0 * k * rho + k * birth


def er_analytic(k: int, t: float) -> float:
    """Pre-gelation solution of the closed system: k^{k-1} (2t)^{k-1} e^{-2kt} / k!.

    Evaluated in log space; valid for t <= 1/2.
    """
    if t < 0 or k < 1:
        raise ValueError("need t >= 0 and k >= 1")
    if t == 0.0:
        return 1.0 if k == 1 else 0.0
    logv = (k - 1) * (math.log(k) + math.log(2.0 * t)) - 2.0 * k * t - math.lgamma(k + 1)
    return math.exp(logv)


def er_analytic_state(K: int, t: float) -> np.ndarray:
    return np.array([er_analytic(k, t) for k in range(1, K + 1)])


def er_analytic_derivative(k: int, t: float) -> float:
    """Closed-form d/dt of ``er_analytic`` (t > 0)."""
    if t <= 0:
        raise ValueError("derivative only evaluated for t > 0")
    return er_analytic(k, t) * ((k - 1) / t - 2.0 * k)


# ---------------------------------------------------------------------------
# Generic kernel: exact tuple enumeration (oracle path)
# ---------------------------------------------------------------------------


def _delta_entries(sizes, partition, edges):
    """Sparse (k, coeff) contributions of one applied choice."""
    from .rules import merge_groups

    bsizes = partition.block_sizes(sizes)
    out = []
    for group in merge_groups(partition, edges):
        total = sum(bsizes[b] for b in group)
        if not is_giant(total):
            out.append((int(total), int(total)))
        for b in group:
            if not is_giant(bsizes[b]):
                out.append((int(bsizes[b]), -int(bsizes[b])))
    return out


class GenericKernel:
    """Exact truncated RHS by enumeration of all ordered size tuples.

    The decision structure is precomputed once per (rule, K, gel_mode); each
    evaluation is then a dense mat-vec over tuple probabilities.  The weight
    of a tuple is the product of rho_{c_j}, with the giant's weight being the
    residual mass 1 - sum(rho) in ``with_gel`` mode and 0 in ``no_gel`` mode.
    """

    def __init__(self, rule: RuleSpec, K: int, gel_mode: str = "with_gel"):
        if gel_mode not in GEL_MODES:
            raise ValueError(f"gel_mode must be one of {GEL_MODES}")
        values = list(range(1, K + 1))
        if gel_mode == "with_gel":
            values.append(GIANT)
        n_ordered = len(values) ** rule.ell
        if n_ordered > GENERIC_TUPLE_BUDGET:
            raise EnumerationBudgetError(
                f"{n_ordered} ordered tuples for ell={rule.ell}, K={K} exceeds the "
                f"enumeration budget ({GENERIC_TUPLE_BUDGET}); use the specialized "
                "kernel (PairKernel) for catalogued rules or reduce K"
            )
        self.rule = rule
        self.K = K
        self.gel_mode = gel_mode
        multisets = list(itertools.combinations_with_replacement(values, rule.ell))
        # contrib[k-1, t] = sum over distinct orderings of the tuple of the
        # expected change of N_k under the rule's choice distribution
        contrib = np.zeros((K, len(multisets)))
        value_index = np.zeros((len(multisets), rule.ell), dtype=np.int64)
        vindex = {v: i for i, v in enumerate(values)}
        from .rules import decide

        for ti, ms in enumerate(multisets):
            for j, v in enumerate(ms):
                value_index[ti, j] = vindex[v]
            for perm in set(itertools.permutations(ms)):
                partition = Partition.limit_convention(perm)
                for choice in decide(rule, perm, partition):
                    for k, coeff in _delta_entries(perm, partition, choice.edges):
                        if k <= K:
                            contrib[k - 1, ti] += choice.weight * coeff
        self._contrib = contrib
        self._value_index = value_index
        self._has_giant = gel_mode == "with_gel"

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        w_inf = gel_mass(np.asarray(rho)) if self._has_giant else 0.0
        return self.expected_change(rho, w_inf)

    def expected_change(self, w: np.ndarray, w_inf: float) -> np.ndarray:
        """RHS with an explicit giant weight instead of the residual mass."""
        if len(w) != self.K:
            raise ValueError(f"state has K={len(w)}, kernel built for K={self.K}")
        if w_inf != 0.0 and not self._has_giant:
            raise ValueError("kernel built in no_gel mode cannot take giant mass")
        wfull = np.append(w, w_inf) if self._has_giant else np.asarray(w)
        probs = wfull[self._value_index].prod(axis=1)
        return self._contrib @ probs


# ---------------------------------------------------------------------------
# Fast pair-marginal kernels for the catalogued rules
# ---------------------------------------------------------------------------


class PairKernel:
    """Closed-form RHS for rules that join exactly one pair per step.

    For such rules the RHS only depends on the distribution of the merged
    pair of component sizes (A, B) over {1..K, giant}^2:

        rho_k' = k * [ P(A + B = k) - P(A = k) - P(B = k) ]

    where pairs with both members in the giant merge nothing and pairs with
    one giant member only contribute the death terms.
    """

    def __init__(self, rule: RuleSpec, K: int, gel_mode: str = "with_gel"):
        if gel_mode not in GEL_MODES:
            raise ValueError(f"gel_mode must be one of {GEL_MODES}")
        if rule.kernel is None:
            raise ValueError(f"rule {rule.name!r} has no specialized kernel; use GenericKernel")
        self.rule = rule
        self.K = K
        self.gel_mode = gel_mode
        self._kvec = np.arange(1, K + 1, dtype=float)
        tag = rule.kernel[0]
        if tag == "pair_score":
            a = np.arange(1, K + 1, dtype=float)
            q = np.multiply.outer(a, a) if rule.kernel[1] == "product" else np.add.outer(a, a)
            flat = q.ravel()
            order = np.argsort(flat, kind="stable")
            sorted_q = flat[order]
            # tie groups: start index of the group of each sorted position
            new_group = np.empty(len(sorted_q), dtype=bool)
            new_group[0] = True
            new_group[1:] = sorted_q[1:] != sorted_q[:-1]
            group_id = np.cumsum(new_group) - 1
            self._order = order
            self._group_id = group_id
            self._n_groups = group_id[-1] + 1
            sums = np.add.outer(np.arange(1, K + 1), np.arange(1, K + 1)).ravel()
            self._pair_sum = sums
        elif tag == "bounded_table":
            B, table = rule.kernel[1], rule.kernel[2]
            self._B = B
            nclass = B + 1
            first = np.zeros((nclass, nclass, nclass, nclass))
            for key, v in table.items():
                a, b, c, d = (x - 1 for x in key)
                first[a, b, c, d] = 1.0 if v == 1 else 0.0
            self._first = first
            self._cap = np.minimum(np.arange(1, K + 1), B + 1) - 1  # class index per size
            self._pair_sum = np.add.outer(np.arange(1, K + 1), np.arange(1, K + 1)).ravel()
        elif tag in ("always_first", "min_min", "adjacent"):
            self._pair_sum = np.add.outer(np.arange(1, K + 1), np.arange(1, K + 1)).ravel()
        else:
            raise ValueError(f"unknown kernel tag {tag!r}")

    def _merged_pair(self, w: np.ndarray, w_inf: float):
        """Return (M, dinf): finite merged-pair matrix and one-giant vector.

        M[a-1, b-1] = P(merged pair sizes = (a, b)); dinf[a-1] = P(merged
        pair is {a, giant}), both orders summed.
        """
        tag = self.rule.kernel[0]
        if tag == "always_first":
            return np.multiply.outer(w, w), 2.0 * w * w_inf
        if tag == "min_min":
            m, m_inf = _min_of_two(w, w_inf)
            return np.multiply.outer(m, m), 2.0 * m * m_inf
        if tag == "adjacent":
            m, m_inf = _min_of_two(w, w_inf)
            return np.multiply.outer(w, m), w * m_inf + w_inf * m
        if tag == "pair_score":
            wp = np.multiply.outer(w, w).ravel()[self._order]
            group_mass = np.bincount(self._group_id, weights=wp, minlength=self._n_groups)
            s_fin = w.sum()
            p_inf_pair = w_inf * w_inf + 2.0 * w_inf * s_fin  # q = infinity
            above = np.empty(self._n_groups)
            above[-1] = p_inf_pair
            if self._n_groups > 1:
                above[:-1] = p_inf_pair + group_mass[::-1].cumsum()[::-1][1:]
            sel = 2.0 * above[self._group_id] + group_mass[self._group_id]
            M = np.empty(len(wp))
            M[self._order] = wp * sel
            M = M.reshape(self.K, self.K)
            # one-giant pairs merge only when the competing pair also scores
            # infinity; ties go to the first pair
            dinf = 2.0 * w * w_inf * p_inf_pair
            return M, dinf
        if tag == "bounded_table":
            nclass = self._B + 1
            wc = np.zeros(nclass)
            np.add.at(wc, self._cap, w)
            wc[-1] += w_inf
            first = self._first
            # P(first pair wins | first classes (u,v)) over the second pair
            fp = np.einsum("uvxy,x,y->uv", first, wc, wc)
            # P(second pair wins | second classes (u,v)) over the first pair
            sp = np.einsum("xyuv,x,y->uv", 1.0 - first, wc, wc)
            sel = fp + sp
            cap = self._cap
            M = np.multiply.outer(w, w) * sel[np.ix_(cap, cap)]
            giant_class = nclass - 1
            dinf = w * w_inf * (sel[cap, giant_class] + sel[giant_class, cap])
            return M, dinf
        raise AssertionError(tag)

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        w = np.asarray(rho, dtype=float)
        w_inf = gel_mass(w) if self.gel_mode == "with_gel" else 0.0
        return self.expected_change(w, w_inf)

    def expected_change(self, w: np.ndarray, w_inf: float) -> np.ndarray:
        """RHS with an explicit giant weight instead of the residual mass."""
        if len(w) != self.K:
            raise ValueError(f"state has K={len(w)}, kernel built for K={self.K}")
        if w_inf != 0.0 and self.gel_mode == "no_gel":
            raise ValueError("kernel built in no_gel mode cannot take giant mass")
        w = np.asarray(w, dtype=float)
        M, dinf = self._merged_pair(w, w_inf)
        birth = np.bincount(self._pair_sum, weights=M.ravel(), minlength=2 * self.K + 1)
        death = M.sum(axis=0) + M.sum(axis=1) + dinf
        return self._kvec * (birth[1 : self.K + 1] - death)


def _min_of_two(w: np.ndarray, w_inf: float):
    """Distribution of the smaller of two iid sizes drawn from (w, w_inf)."""
    tail = np.empty(len(w))  # P(C > a) for a = 1..K, giant included
    tail[-1] = w_inf
    if len(w) > 1:
        tail[:-1] = w_inf + w[::-1].cumsum()[::-1][1:]
    m = w * w + 2.0 * w * tail
    return m, w_inf * w_inf


def make_rhs(rule: RuleSpec, K: int, gel_mode: str = "with_gel", impl: str = "auto"):
    """Pick an RHS evaluator: specialized for catalogued rules, generic otherwise."""
    if impl == "generic":
        return GenericKernel(rule, K, gel_mode)
    if impl == "fast" or (impl == "auto" and rule.kernel is not None):
        return PairKernel(rule, K, gel_mode)
    if impl == "auto":
        return GenericKernel(rule, K, gel_mode)
    raise ValueError(f"unknown impl {impl!r}")


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------


@dataclass
class KineticsConfig:
    rule: RuleSpec
    K: int
    t_end: float
    gel_mode: str = "with_gel"
    integrator: str = "rk45_adaptive"  # or "rk4_fixed"
    h: float = 1e-3  # fixed-step size / initial adaptive step
    rtol: float = 1e-7
    atol: float = 1e-9
    grid: Optional[np.ndarray] = None  # output times; default 101 points on [0, t_end]
    rhs_impl: str = "auto"

    def output_grid(self) -> np.ndarray:
        if self.grid is not None:
            g = np.asarray(self.grid, dtype=float)
            if len(g) == 0 or g[0] < 0 or g[-1] > self.t_end + 1e-12:
                raise ValueError("grid must lie within [0, t_end]")
            if np.any(np.diff(g) <= 0):
                raise ValueError("grid times must be strictly increasing")
            return g
        return np.linspace(0.0, self.t_end, 101)


@dataclass
class OdeSeries:
    """Integrated kinetics on an output grid."""

    t: np.ndarray  # (T,)
    rho: np.ndarray  # (T, K)
    meta: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return self.rho.shape[1]

    @property
    def mass(self) -> np.ndarray:
        return self.rho.sum(axis=1)

    @property
    def gel(self) -> np.ndarray:
        return np.maximum(0.0, 1.0 - self.mass)

    @property
    def chi(self) -> np.ndarray:
        return self.rho @ np.arange(1, self.K + 1)

    def leakage(self) -> np.ndarray:
        """Mass parked in the upper half of the truncation window, [K/2, K]."""
        return self.rho[:, self.K // 2 - 1 :].sum(axis=1)

    def rho_at(self, t: float, k: int) -> float:
        idx = int(np.argmin(np.abs(self.t - t)))
        if abs(self.t[idx] - t) > 1e-9:
            raise ValueError(f"t={t} not on the output grid")
        return float(self.rho[idx, k - 1])


# Fehlberg 4(5) tableau
_FB_A = [
    [],
    [1 / 4],
    [3 / 32, 9 / 32],
    [1932 / 2197, -7200 / 2197, 7296 / 2197],
    [439 / 216, -8, 3680 / 513, -845 / 4104],
    [-8 / 27, 2, -3544 / 2565, 1859 / 4104, -11 / 40],
]
_FB_B5 = [16 / 135, 0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55]
_FB_B4 = [25 / 216, 0, 1408 / 2565, 2197 / 4104, -1 / 5, 0]


def _project(y: np.ndarray):
    """Clip to [0, inf) and rescale if total mass exceeds 1; returns drift size."""
    before = y.copy()
    np.clip(y, 0.0, None, out=y)
    s = y.sum()
    if s > 1.0:
        y /= s
    return float(np.max(np.abs(y - before)))


def integrate(config: KineticsConfig) -> OdeSeries:
    """Integrate the truncated system from the monodisperse initial state.

    Each accepted step is followed by a projection back onto the invariant
    set (componentwise clip, rescale when total mass exceeds 1); the largest
    projection applied is reported in the series metadata.
    """
    rhs = make_rhs(config.rule, config.K, config.gel_mode, config.rhs_impl)
    grid = config.output_grid()
    y = initial_state(config.K)
    out = np.zeros((len(grid), config.K))
    max_proj = 0.0
    gi = 0
    if grid[0] == 0.0:
        out[0] = y
        gi = 1
    t = 0.0
    h = config.h
    n_eval = 0
    while gi < len(grid):
        t_target = grid[gi]
        if config.integrator == "rk4_fixed":
            step = min(h, t_target - t)
            k1 = rhs(y)
            k2 = rhs(y + 0.5 * step * k1)
            k3 = rhs(y + 0.5 * step * k2)
            k4 = rhs(y + step * k3)
            y = y + (step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            t += step
            n_eval += 4
            max_proj = max(max_proj, _project(y))
        elif config.integrator == "rk45_adaptive":
            step = min(h, t_target - t)
            ks = []
            for i in range(6):
                yi = y.copy()
                for j, a in enumerate(_FB_A[i]):
                    yi += step * a * ks[j]
                ks.append(rhs(yi))
            n_eval += 6
            y5 = y + step * sum(b * k for b, k in zip(_FB_B5, ks))
            y4 = y + step * sum(b * k for b, k in zip(_FB_B4, ks))
            err = np.max(np.abs(y5 - y4) / (config.atol + config.rtol * np.abs(y5)))
            if err <= 1.0:
                y = y5
                t += step
                max_proj = max(max_proj, _project(y))
            factor = 0.9 * (1.0 / err) ** 0.2 if err > 0 else 5.0
            h = step * min(5.0, max(0.2, factor))
            if h < 1e-14 * max(1.0, abs(t)):
                raise IntegrationError(f"step size underflow at t={t:.6g}", t_last=t)
        else:
            raise ValueError(f"unknown integrator {config.integrator!r}")
        if abs(t - t_target) < 1e-13 * max(1.0, t_target):
            t = t_target
            out[gi] = y
            gi += 1
    meta = {
        "rule": config.rule.name,
        "K": config.K,
        "gel_mode": config.gel_mode,
        "integrator": config.integrator,
        "h": config.h,
        "rtol": config.rtol,
        "atol": config.atol,
        "max_projection": max_proj,
        "n_rhs_evaluations": n_eval,
    }
    return OdeSeries(t=grid.copy(), rho=out, meta=meta)
