"""l-vertex rule definitions and their expected-change kernels.

A rule looks at the component sizes of ``ell`` sampled vertices (with an
explicit ``GIANT`` symbol for linear-size components) and decides which of
the candidate pairs get an edge.  ``expected_delta`` turns a rule into the
kernel d_k that drives both the simulator's drift diagnostics and the
right-hand side of the associated coagulation ODE system.

All rule objects are immutable; ``decide`` and ``expected_delta`` are pure
functions and safe to call from any number of workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

__all__ = [
    "GIANT",
    "ExtSize",
    "EdgeChoice",
    "Partition",
    "RuleSpec",
    "decide",
    "expected_delta",
    "merge_groups",
    "delta_nk",
    "builtin",
    "builtin_names",
    "bohman_frieze_table",
]

#: Distinguished "linear-size component" symbol.  ``math.inf`` gives the
#: required arithmetic for free: GIANT + x = GIANT, GIANT * x = GIANT, and
#: GIANT compares greater than every finite size (GIANT vs GIANT is a tie).
GIANT = math.inf

ExtSize = Union[int, float]

PAIR_12 = frozenset({frozenset({0, 1})})
PAIR_34 = frozenset({frozenset({2, 3})})


def is_giant(c: ExtSize) -> bool:
    return c == GIANT


def _check_size(c: ExtSize) -> None:
    if c == GIANT:
        return
    if c != int(c) or c < 1:
        raise ValueError(f"component size must be an integer >= 1 or GIANT, got {c!r}")


@dataclass(frozen=True)
class EdgeChoice:
    """One weighted outcome of a rule: the set of index pairs to join."""

    edges: frozenset  # frozenset of frozenset({i, j}), 0-based indices
    weight: float = 1.0


@dataclass(frozen=True)
class Partition:
    """Which of the sampled indices lie in the same component.

    ``block_of[i]`` is the block id of index ``i``; block ids are consecutive
    integers starting at 0, in order of first appearance.
    """

    block_of: tuple

    def __post_init__(self):
        seen = {}
        for b in self.block_of:
            if b not in seen:
                if b != len(seen):
                    raise ValueError("block ids must be consecutive in order of first appearance")
                seen[b] = True

    @property
    def n_blocks(self) -> int:
        return max(self.block_of) + 1 if self.block_of else 0

    @classmethod
    def singletons(cls, ell: int) -> "Partition":
        return cls(tuple(range(ell)))

    @classmethod
    def limit_convention(cls, sizes) -> "Partition":
        """Finite entries in pairwise-distinct blocks, all GIANT entries shared."""
        block_of = []
        giant_block = None
        next_id = 0
        for c in sizes:
            if is_giant(c):
                if giant_block is None:
                    giant_block = next_id
                    next_id += 1
                block_of.append(giant_block)
            else:
                block_of.append(next_id)
                next_id += 1
        return cls(tuple(block_of))

    def block_sizes(self, sizes) -> list:
        out = [None] * self.n_blocks
        for i, b in enumerate(self.block_of):
            if out[b] is None:
                out[b] = sizes[i]
            elif out[b] != sizes[i]:
                raise ValueError(
                    f"inconsistent sizes: indices in block {b} have sizes {out[b]} and {sizes[i]}"
                )
        return out


@dataclass(frozen=True)
class RuleSpec:
    """An l-vertex rule: a pure decision function plus metadata.

    ``decide`` maps (sizes, partition) to a weighted list of EdgeChoice;
    deterministic rules return a single choice of weight 1.  ``g`` is the
    stability threshold: replacing any size above ``g(S)`` by GIANT must not
    change the rule's expected effect on components of size <= S.
    """

    name: str
    ell: int
    decide: Callable
    g: Callable[[int], int]
    is_achlioptas: bool = False
    is_merging: bool = True
    bounded_size_B: Optional[int] = None
    #: internal dispatch tag for the fast simulator / ODE paths; None for
    #: custom rules, which go through the generic (slow) code paths.
    kernel: Optional[tuple] = field(default=None, compare=False)


def decide(rule: RuleSpec, sizes, partition: Partition):
    """Validated rule evaluation: returns the weighted list of EdgeChoice."""
    if len(sizes) != rule.ell:
        raise ValueError(f"rule {rule.name!r} needs {rule.ell} sizes, got {len(sizes)}")
    if len(partition.block_of) != rule.ell:
        raise ValueError("partition does not cover all indices")
    for c in sizes:
        _check_size(c)
    partition.block_sizes(sizes)  # raises on inconsistency
    choices = rule.decide(tuple(sizes), partition)
    total = sum(ch.weight for ch in choices)
    if not math.isclose(total, 1.0, abs_tol=1e-12):
        raise ValueError(f"rule {rule.name!r} returned weights summing to {total}")
    return choices


def merge_groups(partition: Partition, edges) -> list:
    """Groups of blocks joined by the chosen edges (transitive closure).

    Only groups containing at least two distinct blocks are returned; an edge
    inside a single block is a no-op merge.
    """
    parent = list(range(partition.n_blocks))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in edges:
        i, j = tuple(e)
        ri, rj = find(partition.block_of[i]), find(partition.block_of[j])
        if ri != rj:
            parent[rj] = ri
    groups = {}
    for b in range(partition.n_blocks):
        groups.setdefault(find(b), []).append(b)
    return [g for g in groups.values() if len(g) >= 2]


def delta_nk(k: int, sizes, partition: Partition, edges) -> int:
    """Change in the number of vertices in size-k components for one choice."""
    bsizes = partition.block_sizes(sizes)
    delta = 0
    for group in merge_groups(partition, edges):
        total = sum(bsizes[b] for b in group)
        if total == k:  # never true when a GIANT block is involved
            delta += k
        for b in group:
            if bsizes[b] == k:
                delta -= k
    return delta


def expected_delta(rule: RuleSpec, k: int, sizes) -> float:
    """Expected change of N_k under the limit convention.

    Finite entries are treated as pairwise-distinct components and all GIANT
    entries as one shared component.  Satisfies |expected_delta| <= ell * k.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    partition = Partition.limit_convention(sizes)
    choices = decide(rule, sizes, partition)
    return sum(ch.weight * delta_nk(k, sizes, partition, ch.edges) for ch in choices)


# ---------------------------------------------------------------------------
# Built-in rule catalogue
# ---------------------------------------------------------------------------


def _one(pair) -> list:
    return [EdgeChoice(pair, 1.0)]


def _decide_er(sizes, partition):
    return _one(PAIR_12)


def _make_pair_score(score: Callable):
    def _decide(sizes, partition):
        first = score(sizes[0], sizes[1])
        second = score(sizes[2], sizes[3])
        return _one(PAIR_12 if first <= second else PAIR_34)

    return _decide


def _cap(c: ExtSize, B: int) -> int:
    return int(c) if c <= B else B + 1


def _make_bounded(B: int, table: dict):
    def _decide(sizes, partition):
        key = tuple(_cap(c, B) for c in sizes)
        return _one(PAIR_12 if table[key] == 1 else PAIR_34)

    return _decide


def _decide_dcdgm(sizes, partition):
    i = 0 if sizes[0] <= sizes[1] else 1
    j = 2 if sizes[2] <= sizes[3] else 3
    return _one(frozenset({frozenset({i, j})}))


def _decide_adjacent(sizes, partition):
    pair = frozenset({0, 1}) if sizes[1] <= sizes[2] else frozenset({0, 2})
    return _one(frozenset({pair}))


def bohman_frieze_table(B: int = 1) -> dict:
    """Decision table joining the first pair iff both its sizes are 1."""
    table = {}
    vals = range(1, B + 2)
    for a in vals:
        for b in vals:
            for c in vals:
                for d in vals:
                    table[(a, b, c, d)] = 1 if (a == 1 and b == 1) else 2
    return table


def _validate_table(B: int, table: dict) -> dict:
    vals = range(1, B + 2)
    want = {(a, b, c, d) for a in vals for b in vals for c in vals for d in vals}
    if set(table) != want:
        raise ValueError(f"bounded_size table must cover all capped 4-tuples for B={B}")
    bad = {v for v in table.values() if v not in (1, 2)}
    if bad:
        raise ValueError(f"table entries must be 1 or 2, got {bad}")
    return dict(table)


def builtin(name: str, **params) -> RuleSpec:
    """Construct one of the catalogued rules by name.

    Names: erdos_renyi, bohman_frieze, bounded_size (params: B, table),
    product, sum, dcdgm, adjacent_edge.
    """
    if name == "erdos_renyi":
        _no_params(name, params)
        return RuleSpec(
            name=name, ell=2, decide=_decide_er, g=lambda s: s, kernel=("always_first",)
        )
    if name == "product":
        _no_params(name, params)
        return RuleSpec(
            name=name,
            ell=4,
            decide=_make_pair_score(lambda a, b: a * b),
            g=lambda s: s * s,
            is_achlioptas=True,
            kernel=("pair_score", "product"),
        )
    if name == "sum":
        _no_params(name, params)
        return RuleSpec(
            name=name,
            ell=4,
            decide=_make_pair_score(lambda a, b: a + b),
            g=lambda s: 2 * s,
            is_achlioptas=True,
            kernel=("pair_score", "sum"),
        )
    if name == "bohman_frieze":
        _no_params(name, params)
        table = bohman_frieze_table(1)
        return RuleSpec(
            name=name,
            ell=4,
            decide=_make_bounded(1, table),
            g=lambda s: max(1, s),
            is_achlioptas=True,
            bounded_size_B=1,
            kernel=("bounded_table", 1, table),
        )
    if name == "bounded_size":
        B = params.pop("B", None)
        table = params.pop("table", None)
        _no_params(name, params)
        if B is None or table is None:
            raise ValueError("bounded_size requires params B and table")
        B = int(B)
        if B < 1:
            raise ValueError("B must be >= 1")
        table = _validate_table(B, table)
        return RuleSpec(
            name=name,
            ell=4,
            decide=_make_bounded(B, table),
            g=lambda s: max(B, s),
            is_achlioptas=True,
            bounded_size_B=B,
            kernel=("bounded_table", B, table),
        )
    if name == "dcdgm":
        _no_params(name, params)
        return RuleSpec(
            name=name, ell=4, decide=_decide_dcdgm, g=lambda s: s, kernel=("min_min",)
        )
    if name == "adjacent_edge":
        _no_params(name, params)
        return RuleSpec(
            name=name, ell=3, decide=_decide_adjacent, g=lambda s: s, kernel=("adjacent",)
        )
    raise ValueError(f"unknown rule {name!r}; known: {', '.join(builtin_names())}")


def _no_params(name, params):
    if params:
        raise ValueError(f"rule {name!r} got unexpected params: {sorted(params)}")


def builtin_names() -> list:
    return [
        "erdos_renyi",
        "bohman_frieze",
        "bounded_size",
        "product",
        "sum",
        "dcdgm",
        "adjacent_edge",
    ]
