"""Closed subgroups of a rank-r torus as integer character lattices.

A closed subgroup H of the torus is encoded by the sublattice A(H) of Z^r
of characters vanishing on H, stored as a canonical row Hermite basis.
The encoding is an inclusion-reversing bijection, so containment,
intersection, join, components and cotorality are all integer lattice
computations.  Values are immutable and hashable.
"""

from dataclasses import dataclass
from typing import Iterable, Optional

from . import intmat


@dataclass(frozen=True)
class TorusContext:
    rank: int

    def __post_init__(self):
        if self.rank < 0:
            raise ValueError("torus rank must be nonnegative")


@dataclass(frozen=True)
class ClosedSubgroup:
    """A closed subgroup, identified by the HNF basis of its annihilator.

    Two values are equal iff their annihilator matrices are identical;
    canonical_subgroup is the only sanctioned constructor.
    """

    rank: int
    annihilator: tuple

    @property
    def codimension(self) -> int:
        return len(self.annihilator)

    @property
    def dimension(self) -> int:
        return self.rank - len(self.annihilator)

    @property
    def component_order(self) -> int:
        if not self.annihilator:
            return 1
        return intmat.index_in_saturation([list(r) for r in self.annihilator])

    @property
    def is_connected(self) -> bool:
        return self.component_order == 1

    @property
    def is_full(self) -> bool:
        return not self.annihilator

    @property
    def is_trivial(self) -> bool:
        return self.dimension == 0 and self.component_order == 1

    def annihilator_rows(self):
        return [list(r) for r in self.annihilator]

    def __repr__(self):
        return "ClosedSubgroup(r=%d, A=%s)" % (self.rank, [list(r) for r in self.annihilator])


def canonical_subgroup(ctx: TorusContext, rows) -> ClosedSubgroup:
    rows = [list(r) for r in rows]
    for r in rows:
        if len(r) != ctx.rank:
            raise ValueError("annihilator rows must have %d columns" % ctx.rank)
        for x in r:
            if not isinstance(x, int):
                raise ValueError("annihilator entries must be integers")
    h = intmat.hnf(rows, ncols=ctx.rank)
    return ClosedSubgroup(ctx.rank, tuple(tuple(r) for r in h))


def full_torus(ctx: TorusContext) -> ClosedSubgroup:
    return canonical_subgroup(ctx, [])


def trivial_subgroup(ctx: TorusContext) -> ClosedSubgroup:
    return canonical_subgroup(ctx, intmat.identity(ctx.rank))


def kernel_of_character(ctx: TorusContext, alpha) -> ClosedSubgroup:
    """ker(alpha): the full torus when alpha = 0, else codimension 1."""
    alpha = list(alpha)
    if len(alpha) != ctx.rank:
        raise ValueError("character length mismatch")
    if all(a == 0 for a in alpha):
        return full_torus(ctx)
    return canonical_subgroup(ctx, [alpha])


def identity_component(h: ClosedSubgroup) -> ClosedSubgroup:
    if not h.annihilator:
        return h
    sat = intmat.saturation(h.annihilator_rows(), h.rank)
    return ClosedSubgroup(h.rank, tuple(tuple(r) for r in sat))


def contains(h: ClosedSubgroup, k: ClosedSubgroup) -> bool:
    """True iff K is a subgroup of H, i.e. A(H) is a sublattice of A(K)."""
    _same_context(h, k)
    return intmat.lattice_contains(k.annihilator_rows(), h.annihilator_rows())


def intersection(h: ClosedSubgroup, k: ClosedSubgroup) -> ClosedSubgroup:
    _same_context(h, k)
    s = intmat.lattice_sum(h.annihilator_rows(), k.annihilator_rows(), h.rank)
    return ClosedSubgroup(h.rank, tuple(tuple(r) for r in s))


def join(h: ClosedSubgroup, k: ClosedSubgroup) -> ClosedSubgroup:
    _same_context(h, k)
    c = intmat.lattice_intersect(h.annihilator_rows(), k.annihilator_rows(), h.rank)
    return ClosedSubgroup(h.rank, tuple(tuple(r) for r in c))


def lattice_ops(h: ClosedSubgroup, k: ClosedSubgroup) -> dict:
    return {
        "contains": contains(h, k),
        "intersection": intersection(h, k),
        "join": join(h, k),
    }


def is_cotoral(l: ClosedSubgroup, k: ClosedSubgroup) -> bool:
    """True iff L <= K and K/L is a torus.

    Dually: A(K) inside A(L) with torsion-free quotient, detected through
    the elementary divisors of the coordinate matrix of A(K) in the basis
    of A(L).
    """
    _same_context(l, k)
    lk = l.annihilator_rows()
    if not intmat.lattice_contains(lk, k.annihilator_rows()):
        return False
    if not k.annihilator:
        return True
    coords = []
    for row in k.annihilator:
        c = intmat.hnf_solve(lk, list(row))
        assert c is not None
        coords.append(c)
    return all(d == 1 for d in intmat.elementary_divisors(coords))


@dataclass(frozen=True)
class Character:
    vector: tuple

    def __post_init__(self):
        for x in self.vector:
            if not isinstance(x, int):
                raise ValueError("character entries must be integers")

    @property
    def is_zero(self) -> bool:
        return all(x == 0 for x in self.vector)


@dataclass(frozen=True)
class Representation:
    """Finite multiset of characters with positive multiplicities."""

    summands: tuple  # of (Character, mult)

    def __post_init__(self):
        for _, m in self.summands:
            if m < 1:
                raise ValueError("multiplicities must be positive")

    @property
    def total_dimension(self) -> int:
        return sum(m for _, m in self.summands)

    def direct_sum(self, other: "Representation") -> "Representation":
        return Representation(self.summands + other.summands)


def representation(weights) -> Representation:
    """Build a Representation from (weight tuple, mult) pairs."""
    return Representation(tuple((Character(tuple(w)), m) for w, m in weights))


def fixed_subrep(v: Representation, h: ClosedSubgroup) -> Representation:
    kept = []
    a = h.annihilator_rows()
    for ch, m in v.summands:
        if intmat.hnf_contains(a, list(ch.vector)):
            kept.append((ch, m))
    return Representation(tuple(kept))


def kernel_decomposition(h: ClosedSubgroup):
    """One codimension-1 kernel per annihilator basis row; intersects to H."""
    ctx = TorusContext(h.rank)
    return [kernel_of_character(ctx, list(row)) for row in h.annihilator]


def punctured_cube_support(circles, k: ClosedSubgroup) -> bool:
    """True iff some listed circle lies inside K."""
    for c in circles:
        if not (c.dimension == 1 and c.is_connected):
            raise ValueError("punctured_cube_support requires connected circles")
    return any(contains(k, c) for c in circles)


def _same_context(h: ClosedSubgroup, k: ClosedSubgroup):
    if h.rank != k.rank:
        raise ValueError("subgroups from different torus contexts")


def subgroup_sort_key(h: ClosedSubgroup):
    # deterministic ordering for reports: big subgroups first, then lexicographic
    return (h.codimension, h.annihilator)


# -- JSON encoding ----------------------------------------------------------

def subgroup_to_json(h: ClosedSubgroup) -> dict:
    return {"rank": h.rank, "annihilator": [list(r) for r in h.annihilator]}


def subgroup_from_json(obj) -> ClosedSubgroup:
    if not isinstance(obj, dict) or "rank" not in obj or "annihilator" not in obj:
        raise ValueError("subgroup JSON needs 'rank' and 'annihilator'")
    rank = obj["rank"]
    if not isinstance(rank, int) or rank < 0:
        raise ValueError("subgroup rank must be a nonnegative integer")
    rows = obj["annihilator"]
    if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
        raise ValueError("annihilator must be a list of integer rows")
    return canonical_subgroup(TorusContext(rank), rows)


def representation_to_json(v: Representation) -> dict:
    return {
        "summands": [{"weight": list(ch.vector), "mult": m} for ch, m in v.summands]
    }


def representation_from_json(obj) -> Representation:
    if not isinstance(obj, dict) or "summands" not in obj:
        raise ValueError("representation JSON needs 'summands'")
    out = []
    for s in obj["summands"]:
        if not isinstance(s, dict) or "weight" not in s or "mult" not in s:
            raise ValueError("each summand needs 'weight' and 'mult'")
        if not isinstance(s["mult"], int) or s["mult"] < 1:
            raise ValueError("mult must be a positive integer")
        out.append((tuple(s["weight"]), s["mult"]))
    return representation(out)
