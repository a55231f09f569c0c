"""Product structure rings over finite families of subgroups.

The ring attached to a family with connected level L and members K~ is the
product of the polynomial rings H^*(B(G/K~)), one factor per member, with
coordinates fixed once and for all by the HNF basis of the annihilator
lattice A(K~).  Euler classes, idempotents, inflation and restriction all
act componentwise; the only genuinely lattice-theoretic step is the K.F
bookkeeping behind inflation and the quotient bases behind restriction.
"""

from dataclasses import dataclass
from typing import Optional

from . import intmat
from .lattice_groups import (
    ClosedSubgroup,
    Representation,
    contains,
    fixed_subrep,
    identity_component,
    join,
    representation_to_json,
    subgroup_from_json,
    subgroup_to_json,
)
from .graded import (
    CanonicalEulerSet,
    Poly,
    PolyRing,
    RingMap,
    canonical_euler_set,
    constant,
    explicit_euler_set,
    frac_from_json,
    frac_to_json,
    free,
    linear,
    localize,
    poly,
    poly_ring,
    ring_map,
    zero_module,
    zero_poly,
)


# -- families and the product ring --------------------------------------------

@dataclass(frozen=True)
class FiniteFamily:
    """Finite truncation of the family of subgroups with identity component
    `level`."""

    level: ClosedSubgroup
    members: tuple


def finite_family(level: ClosedSubgroup, members) -> FiniteFamily:
    if not level.is_connected:
        raise ValueError("family level must be a connected subgroup")
    members = tuple(members)
    if not members:
        raise ValueError("family needs at least one member")
    seen = set()
    for m in members:
        if m.rank != level.rank:
            raise ValueError("family member from a different torus")
        if identity_component(m) != level:
            raise ValueError("family member %r has the wrong identity component" % (m,))
        if m in seen:
            raise ValueError("duplicate family member")
        seen.add(m)
    return FiniteFamily(level, members)


def member_ring(member: ClosedSubgroup) -> PolyRing:
    """H^*(B(G/K~)): one degree -2 variable per HNF basis row of A(K~)."""
    return poly_ring(member.annihilator)


@dataclass(frozen=True)
class StructureRing:
    family: FiniteFamily
    rings: tuple  # one PolyRing per member

    def member_index(self, member: ClosedSubgroup) -> int:
        try:
            return self.family.members.index(member)
        except ValueError:
            raise ValueError("unknown component %r" % (member,))


def structure_ring(family: FiniteFamily) -> StructureRing:
    return StructureRing(family, tuple(member_ring(m) for m in family.members))


# -- elements ------------------------------------------------------------------

@dataclass(frozen=True)
class StructureRingElement:
    """One polynomial per component; all operations are componentwise.

    `ring` is any product-ring description exposing a `rings` tuple, so the
    same element type serves the restricted rings below.
    """

    ring: object
    components: tuple

    @property
    def is_zero(self) -> bool:
        return all(p.is_zero for p in self.components)

    def degrees(self):
        return tuple(p.degree for p in self.components)

    def homogeneous_degree(self) -> Optional[int]:
        # the single degree shared by every nonzero component, if there is one
        ds = {p.degree for p in self.components if not p.is_zero}
        if len(ds) == 1:
            return ds.pop()
        return None

    def __add__(self, other: "StructureRingElement") -> "StructureRingElement":
        assert self.ring == other.ring
        return StructureRingElement(
            self.ring, tuple(p + q for p, q in zip(self.components, other.components))
        )

    def __neg__(self) -> "StructureRingElement":
        return StructureRingElement(self.ring, tuple(-p for p in self.components))

    def __sub__(self, other: "StructureRingElement") -> "StructureRingElement":
        return self + (-other)

    def __mul__(self, other: "StructureRingElement") -> "StructureRingElement":
        assert self.ring == other.ring
        return StructureRingElement(
            self.ring, tuple(p * q for p, q in zip(self.components, other.components))
        )

    def scale(self, c) -> "StructureRingElement":
        return StructureRingElement(self.ring, tuple(p.scale(c) for p in self.components))


def element(ring, components) -> StructureRingElement:
    comps = tuple(components)
    if len(comps) != len(ring.rings):
        raise ValueError("one polynomial per component required")
    for p, r in zip(comps, ring.rings):
        if not isinstance(p, Poly) or p.nvars != r.nvars:
            raise ValueError("component polynomial over the wrong ring")
    return StructureRingElement(ring, comps)


def one(ring) -> StructureRingElement:
    return element(ring, [constant(r.nvars, 1) for r in ring.rings])


def zero(ring) -> StructureRingElement:
    return element(ring, [zero_poly(r.nvars) for r in ring.rings])


# -- Euler classes -------------------------------------------------------------

@dataclass(frozen=True)
class EulerClass:
    """c(V) with its per-component factorization into linear forms.

    factors[i] lists (coefficient row, multiplicity) pairs over the i-th
    member ring; the component polynomial is their product, 1 when V has no
    fixed vectors there.
    """

    element: StructureRingElement
    factors: tuple
    rep: Representation


def euler_class(v: Representation, family: FiniteFamily) -> EulerClass:
    ring = structure_ring(family)
    lvl = family.level.annihilator_rows()
    for ch, _ in v.summands:
        if not intmat.hnf_contains(lvl, list(ch.vector)):
            raise ValueError("weight does not factor through the level quotient")
    comps = []
    facs = []
    for m, r in zip(family.members, ring.rings):
        a = m.annihilator_rows()
        p = constant(r.nvars, 1)
        fs = []
        for ch, mult in fixed_subrep(v, m).summands:
            coords = intmat.hnf_solve(a, list(ch.vector))
            assert coords is not None
            form = linear(coords)
            for _ in range(mult):
                p = p * form
            fs.append((tuple(coords), mult))
        comps.append(p)
        facs.append(tuple(fs))
    return EulerClass(element(ring, comps), tuple(facs), v)


# -- inflation -----------------------------------------------------------------

def inflation_ring_map(kf: ClosedSubgroup, f: ClosedSubgroup) -> RingMap:
    """H^*(B(G/KF)) -> H^*(B(G/F)) along the lattice inclusion A(KF) <= A(F)."""
    a_f = f.annihilator_rows()
    images = []
    for row in kf.annihilator:
        c = intmat.hnf_solve(a_f, list(row))
        if c is None:
            raise ValueError("inflation requires A(KF) inside A(F)")
        images.append(c)
    return ring_map(member_ring(kf), member_ring(f), images)


def inflation_map(x: StructureRingElement, dst: StructureRing) -> StructureRingElement:
    """Push an element of the level-K ring down to a finer family.

    The component at F is the image of the K.F component, rewritten from
    the HNF basis of A(K.F) = A(K) cap A(F) into the basis of A(F).  The
    source family must contain every K.F that shows up.
    """
    src = x.ring
    k = src.family.level
    out = []
    for f in dst.family.members:
        kf = join(k, f)
        if kf not in src.family.members:
            raise ValueError("source family is missing the member %r" % (kf,))
        i = src.family.members.index(kf)
        out.append(inflation_ring_map(kf, f).poly_image(x.components[i]))
    return element(dst, out)


# -- restriction ---------------------------------------------------------------

def quotient_ring_map(f: ClosedSubgroup, k: ClosedSubgroup) -> RingMap:
    """H^*(BG/F) -> H^*(BK/F) for F <= K, induced by character restriction.

    The character lattice of K/F is A(F)/A(K); the target ring sits on a
    basis of its free part, read off from the Smith form of the coordinate
    matrix of A(K) in the HNF basis of A(F).  Source variables map to the
    integer linear forms given by the free columns of the change of basis.
    """
    a_f = f.annihilator_rows()
    n = len(a_f)
    coords = []
    for row in k.annihilator:
        c = intmat.hnf_solve(a_f, list(row))
        if c is None:
            raise ValueError("restriction requires F inside K")
        coords.append(c)
    if coords:
        d, _, v, vinv = intmat.snf(coords)
        rank = sum(1 for x in d if x != 0)
    else:
        v = intmat.identity(n)
        vinv = intmat.identity(n)
        rank = 0
    images = [tuple(v[i][rank:]) for i in range(n)]
    lifts = []
    for j in range(rank, n):
        vec = [0] * f.rank
        for i in range(n):
            c = vinv[j][i]
            if c:
                vec = [x + c * y for x, y in zip(vec, a_f[i])]
        lifts.append(tuple(vec))
    return ring_map(member_ring(f), poly_ring(lifts), images)


@dataclass(frozen=True)
class RestrictedRing:
    """The image ring of restriction to K: surviving components F <= K with
    their quotient polynomial rings."""

    subgroup: ClosedSubgroup
    base: StructureRing
    member_indices: tuple
    rings: tuple
    maps: tuple

    def members(self):
        return tuple(self.base.family.members[i] for i in self.member_indices)


def restricted_ring(k: ClosedSubgroup, ring: StructureRing) -> RestrictedRing:
    idx = []
    rings = []
    maps = []
    for i, f in enumerate(ring.family.members):
        if contains(k, f):
            rm = quotient_ring_map(f, k)
            idx.append(i)
            rings.append(rm.dst)
            maps.append(rm)
    return RestrictedRing(k, ring, tuple(idx), tuple(rings), tuple(maps))


def restriction_map(k: ClosedSubgroup, x: StructureRingElement) -> StructureRingElement:
    """Project to the components inside K, then restrict characters."""
    rr = restricted_ring(k, x.ring)
    comps = [rm.poly_image(x.components[i]) for i, rm in zip(rr.member_indices, rr.maps)]
    return StructureRingElement(rr, tuple(comps))


# -- localization --------------------------------------------------------------

@dataclass(frozen=True)
class LocalizedStructureRing:
    """E_K^{-1} O applied componentwise, presented by explicit generators.

    `modules` holds one localized free module per member, inverting the
    factored Euler classes of the generators; `accepts` is the membership
    test for the full multiplicative set.
    """

    ring: StructureRing
    subgroup: ClosedSubgroup
    generators: tuple
    euler_classes: tuple
    modules: tuple

    def accepts(self, v: Representation) -> bool:
        # c(V) is in the multiplicative set iff V has no K-fixed vectors
        return not fixed_subrep(v, self.subgroup).summands


def localized_structure_ring(k: ClosedSubgroup, family: FiniteFamily, generators) -> LocalizedStructureRing:
    ring = structure_ring(family)
    gens = tuple(generators)
    ecs = []
    for v in gens:
        if fixed_subrep(v, k).summands:
            raise ValueError("localizing representation has fixed vectors under the subgroup")
        ecs.append(euler_class(v, family))
    mods = []
    for i, r in enumerate(ring.rings):
        elements = []
        for ec in ecs:
            fs = ec.factors[i]
            if fs:
                elements.append(tuple(row for row, mult in fs for _ in range(mult)))
        mod = free(r)
        if elements:
            mod = localize(mod, explicit_euler_set(elements))
        mods.append(mod)
    return LocalizedStructureRing(ring, k, gens, tuple(ecs), tuple(mods))


def canonical_component_set(k: ClosedSubgroup, member: ClosedSubgroup) -> CanonicalEulerSet:
    """The whole of E_K seen on one component: invert every character of
    A(K~) outside A(K.K~).

    A weight a in A(K~) appears as a factor of some inverted Euler class
    exactly when a is not fixed by K, i.e. a lies outside A(K); inside the
    component lattice that complement is cut out by A(K) cap A(K~)."""
    kk = join(k, member)
    a_m = member.annihilator_rows()
    rows = []
    for row in kk.annihilator:
        c = intmat.hnf_solve(a_m, list(row))
        assert c is not None
        rows.append(c)
    return canonical_euler_set(rows, member.codimension)


def canonical_localized_modules(k: ClosedSubgroup, ring: StructureRing) -> tuple:
    """One Localize(free component, full E_K) per member."""
    mods = []
    for m, r in zip(ring.family.members, ring.rings):
        mods.append(localize(free(r), canonical_component_set(k, m)))
    return tuple(mods)


# -- idempotents ---------------------------------------------------------------

@dataclass(frozen=True)
class Idempotent:
    """Projection onto a subset of the components."""

    ring: StructureRing
    keep: tuple  # sorted member indices

    def apply(self, x: StructureRingElement) -> StructureRingElement:
        kept = set(self.keep)
        comps = tuple(
            p if i in kept else zero_poly(p.nvars) for i, p in enumerate(x.components)
        )
        return StructureRingElement(x.ring, comps)

    def apply_modules(self, modules) -> tuple:
        kept = set(self.keep)
        out = []
        for i, m in enumerate(modules):
            out.append(m if i in kept else zero_module(self.ring.rings[i]))
        return tuple(out)

    def complement(self) -> "Idempotent":
        kept = set(self.keep)
        rest = tuple(i for i in range(len(self.ring.rings)) if i not in kept)
        return Idempotent(self.ring, rest)


def idempotent_piece(ring: StructureRing, members) -> Idempotent:
    idx = set()
    for m in members:
        if isinstance(m, int):
            if not 0 <= m < len(ring.family.members):
                raise ValueError("unknown component index %d" % m)
            idx.add(m)
        else:
            idx.add(ring.member_index(m))
    return Idempotent(ring, tuple(sorted(idx)))


# -- JSON encoding -------------------------------------------------------------

def family_to_json(family: FiniteFamily) -> dict:
    return {
        "level": subgroup_to_json(family.level),
        "members": [subgroup_to_json(m) for m in family.members],
    }


def family_from_json(obj) -> FiniteFamily:
    return finite_family(
        subgroup_from_json(obj["level"]),
        [subgroup_from_json(m) for m in obj["members"]],
    )


def _monomial_key(exps) -> str:
    parts = []
    for i, e in enumerate(exps):
        if e == 1:
            parts.append("x%d" % (i + 1))
        elif e != 0:
            parts.append("x%d^%d" % (i + 1, e))
    return "*".join(parts) if parts else "1"


def _monomial_from_key(key: str, nvars: int):
    exps = [0] * nvars
    if key.strip() == "1":
        return tuple(exps)
    for part in key.split("*"):
        part = part.strip()
        if not part.startswith("x"):
            raise ValueError("bad monomial %r" % key)
        body = part[1:]
        if "^" in body:
            var, _, pw = body.partition("^")
            e = int(pw)
        else:
            var, e = body, 1
        i = int(var) - 1
        if not 0 <= i < nvars:
            raise ValueError("monomial variable out of range in %r" % key)
        exps[i] += e
    return tuple(exps)


def poly_to_monomial_json(p: Poly) -> dict:
    return {_monomial_key(e): frac_to_json(c) for e, c in p.terms}


def poly_from_monomial_json(obj, nvars: int) -> Poly:
    return poly(nvars, [(_monomial_from_key(k, nvars), frac_from_json(v)) for k, v in obj.items()])


def element_to_json(x: StructureRingElement) -> dict:
    return {
        "components": [
            {"member": i, "poly": poly_to_monomial_json(p)}
            for i, p in enumerate(x.components)
        ]
    }


def element_from_json(ring, obj) -> StructureRingElement:
    comps = [zero_poly(r.nvars) for r in ring.rings]
    for entry in obj["components"]:
        i = entry["member"]
        if not 0 <= i < len(comps):
            raise ValueError("component index out of range")
        comps[i] = comps[i] + poly_from_monomial_json(entry["poly"], ring.rings[i].nvars)
    return element(ring, comps)


def euler_class_to_json(ec: EulerClass) -> dict:
    return {
        "element": element_to_json(ec.element),
        "factors": [
            [{"form": [int(c) for c in row], "mult": m} for row, m in fs]
            for fs in ec.factors
        ],
        "representation": representation_to_json(ec.rep),
    }
