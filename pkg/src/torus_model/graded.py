"""Exact graded linear algebra over the rationals.

Modules are built as expression trees (free, shift, sum, quotient
presentation, localization, base change, idempotent piece) over polynomial
rings whose generators sit in degree -2.  Evaluation enumerates monomial
bases per degree and reduces by relations with exact Fraction arithmetic,
so every dimension is an exact integer.

Localizations are only ever evaluated per degree when the effective ring
has at most one variable (the localized ring is then a Laurent ring).
Inverting anything over >= 2 effective variables makes graded pieces
infinite-dimensional; evaluation raises NotLocallyFinite and callers must
route through localize_exactness_rewrite instead.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from . import intmat, linalg
from .linalg import CosetReducer, frac


class NotLocallyFinite(Exception):
    """A localized graded piece is infinite-dimensional."""


# -- polynomials -------------------------------------------------------------

@dataclass(frozen=True)
class Poly:
    """Homogeneous polynomial: sorted tuple of (exponent tuple, coeff).

    All exponent tuples have the same total, so the degree (-2 per unit of
    exponent) is well defined.  Laurent monomials (negative exponents) are
    permitted only for one-variable rings and never substituted into.
    """

    nvars: int
    terms: tuple

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> Optional[int]:
        # None for the zero polynomial
        if not self.terms:
            return None
        return -2 * sum(self.terms[0][0])

    def __add__(self, other: "Poly") -> "Poly":
        assert self.nvars == other.nvars
        acc = dict(self.terms)
        for e, c in other.terms:
            acc[e] = acc.get(e, Fraction(0)) + c
        return _poly_from_dict(self.nvars, acc)

    def __neg__(self) -> "Poly":
        return Poly(self.nvars, tuple((e, -c) for e, c in self.terms))

    def scale(self, c) -> "Poly":
        c = frac(c)
        if c == 0:
            return Poly(self.nvars, ())
        return Poly(self.nvars, tuple((e, c * x) for e, x in self.terms))

    def __mul__(self, other: "Poly") -> "Poly":
        assert self.nvars == other.nvars
        acc = {}
        for e1, c1 in self.terms:
            for e2, c2 in other.terms:
                e = tuple(a + b for a, b in zip(e1, e2))
                acc[e] = acc.get(e, Fraction(0)) + c1 * c2
        return _poly_from_dict(self.nvars, acc)

    def substitute(self, images) -> "Poly":
        """Replace variable i by images[i] (a Poly over the target ring)."""
        assert len(images) == self.nvars
        tgt = images[0].nvars if images else 0
        out = Poly(tgt, ())
        for e, c in self.terms:
            term = constant(tgt, c)
            for i, k in enumerate(e):
                assert k >= 0, "cannot substitute into Laurent monomials"
                for _ in range(k):
                    term = term * images[i]
            out = out + term
        return out


def _poly_from_dict(nvars, acc) -> Poly:
    terms = tuple(sorted((e, c) for e, c in acc.items() if c != 0))
    if terms:
        tot = sum(terms[0][0])
        if any(sum(e) != tot for e, _ in terms):
            raise ValueError("polynomial is not homogeneous")
    return Poly(nvars, terms)


def poly(nvars, term_list) -> Poly:
    acc = {}
    for e, c in term_list:
        e = tuple(e)
        acc[e] = acc.get(e, Fraction(0)) + frac(c)
    return _poly_from_dict(nvars, acc)


def zero_poly(nvars) -> Poly:
    return Poly(nvars, ())


def constant(nvars, c) -> Poly:
    c = frac(c)
    if c == 0:
        return zero_poly(nvars)
    return Poly(nvars, (((0,) * nvars, c),))


def variable(nvars, i) -> Poly:
    e = [0] * nvars
    e[i] = 1
    return Poly(nvars, ((tuple(e), Fraction(1)),))


def linear(coeffs) -> Poly:
    coeffs = [frac(c) for c in coeffs]
    n = len(coeffs)
    acc = {}
    for i, c in enumerate(coeffs):
        if c != 0:
            e = [0] * n
            e[i] = 1
            acc[tuple(e)] = c
    return _poly_from_dict(n, acc)


def monomials(nvars, k):
    """Exponent tuples of total degree k, lexicographic, deterministic."""
    if k < 0:
        return []
    if nvars == 0:
        return [()] if k == 0 else []
    out = []

    def rec(prefix, rem, slots):
        if slots == 1:
            out.append(prefix + (rem,))
            return
        for v in range(rem, -1, -1):
            rec(prefix + (v,), rem - v, slots - 1)

    rec((), k, nvars)
    return out


# -- rings and ring maps -----------------------------------------------------

@dataclass(frozen=True)
class PolyRing:
    """Polynomial ring on the basis of an integer character lattice.

    generator_lattice rows record which character each variable stands
    for; variables all sit in degree -2.  Evaluation only needs the count,
    but ring maps are defined through the lattice data.
    """

    generator_lattice: tuple

    @property
    def nvars(self) -> int:
        return len(self.generator_lattice)

    def var_label(self, i) -> str:
        return "x%d" % (i + 1)


def poly_ring(vectors) -> PolyRing:
    return PolyRing(tuple(tuple(v) for v in vectors))


def rationals_ring() -> PolyRing:
    return PolyRing(())


@dataclass(frozen=True)
class RingMap:
    """Degree-preserving ring map sending each source variable to a linear
    form in the target variables."""

    src: PolyRing
    dst: PolyRing
    images: tuple  # one Fraction coefficient row per source variable

    def form_image(self, form):
        # push a linear form (coefficients over src vars) to the target
        out = [Fraction(0)] * self.dst.nvars
        for c, img in zip(form, self.images):
            c = frac(c)
            if c != 0:
                for j, x in enumerate(img):
                    out[j] += c * frac(x)
        return tuple(out)

    def poly_image(self, p: Poly) -> Poly:
        if self.src.nvars == 0:
            return constant(self.dst.nvars, _const_value(p))
        return p.substitute([linear(row) for row in self.images])


def _const_value(p: Poly):
    if p.is_zero:
        return 0
    assert p.terms[0][0] == ()
    return p.terms[0][1]


def ring_map(src: PolyRing, dst: PolyRing, images) -> RingMap:
    images = tuple(tuple(frac(x) for x in row) for row in images)
    if len(images) != src.nvars or any(len(r) != dst.nvars for r in images):
        raise ValueError("ring map images must be one target row per source variable")
    return RingMap(src, dst, images)


# -- Euler sets ---------------------------------------------------------------

@dataclass(frozen=True)
class ExplicitEulerSet:
    """Finite set of homogeneous elements, each factored into linear forms.

    An element is a tuple of linear-form coefficient rows; the empty tuple
    is a unit.  Zero factors are rejected on construction.
    """

    elements: tuple

    def lines(self):
        out = set()
        for el in self.elements:
            for f in el:
                out.add(_normalize_direction(f))
        return out


@dataclass(frozen=True)
class CanonicalEulerSet:
    """Invert every character of the component lattice outside a sublattice.

    avoid holds HNF rows (in ring-variable coordinates) of the characters
    that stay non-inverted; everything in the complement of the sublattice
    is inverted.
    """

    avoid: tuple

    def avoid_rows(self):
        return [list(r) for r in self.avoid]


def explicit_euler_set(elements) -> ExplicitEulerSet:
    norm = []
    for el in elements:
        fs = []
        for f in el:
            f = tuple(frac(x) for x in f)
            if all(x == 0 for x in f):
                raise ValueError("Euler set factors must be nonzero")
            fs.append(f)
        norm.append(tuple(fs))
    return ExplicitEulerSet(tuple(norm))


def canonical_euler_set(avoid_rows, nvars) -> CanonicalEulerSet:
    h = intmat.hnf([list(r) for r in avoid_rows], ncols=nvars)
    return CanonicalEulerSet(tuple(tuple(r) for r in h))


def _normalize_direction(form):
    form = [frac(x) for x in form]
    for x in form:
        if x != 0:
            return tuple(y / x for y in form)
    raise ValueError("cannot take the direction of the zero form")


def euler_set_equiv(e1, e2) -> bool:
    """Same localization: identical sets of inverted rational lines."""
    if isinstance(e1, ExplicitEulerSet) and isinstance(e2, ExplicitEulerSet):
        return e1.lines() == e2.lines()
    if isinstance(e1, CanonicalEulerSet) and isinstance(e2, CanonicalEulerSet):
        return _canonical_equiv(e1, e2)
    raise ValueError("cannot compare explicit and lattice-complement Euler sets")


def _lattice_content(rows) -> int:
    g = 0
    for r in rows:
        for x in r:
            g = intmat.xgcd(g, x)[0]
    return g


def _canonical_equiv(e1: CanonicalEulerSet, e2: CanonicalEulerSet) -> bool:
    # the non-inverted lines are the primitive vectors inside avoid; a
    # sublattice with content > 1 contains none, so all lines are inverted
    a1, a2 = e1.avoid_rows(), e2.avoid_rows()
    all1 = not a1 or _lattice_content(a1) > 1
    all2 = not a2 or _lattice_content(a2) > 1
    if all1 or all2:
        return all1 == all2
    return a1 == a2


# -- formal modules -----------------------------------------------------------

class FormalModule:
    pass


@dataclass(frozen=True)
class Free(FormalModule):
    ring: PolyRing
    shifts: tuple = (0,)


@dataclass(frozen=True)
class Shift(FormalModule):
    module: FormalModule
    n: int


@dataclass(frozen=True)
class Sum(FormalModule):
    parts: tuple


@dataclass(frozen=True)
class QuotientPresentation(FormalModule):
    """(R/forms)-free module on shifted generators, modulo relation rows.

    forms are linear ring-level relations (every generator is killed by
    them); rows are module relations (row_degree, entries per generator).
    """

    ring: PolyRing
    shifts: tuple = (0,)
    rows: tuple = ()
    forms: tuple = ()


@dataclass(frozen=True)
class Localize(FormalModule):
    module: FormalModule
    sets: tuple


@dataclass(frozen=True)
class TensorOver(FormalModule):
    rmap: RingMap
    module: FormalModule


@dataclass(frozen=True)
class IdempotentPiece(FormalModule):
    module: FormalModule
    keep: bool


def zero_module(ring: PolyRing) -> FormalModule:
    return Free(ring, ())


def free(ring: PolyRing, shifts=(0,)) -> FormalModule:
    return Free(ring, tuple(int(s) for s in shifts))


def quotient(ring, shifts=(0,), rows=(), forms=()) -> QuotientPresentation:
    norm_rows = []
    for rd, entries in rows:
        entries = tuple(entries)
        for j, p in enumerate(entries):
            # deg(entry_j) + shifts[j] = rd for every nonzero entry
            if not p.is_zero and p.degree + shifts[j] != rd:
                raise ValueError("relation row is not homogeneous")
        norm_rows.append((int(rd), entries))
    norm_forms = tuple(tuple(frac(x) for x in f) for f in forms)
    return QuotientPresentation(ring, tuple(int(s) for s in shifts), tuple(norm_rows), norm_forms)


def localize(module: FormalModule, *sets) -> FormalModule:
    return Localize(module, tuple(sets))


# -- normal form ---------------------------------------------------------------

@dataclass(frozen=True)
class Block:
    forms: tuple   # linear ring-level relations, Fraction rows over ring vars
    shifts: tuple  # generator degrees
    rows: tuple    # (row_degree, entries per generator)
    sets: tuple    # Euler sets applied to this block


@dataclass(frozen=True)
class NormalModule:
    ring: PolyRing
    blocks: tuple


def normal_form(m: FormalModule) -> NormalModule:
    if isinstance(m, Free):
        return NormalModule(m.ring, (Block((), tuple(m.shifts), (), ()),))
    if isinstance(m, QuotientPresentation):
        return NormalModule(m.ring, (Block(m.forms, m.shifts, m.rows, ()),))
    if isinstance(m, Shift):
        nm = normal_form(m.module)
        blocks = tuple(
            Block(
                b.forms,
                tuple(s + m.n for s in b.shifts),
                tuple((rd + m.n, entries) for rd, entries in b.rows),
                b.sets,
            )
            for b in nm.blocks
        )
        return NormalModule(nm.ring, blocks)
    if isinstance(m, Sum):
        if not m.parts:
            raise ValueError("empty sum needs an explicit ring; use zero_module")
        nms = [normal_form(p) for p in m.parts]
        ring = nms[0].ring
        if any(nm.ring != ring for nm in nms):
            raise ValueError("sum over mismatched rings")
        return NormalModule(ring, tuple(b for nm in nms for b in nm.blocks))
    if isinstance(m, Localize):
        nm = normal_form(m.module)
        blocks = tuple(
            Block(b.forms, b.shifts, b.rows, b.sets + tuple(m.sets)) for b in nm.blocks
        )
        return NormalModule(nm.ring, blocks)
    if isinstance(m, IdempotentPiece):
        nm = normal_form(m.module)
        return nm if m.keep else NormalModule(nm.ring, ())
    if isinstance(m, TensorOver):
        nm = normal_form(m.module)
        if nm.ring != m.rmap.src:
            raise ValueError("base change source ring mismatch")
        blocks = []
        for b in nm.blocks:
            if b.sets:
                raise ValueError("localization under base change is not supported")
            new_forms = tuple(m.rmap.form_image(f) for f in b.forms)
            new_rows = tuple(
                (rd, tuple(m.rmap.poly_image(p) for p in entries)) for rd, entries in b.rows
            )
            blocks.append(Block(new_forms, b.shifts, new_rows, ()))
        return NormalModule(m.rmap.dst, tuple(blocks))
    raise TypeError("unknown module node %r" % (m,))


# -- evaluation ----------------------------------------------------------------

class _Elimination:
    """Substitution killing a set of linear forms: pivot variables are
    rewritten in terms of the remaining free variables."""

    def __init__(self, forms, nvars):
        self.nvars = nvars
        rows, pivots = linalg.rref([list(f) for f in forms], nvars)
        self.pivots = pivots
        pivset = set(pivots)
        self.free_cols = [c for c in range(nvars) if c not in pivset]
        self.m = len(self.free_cols)
        col_of = {c: i for i, c in enumerate(self.free_cols)}
        self.images = []
        for v in range(nvars):
            if v in pivset:
                row = rows[pivots.index(v)]
                img = poly(
                    self.m,
                    [
                        (tuple(1 if k == col_of[c] else 0 for k in range(self.m)), -row[c])
                        for c in self.free_cols
                        if row[c] != 0
                    ],
                )
            else:
                img = variable(self.m, col_of[v])
            self.images.append(img)

    def poly_image(self, p: Poly) -> Poly:
        if self.nvars == 0:
            return p
        return p.substitute(self.images)

    def form_image(self, form):
        out = [Fraction(0)] * self.m
        for v, c in enumerate(form):
            c = frac(c)
            if c == 0:
                continue
            img = self.images[v]
            for e, x in img.terms:
                i = e.index(1)
                out[i] += c * x
        return tuple(out)


def _resolve_sets(block: Block, elim: _Elimination):
    """Status of the localization on this block: 'trivial', 'kill',
    'laurent' or 'infinite'."""
    nontrivial = False
    for s in block.sets:
        if isinstance(s, ExplicitEulerSet):
            for el in s.elements:
                for f in el:
                    img = elim.form_image(f)
                    if all(x == 0 for x in img):
                        return "kill"
                    nontrivial = True
        elif isinstance(s, CanonicalEulerSet):
            avoid = s.avoid_rows()
            if block.forms:
                int_rows = [_integer_direction(f) for f in block.forms]
                span = intmat.saturation(int_rows, elim.nvars)
                if not intmat.lattice_contains(avoid, span):
                    return "kill"
            full = intmat.hnf(intmat.identity(elim.nvars))
            if intmat.hnf([list(r) for r in avoid], elim.nvars) != full:
                nontrivial = True
        else:
            raise TypeError("unknown Euler set %r" % (s,))
    if not nontrivial:
        return "trivial"
    if elim.m == 1:
        return "laurent"
    if elim.m == 0:
        # every inverted element dies in the quotient ring
        return "kill"
    return "infinite"


def _integer_direction(form):
    den = 1
    for x in form:
        den = den * frac(x).denominator // intmat.xgcd(den, frac(x).denominator)[0]
    ints = [int(frac(x) * den) for x in form]
    g = 0
    for x in ints:
        g = intmat.xgcd(g, x)[0]
    if g > 1:
        ints = [x // g for x in ints]
    return ints


class BlockEval:
    def __init__(self, ring: PolyRing, block: Block):
        self.ring = ring
        self.block = block
        self.elim = _Elimination(block.forms, ring.nvars)
        self.status = _resolve_sets(block, self.elim)
        if not block.shifts:
            # a block with no generators is zero whatever the localization says
            self.status = "kill"
        self.laurent = self.status == "laurent"
        self.killed = self.status == "kill"
        self._rows = None
        self._basis_cache = {}
        self._reducer_cache = {}

    def _check_finite(self):
        if self.status == "infinite":
            raise NotLocallyFinite(
                "localization over %d effective variables has infinite graded pieces"
                % self.elim.m
            )

    def rows(self):
        if self._rows is None:
            self._rows = [
                (rd, [self.elim.poly_image(p) for p in entries])
                for rd, entries in self.block.rows
            ]
        return self._rows

    def basis(self, d):
        """Raw monomial basis at degree d: list of (gen index, exponents)."""
        self._check_finite()
        if self.killed:
            return []
        if d in self._basis_cache:
            return self._basis_cache[d]
        out = []
        for j, s in enumerate(self.block.shifts):
            k2 = s - d
            if k2 % 2 != 0:
                continue
            k = k2 // 2
            if self.laurent:
                out.append((j, (k,)))
            else:
                for e in monomials(self.elim.m, k):
                    out.append((j, e))
        self._basis_cache[d] = out
        return out

    def reducer(self, d) -> CosetReducer:
        if d in self._reducer_cache:
            return self._reducer_cache[d]
        basis = self.basis(d)
        index = {be: i for i, be in enumerate(basis)}
        rels = []
        for rd, entries in self.rows():
            k2 = rd - d
            if k2 % 2 != 0:
                continue
            k = k2 // 2
            mus = [(k,)] if self.laurent else [tuple(e) for e in monomials(self.elim.m, k)]
            for mu in mus:
                vec = [Fraction(0)] * len(basis)
                for j, p in enumerate(entries):
                    for e, c in p.terms:
                        vec[index[(j, tuple(a + b for a, b in zip(mu, e)))]] += c
                if any(x != 0 for x in vec):
                    rels.append(vec)
        red = CosetReducer(rels, len(basis))
        self._reducer_cache[d] = red
        return red

    def dim(self, d) -> int:
        return self.reducer(d).dim

    def labels(self, d):
        basis = self.basis(d)
        red = self.reducer(d)
        out = []
        for c in red.free_cols:
            j, e = basis[c]
            out.append("%s*e%d" % (self._mono_label(e), j))
        return out

    def _mono_label(self, e):
        if not e or all(x == 0 for x in e):
            return "1"
        parts = []
        for i, k in enumerate(e):
            if k == 0:
                continue
            v = self.ring.var_label(self.elim.free_cols[i]) if self.elim.m else "x"
            parts.append(v if k == 1 else "%s^%d" % (v, k))
        return "*".join(parts)

    def expand(self, d, j, p: Poly):
        """Coordinates of p * e_j in the raw basis at degree d."""
        basis = self.basis(d)
        index = {be: i for i, be in enumerate(basis)}
        vec = [Fraction(0)] * len(basis)
        for e, c in p.terms:
            key = (j, e)
            if key in index:
                vec[index[key]] += c
        return vec


@dataclass
class EvaluatedModule:
    ring: PolyRing
    evals: list

    def dim(self, d) -> int:
        return sum(ev.dim(d) for ev in self.evals)

    def labels(self, d):
        out = []
        for bi, ev in enumerate(self.evals):
            out.extend("b%d:%s" % (bi, s) for s in ev.labels(d))
        return out


def evaluator(m: FormalModule) -> EvaluatedModule:
    nm = normal_form(m)
    return EvaluatedModule(nm.ring, [BlockEval(nm.ring, b) for b in nm.blocks])


# -- results -------------------------------------------------------------------

@dataclass
class HomologyResult:
    window: tuple
    entries: dict  # degree -> list of {"component", "dimension", "basis"}

    def _check(self, d):
        a, b = self.window
        if not (a <= d <= b):
            raise ValueError("degree %d outside window [%d, %d]" % (d, a, b))

    def dimension(self, d, component=None) -> int:
        self._check(d)
        return sum(
            e["dimension"]
            for e in self.entries.get(d, [])
            if component is None or e["component"] == component
        )

    def basis(self, d):
        self._check(d)
        out = []
        for e in self.entries.get(d, []):
            out.extend(e["basis"])
        return out

    def components(self):
        labels = []
        for es in self.entries.values():
            for e in es:
                if e["component"] not in labels:
                    labels.append(e["component"])
        return labels

    def to_json(self):
        return {
            "window": list(self.window),
            "degrees": {
                str(d): [
                    {
                        "component": e["component"],
                        "dimension": e["dimension"],
                        "basis": list(e["basis"]),
                    }
                    for e in self.entries.get(d, [])
                ]
                for d in range(self.window[0], self.window[1] + 1)
            },
        }


def merge_results(results) -> HomologyResult:
    if not results:
        raise ValueError("nothing to merge")
    window = results[0].window
    if any(r.window != window for r in results):
        raise ValueError("window mismatch in merge")
    entries = {}
    for r in results:
        for d, es in r.entries.items():
            entries.setdefault(d, []).extend(es)
    return HomologyResult(window, entries)


def _validate_window(window):
    a, b = int(window[0]), int(window[1])
    if a > b:
        raise ValueError("empty degree window")
    return a, b


def evaluate_degrees(m: FormalModule, window, component="0") -> HomologyResult:
    a, b = _validate_window(window)
    ev = evaluator(m)
    entries = {}
    for d in range(a, b + 1):
        entries[d] = [
            {"component": component, "dimension": ev.dim(d), "basis": tuple(ev.labels(d))}
        ]
    return HomologyResult((a, b), entries)


# -- complexes -----------------------------------------------------------------

class ComplexExpr:
    pass


@dataclass(frozen=True)
class ModuleComplex(ComplexExpr):
    """A module regarded as a complex with zero differential in degree 0."""

    module: FormalModule


@dataclass(frozen=True)
class KoszulComplex(ComplexExpr):
    """Tensor product of two-term complexes (shifted base --x_i--> base).

    Term s sits in complex degree s; its summands are indexed by the
    s-element subsets of the elements.  shift adds to every total degree;
    sets localize every term.
    """

    base: FormalModule
    elements: tuple
    shift: int = 0
    sets: tuple = ()


def koszul(ring: PolyRing, elements, base: Optional[FormalModule] = None) -> KoszulComplex:
    els = []
    for x in elements:
        if not isinstance(x, Poly):
            x = linear([frac(c) for c in x])
        if x.nvars != ring.nvars:
            raise ValueError("element over the wrong ring")
        if x.degree is not None and x.degree % 2 != 0:
            raise ValueError("elements must be homogeneous of even degree")
        els.append(x)
    if base is None:
        base = Free(ring, (0,))
    return KoszulComplex(base, tuple(els), 0, ())


def shift_complex(c: ComplexExpr, n: int) -> ComplexExpr:
    if isinstance(c, ModuleComplex):
        return ModuleComplex(Shift(c.module, n))
    if isinstance(c, KoszulComplex):
        return KoszulComplex(c.base, c.elements, c.shift + n, c.sets)
    raise TypeError("cannot shift %r" % (c,))


def localize_complex(c: ComplexExpr, *sets) -> ComplexExpr:
    if isinstance(c, ModuleComplex):
        return ModuleComplex(Localize(c.module, tuple(sets)))
    if isinstance(c, KoszulComplex):
        return KoszulComplex(c.base, c.elements, c.shift, c.sets + tuple(sets))
    raise TypeError("cannot localize %r" % (c,))


def _subsets(n, k):
    out = []

    def rec(start, chosen):
        if len(chosen) == k:
            out.append(tuple(chosen))
            return
        for i in range(start, n):
            chosen.append(i)
            rec(i + 1, chosen)
            chosen.pop()

    rec(0, [])
    return out


class _KoszulEval:
    """Per-degree matrices of a Koszul complex over a one-block base."""

    def __init__(self, kc: KoszulComplex):
        self.kc = kc
        nm = normal_form(kc.base)
        if len(nm.blocks) != 1:
            raise ValueError("Koszul base must normalize to a single block")
        self.ring = nm.ring
        base = nm.blocks[0]
        if any(x.degree is None for x in kc.elements):
            raise ValueError("Koszul over the zero element is not defined")
        self.eldeg = [x.degree for x in kc.elements]
        n = len(kc.elements)
        self.terms = []
        for s in range(n + 1):
            subs = _subsets(n, s)
            shifts = []
            rows = []
            for sub in subs:
                off = kc.shift + sum(self.eldeg[i] for i in sub)
                for g in base.shifts:
                    shifts.append(g + off)
                for rd, entries in base.rows:
                    padded = []
                    for sub2 in subs:
                        for j in range(len(base.shifts)):
                            padded.append(entries[j] if sub2 == sub else zero_poly(self.ring.nvars))
                    rows.append((rd + off, tuple(padded)))
            block = Block(base.forms, tuple(shifts), tuple(rows), tuple(kc.sets))
            self.terms.append((subs, BlockEval(self.ring, block)))
        self.base_gen_count = len(base.shifts)

    def term_eval(self, s) -> BlockEval:
        return self.terms[s][1]

    def diff_entries(self, s):
        """Poly matrix of d: term s -> term s-1 over block generators."""
        subs_src, _ = self.terms[s]
        subs_dst, _ = self.terms[s - 1]
        dst_index = {sub: i for i, sub in enumerate(subs_dst)}
        g = self.base_gen_count
        n_src = len(subs_src) * g
        n_dst = len(subs_dst) * g
        mat = [[zero_poly(self.ring.nvars) for _ in range(n_src)] for _ in range(n_dst)]
        for a, sub in enumerate(subs_src):
            for pos, i in enumerate(sub):
                rest = tuple(x for x in sub if x != i)
                b = dst_index[rest]
                sign = -1 if pos % 2 else 1
                entry = self.kc.elements[i].scale(sign)
                for j in range(g):
                    mat[b * g + j][a * g + j] = entry
        return mat


def _block_map_matrix(src: BlockEval, dst: BlockEval, entries, d):
    """Matrix of a degree-preserving map between reduced degree-d pieces."""
    src_red = src.reducer(d)
    dst_red = dst.reducer(d)
    src_basis = src.basis(d)
    cols = []
    for c in src_red.free_cols:
        j, mu = src_basis[c]
        image = [Fraction(0)] * len(dst.basis(d))
        for i in range(len(dst.block.shifts)):
            p = entries[i][j]
            if p.is_zero:
                continue
            contrib = dst.expand(d, i, _mono_times(mu, p))
            image = [a + b for a, b in zip(image, contrib)]
        cols.append(dst_red.reduce(image))
    return [[cols[c][r] for c in range(len(cols))] for r in range(dst_red.dim)]


def _mono_times(mu, p: Poly) -> Poly:
    return Poly(p.nvars, tuple((tuple(a + b for a, b in zip(mu, e)), c) for e, c in p.terms))


def homology(c: ComplexExpr, window, component="0") -> HomologyResult:
    a, b = _validate_window(window)
    if isinstance(c, ModuleComplex):
        return evaluate_degrees(c.module, (a, b), component)
    if isinstance(c, DegreewiseComplex):
        return c.homology((a, b), component)
    if not isinstance(c, KoszulComplex):
        raise TypeError("unknown complex %r" % (c,))
    ke = _KoszulEval(c)
    n = len(c.elements)
    evs = [ke.term_eval(s) for s in range(n + 1)]
    diffs = {s: [[e2 for e2 in row] for row in ke.diff_entries(s)] for s in range(1, n + 1)}

    def total_basis_dims(t):
        return [evs[s].dim(t - s) for s in range(n + 1)]

    def total_matrix(t):
        # d : X_t -> X_{t-1}; block from term s (internal t-s) to term s-1
        src_dims = total_basis_dims(t)
        dst_dims = [evs[s].dim(t - 1 - s) for s in range(n + 1)]
        rows = sum(dst_dims)
        cols = sum(src_dims)
        mat = [[Fraction(0)] * cols for _ in range(rows)]
        col0 = 0
        for s in range(n + 1):
            if src_dims[s] == 0:
                col0 += src_dims[s]
                continue
            if s >= 1 and dst_dims[s - 1] > 0:
                sub = _block_map_matrix(evs[s], evs[s - 1], diffs[s], t - s)
                row0 = sum(dst_dims[:s - 1])
                for i in range(len(sub)):
                    for j in range(len(sub[0]) if sub else 0):
                        mat[row0 + i][col0 + j] = sub[i][j]
            col0 += src_dims[s]
        return mat

    entries = {}
    mats = {}
    for t in range(a, b + 2):
        mats[t] = total_matrix(t)
    for t in range(a, b + 1):
        dim_t = sum(total_basis_dims(t))
        d_out = mats[t]
        d_in = mats[t + 1]
        if d_out and d_in and d_in[0]:
            comp = linalg.mat_mul(d_out, d_in)
            assert linalg.is_zero_matrix(comp), "differential does not square to zero"
        h = dim_t - linalg.rank(d_out) - linalg.rank(d_in)
        entries[t] = [
            {
                "component": component,
                "dimension": h,
                "basis": tuple("class%d" % i for i in range(h)),
            }
        ]
    return HomologyResult((a, b), entries)


@dataclass
class DegreewiseComplex(ComplexExpr):
    """Explicit per-degree chain complex: dims and matrices d_t: X_t -> X_{t-1}.

    Used when a complex is assembled from evaluated diagram data rather
    than from symbolic polynomials.  Matrices outside the stored window are
    treated as maps to/from zero only if the adjacent dimension is zero.
    """

    window: tuple
    dims: dict
    mats: dict

    def homology(self, window, component="0") -> HomologyResult:
        a, b = _validate_window(window)
        if a < self.window[0] or b > self.window[1]:
            raise ValueError("window exceeds stored data")
        entries = {}
        for t in range(a, b + 1):
            d_out = self.mats.get(t, [])
            d_in = self.mats.get(t + 1, [])
            dim_t = self.dims.get(t, 0)
            if d_out and d_in and d_in[0]:
                comp = linalg.mat_mul(d_out, d_in)
                assert linalg.is_zero_matrix(comp), "differential does not square to zero"
            h = dim_t - linalg.rank(d_out) - linalg.rank(d_in)
            entries[t] = [
                {
                    "component": component,
                    "dimension": h,
                    "basis": tuple("class%d" % i for i in range(h)),
                }
            ]
        return HomologyResult((a, b), entries)


def localize_exactness_rewrite(c: ComplexExpr) -> ComplexExpr:
    """Rewrite E^{-1}C using exactness of localization: H(E^{-1}C) = E^{-1}H(C).

    Sound outputs only; anything unrecognized is returned unchanged (the
    caller will then hit NotLocallyFinite honestly on evaluation).
    """
    if isinstance(c, ModuleComplex):
        return c
    if not isinstance(c, KoszulComplex):
        return c
    if not c.sets:
        return c
    nm = normal_form(c.base)
    if len(nm.blocks) != 1:
        return c
    base = nm.blocks[0]
    probe = BlockEval(nm.ring, Block(base.forms, base.shifts, base.rows, tuple(c.sets)))
    if probe.killed:
        return ModuleComplex(zero_module(nm.ring))
    if probe.status == "trivial":
        # the localization is the identity on this block
        return KoszulComplex(c.base, c.elements, c.shift, ())
    if not c.elements:
        return ModuleComplex(Localize(Shift(c.base, c.shift), tuple(c.sets)))
    # regular-sequence recognition: independent linear forms over a free
    # quotient base have vanishing higher Koszul homology, so the complex
    # collapses onto the localized quotient in complex degree 0
    if base.rows:
        return c
    if any(x.degree != -2 for x in c.elements):
        return c
    elim = _Elimination(base.forms, nm.ring.nvars)
    imgs = [list(elim.form_image(_linear_coeffs(x))) for x in c.elements]
    if linalg.rank(imgs) != len(c.elements):
        return c
    q = QuotientPresentation(
        nm.ring,
        base.shifts,
        (),
        base.forms + tuple(tuple(_linear_coeffs(x)) for x in c.elements),
    )
    return ModuleComplex(Localize(Shift(q, c.shift), tuple(c.sets)))


def _linear_coeffs(p: Poly):
    out = [Fraction(0)] * p.nvars
    for e, c in p.terms:
        i = e.index(1)
        out[i] = c
    return out


# -- graded Hom ----------------------------------------------------------------

def _free_shifts(x: FormalModule):
    if isinstance(x, Free):
        return list(x.shifts)
    if isinstance(x, Shift):
        return [s + x.n for s in _free_shifts(x.module)]
    if isinstance(x, Sum):
        out = []
        for p in x.parts:
            out.extend(_free_shifts(p))
        return out
    raise ValueError("hom_window source must be built from Free/Shift/Sum")


def hom_window(x: FormalModule, y: FormalModule, window, component="0") -> HomologyResult:
    a, b = _validate_window(window)
    shifts = _free_shifts(x)
    ev = evaluator(y)
    entries = {}
    for d in range(a, b + 1):
        dim = 0
        basis = []
        for j, s in enumerate(shifts):
            dy = ev.dim(s + d)
            dim += dy
            basis.extend("e%d->%s" % (j, lbl) for lbl in ev.labels(s + d))
        entries[d] = [{"component": component, "dimension": dim, "basis": tuple(basis)}]
    return HomologyResult((a, b), entries)


# -- JSON ------------------------------------------------------------------------

def frac_to_json(x) -> str:
    x = frac(x)
    if x.denominator == 1:
        return str(x.numerator)
    return "%d/%d" % (x.numerator, x.denominator)


def frac_from_json(s) -> Fraction:
    if isinstance(s, int):
        return Fraction(s)
    if isinstance(s, str):
        return Fraction(s)
    raise ValueError("rationals must be integers or 'p/q' strings")


def ring_to_json(r: PolyRing) -> dict:
    return {"generators": [list(v) for v in r.generator_lattice]}


def ring_from_json(obj) -> PolyRing:
    return poly_ring(obj["generators"])


def poly_to_json(p: Poly):
    return [{"exps": list(e), "coeff": frac_to_json(c)} for e, c in p.terms]


def poly_from_json(obj, nvars) -> Poly:
    return poly(nvars, [(tuple(t["exps"]), frac_from_json(t["coeff"])) for t in obj])


def euler_set_to_json(s) -> dict:
    if isinstance(s, ExplicitEulerSet):
        return {
            "kind": "explicit",
            "elements": [[list(map(frac_to_json, f)) for f in el] for el in s.elements],
        }
    if isinstance(s, CanonicalEulerSet):
        return {"kind": "canonical", "avoid": [list(r) for r in s.avoid]}
    raise TypeError


def euler_set_from_json(obj, nvars):
    if obj["kind"] == "explicit":
        return explicit_euler_set(
            [[tuple(frac_from_json(x) for x in f) for f in el] for el in obj["elements"]]
        )
    if obj["kind"] == "canonical":
        return canonical_euler_set(obj["avoid"], nvars)
    raise ValueError("unknown Euler set kind %r" % (obj.get("kind"),))


def module_to_json(m: FormalModule) -> dict:
    if isinstance(m, Free):
        return {"op": "free", "ring": ring_to_json(m.ring), "shifts": list(m.shifts)}
    if isinstance(m, Shift):
        return {"op": "shift", "n": m.n, "module": module_to_json(m.module)}
    if isinstance(m, Sum):
        return {"op": "sum", "parts": [module_to_json(p) for p in m.parts]}
    if isinstance(m, QuotientPresentation):
        return {
            "op": "quotient",
            "ring": ring_to_json(m.ring),
            "shifts": list(m.shifts),
            "rows": [
                {"degree": rd, "entries": [poly_to_json(p) for p in entries]}
                for rd, entries in m.rows
            ],
            "forms": [[frac_to_json(x) for x in f] for f in m.forms],
        }
    if isinstance(m, Localize):
        return {
            "op": "localize",
            "sets": [euler_set_to_json(s) for s in m.sets],
            "module": module_to_json(m.module),
        }
    if isinstance(m, TensorOver):
        return {
            "op": "tensor",
            "map": {
                "src": ring_to_json(m.rmap.src),
                "dst": ring_to_json(m.rmap.dst),
                "images": [[frac_to_json(x) for x in row] for row in m.rmap.images],
            },
            "module": module_to_json(m.module),
        }
    if isinstance(m, IdempotentPiece):
        return {"op": "idempotent", "keep": m.keep, "module": module_to_json(m.module)}
    raise TypeError("cannot serialize %r" % (m,))


def module_from_json(obj) -> FormalModule:
    op = obj.get("op")
    if op == "free":
        return Free(ring_from_json(obj["ring"]), tuple(obj["shifts"]))
    if op == "shift":
        return Shift(module_from_json(obj["module"]), obj["n"])
    if op == "sum":
        return Sum(tuple(module_from_json(p) for p in obj["parts"]))
    if op == "quotient":
        ring = ring_from_json(obj["ring"])
        rows = tuple(
            (r["degree"], tuple(poly_from_json(p, ring.nvars) for p in r["entries"]))
            for r in obj["rows"]
        )
        forms = tuple(tuple(frac_from_json(x) for x in f) for f in obj["forms"])
        return QuotientPresentation(ring, tuple(obj["shifts"]), rows, forms)
    if op == "localize":
        mod = module_from_json(obj["module"])
        ring = module_ring(mod)
        sets = tuple(euler_set_from_json(s, ring.nvars) for s in obj["sets"])
        return Localize(mod, sets)
    if op == "tensor":
        src = ring_from_json(obj["map"]["src"])
        dst = ring_from_json(obj["map"]["dst"])
        images = [[frac_from_json(x) for x in row] for row in obj["map"]["images"]]
        return TensorOver(ring_map(src, dst, images), module_from_json(obj["module"]))
    if op == "idempotent":
        return IdempotentPiece(module_from_json(obj["module"]), bool(obj["keep"]))
    raise ValueError("unknown module op %r" % (op,))


def complex_to_json(c: ComplexExpr) -> dict:
    if isinstance(c, ModuleComplex):
        return {"op": "module", "module": module_to_json(c.module)}
    if isinstance(c, KoszulComplex):
        return {
            "op": "koszul",
            "base": module_to_json(c.base),
            "elements": [poly_to_json(x) for x in c.elements],
            "shift": c.shift,
            "sets": [euler_set_to_json(s) for s in c.sets],
        }
    raise TypeError("cannot serialize %r" % (c,))


def complex_from_json(obj) -> ComplexExpr:
    op = obj.get("op")
    if op == "module":
        return ModuleComplex(module_from_json(obj["module"]))
    if op == "koszul":
        base = module_from_json(obj["base"])
        ring = module_ring(base)
        els = tuple(poly_from_json(p, ring.nvars) for p in obj["elements"])
        sets = tuple(euler_set_from_json(s, ring.nvars) for s in obj["sets"])
        return KoszulComplex(base, els, obj.get("shift", 0), sets)
    raise ValueError("unknown complex op %r" % (op,))


def module_ring(m: FormalModule) -> PolyRing:
    if isinstance(m, (Free, QuotientPresentation)):
        return m.ring
    if isinstance(m, Shift):
        return module_ring(m.module)
    if isinstance(m, Sum):
        return module_ring(m.parts[0])
    if isinstance(m, Localize):
        return module_ring(m.module)
    if isinstance(m, TensorOver):
        return m.rmap.dst
    if isinstance(m, IdempotentPiece):
        return module_ring(m.module)
    raise TypeError
