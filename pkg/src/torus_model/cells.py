"""Basic cells and the calculus of maps out of them.

A closed subgroup K determines a basic cell: the idempotent piece of the
structure sheaf supported on the members inside K, tensored with the
Koszul complex on the codimension-many linear forms cutting K out, and
shifted by that codimension.  The cell is small enough that its homology
has a closed form, and maps out of it read off homotopy of diagram
modules one degree at a time.  This module builds the flat cell models,
verifies the closed form against them, and evaluates the mapping-out
calculus: homotopy tables, the tensor-with-a-cell identity, support
dimension, and the cellular-equivalence criterion.

Maps out of a cell are computed at the homotopy-category level.  The cell
value at a sampled level is replaced by its localization-free generator
layout, which is legitimate exactly because module values at that level
are already local; the node-wise mapping complexes are then tied together
as the equalizer over the localization edges of the diagram.
"""

from dataclasses import dataclass
from fractions import Fraction
from math import comb

from . import intmat, linalg
from .diagrams import (
    DiagramModule,
    _MapEval,
    _first_noniso,
    _identity_images,
    _normalize_images,
    module_generators,
)
from .graded import (
    HomologyResult,
    KoszulComplex,
    ModuleComplex,
    NotLocallyFinite,
    Poly,
    _subsets,
    _validate_window,
    evaluator,
    free,
    homology,
    linear,
    localize,
    localize_exactness_rewrite,
    quotient,
    zero_module,
)
from .lattice_groups import (
    ClosedSubgroup,
    contains,
    identity_component,
    intersection,
    is_cotoral,
    join,
    subgroup_sort_key,
    subgroup_to_json,
)
from .structure_rings import FiniteFamily, canonical_component_set, member_ring


# -- cell models and their homology ------------------------------------------------

@dataclass(frozen=True)
class CellModel:
    """Flat Koszul model of the basic cell of one closed subgroup.

    kept indexes the base-family members inside the subgroup; elements
    holds, per kept member, the linear forms cutting the subgroup out in
    that member's coordinates.  values carries one complex per member at
    every sampled level: the localized Koszul complex on the cotoral
    locus and zero off it.  Structure maps between levels are the
    canonical localization ones and are not stored.
    """

    subgroup: ClosedSubgroup
    family: FiniteFamily
    kept: tuple
    elements: dict
    values: dict

    def value(self, level):
        if level not in self.values:
            raise ValueError("level %r is not sampled" % (level,))
        return self.values[level]


@dataclass(frozen=True)
class CellHomologyFormula:
    """Closed form of the cell homology at one level, one module per member.

    Nonzero only when the level sits inside the subgroup: the localized
    quotient by the forms cutting the subgroup out, shifted by its
    codimension.  The structure-ring action is the untwisted one through
    the restriction map.
    """

    subgroup: ClosedSubgroup
    level: ClosedSubgroup
    modules: tuple


def _base_family(families):
    for l, fam in families.items():
        if l.is_trivial:
            return l, fam
    raise ValueError("no family of finite subgroups at the trivial level")


def _koszul_forms(k, f):
    # integer coordinates of the forms cutting out k, in the HNF basis at f
    amb = f.annihilator_rows()
    out = []
    for row in k.annihilator:
        c = intmat.hnf_solve(amb, list(row))
        if c is None:
            raise ValueError("forms of %r do not restrict to the member %r" % (k, f))
        out.append(tuple(c))
    return tuple(out)


def flat_cell(k: ClosedSubgroup, families) -> CellModel:
    """Flat model of the basic cell of k over the sampled levels.

    The identity component of k must be a sampled level and k a member of
    its family; the base family fixes which members carry the retract.
    """
    _, base = _base_family(families)
    k1 = identity_component(k)
    if k1 not in families or k not in families[k1].members:
        raise ValueError("missing family at level %r" % (k1,))
    kept = tuple(i for i, f in enumerate(base.members) if contains(k, f))
    elements = {
        i: tuple(linear(c) for c in _koszul_forms(k, base.members[i])) for i in kept
    }
    values = {}
    for l in families:
        vals = []
        for i, f in enumerate(base.members):
            if i in elements and is_cotoral(l, k1):
                vals.append(
                    KoszulComplex(
                        free(member_ring(f)),
                        elements[i],
                        shift=k.codimension,
                        sets=(canonical_component_set(l, f),),
                    )
                )
            else:
                vals.append(ModuleComplex(zero_module(member_ring(f))))
        values[l] = tuple(vals)
    return CellModel(k, base, kept, elements, values)


def cell_homology(k: ClosedSubgroup, l: ClosedSubgroup, families) -> CellHomologyFormula:
    """Closed form for the homology of the basic cell of k at the level l.

    Zero unless l sits inside k; on the members inside k the value is the
    localized shifted quotient by the forms cutting k out, which packages
    the product of the cohomology rings of the intermediate quotients.
    """
    if not l.is_connected:
        raise ValueError("cell homology is read at connected subgroups")
    _, base = _base_family(families)
    on = contains(k, l)
    mods = []
    for f in base.members:
        r = member_ring(f)
        if on and contains(k, f):
            m = quotient(r, shifts=(k.codimension,), forms=_koszul_forms(k, f))
            mods.append(localize(m, canonical_component_set(l, f)))
        else:
            mods.append(zero_module(r))
    return CellHomologyFormula(k, l, tuple(mods))


# -- verification of the closed form ----------------------------------------------

@dataclass(frozen=True)
class CellCheck:
    level: ClosedSubgroup
    member: ClosedSubgroup
    verdict: str  # "match", "mismatch", "not-locally-finite"
    model_dims: tuple
    formula_dims: tuple


@dataclass(frozen=True)
class CellReport:
    subgroup: ClosedSubgroup
    window: tuple
    checks: tuple

    @property
    def ok(self) -> bool:
        return all(c.verdict != "mismatch" for c in self.checks)

    def to_json(self):
        return {
            "subgroup": subgroup_to_json(self.subgroup),
            "window": list(self.window),
            "ok": self.ok,
            "checks": [
                {
                    "level": subgroup_to_json(c.level),
                    "member": subgroup_to_json(c.member),
                    "verdict": c.verdict,
                    "model": list(c.model_dims),
                    "formula": list(c.formula_dims),
                }
                for c in self.checks
            ],
        }


def verify_cell_homology(k: ClosedSubgroup, window, families) -> CellReport:
    """Compare the flat model's homology with the closed form, per degree,
    per sampled level and member.

    Positions whose graded pieces are not locally finite are reported as
    such rather than compared; an empty window passes vacuously.
    """
    a, b = int(window[0]), int(window[1])
    if a > b:
        return CellReport(k, (a, b), ())
    cell = flat_cell(k, families)
    checks = []
    for l in sorted(cell.values, key=subgroup_sort_key):
        formula = cell_homology(k, l, families)
        for i, f in enumerate(cell.family.members):
            c = cell.values[l][i]
            if k.rank >= 2:
                c = localize_exactness_rewrite(c)
            try:
                model = homology(c, (a, b))
                mdims = tuple(model.dimension(d) for d in range(a, b + 1))
                ev = evaluator(formula.modules[i])
                fdims = tuple(ev.dim(d) for d in range(a, b + 1))
            except NotLocallyFinite:
                checks.append(CellCheck(l, f, "not-locally-finite", (), ()))
                continue
            verdict = "match" if mdims == fdims else "mismatch"
            checks.append(CellCheck(l, f, verdict, mdims, fdims))
    return CellReport(k, (a, b), tuple(checks))


# -- multiplication matrices -------------------------------------------------------

def _mult_matrix(emod, p: Poly, d: int):
    """Matrix of multiplication by p from degree d to d + deg p, in the
    reduced bases of an evaluated module, block-diagonal over its blocks."""
    d2 = d + p.degree
    blocks = []
    for ev in emod.evals:
        if ev.killed:
            blocks.append((0, []))
            continue
        red = ev.reducer(d)
        red2 = ev.reducer(d2)
        cols = []
        if red.free_cols:
            basis = ev.basis(d)
            basis2 = ev.basis(d2)
            index = {be: i for i, be in enumerate(basis2)}
            pr = ev.elim.poly_image(p)
            for c in red.free_cols:
                j, e = basis[c]
                raw = [Fraction(0)] * len(basis2)
                for e2, coeff in pr.terms:
                    key = (j, tuple(x + y for x, y in zip(e, e2)))
                    pos = index.get(key)
                    if pos is not None:
                        raw[pos] += coeff
                cols.append(red2.reduce(raw))
        blocks.append((red2.dim, cols))
    nrows = sum(rd for rd, _ in blocks)
    ncols = sum(len(cs) for _, cs in blocks)
    mat = [[Fraction(0)] * ncols for _ in range(nrows)]
    r0 = 0
    c0 = 0
    for rd, cs in blocks:
        for ci, col in enumerate(cs):
            for ri, x in enumerate(col):
                if x:
                    mat[r0 + ri][c0 + ci] = x
        r0 += rd
        c0 += len(cs)
    return mat


# -- node-wise mapping complexes ---------------------------------------------------

class _NodeHom:
    """Complex of generator assignments from a cell into one node's values.

    A generator is (member, subset of the cell forms, subset of the twist
    forms); its degree offset combines the cell shift with the Koszul
    term.  The value of a map on a generator lives in the member value at
    offset plus map degree.  The differential precomposes with the cell
    differential and, when a twist cell is present, postcomposes with the
    twist's Koszul differential; the usual sign rule keeps the square
    zero.
    """

    def __init__(self, cell: CellModel, values, twist=None):
        self.cell = cell
        self.twist = twist
        nk = cell.subgroup.codimension
        nl = twist.subgroup.codimension if twist is not None else 0
        self.members = tuple(
            i for i in cell.kept if twist is None or i in twist.kept
        )
        self.evs = {i: evaluator(values[i]) for i in self.members}
        self.gens = []
        for i in self.members:
            for s in range(nk + 1):
                for sub in _subsets(nk, s):
                    for s2 in range(nl + 1):
                        for sub2 in _subsets(nl, s2):
                            self.gens.append((i, sub, sub2))
        self.gen_index = {g: gi for gi, g in enumerate(self.gens)}
        # degree offset: cell shift minus Koszul depth, twist term added back
        self.goff = tuple(
            nk - len(sub) + len(sub2) - nl for (_, sub, sub2) in self.gens
        )
        self._dims = {}
        self._mults = {}

    def dims(self, d):
        if d not in self._dims:
            self._dims[d] = tuple(
                self.evs[g[0]].dim(self.goff[gi] + d) for gi, g in enumerate(self.gens)
            )
        return self._dims[d]

    def offsets(self, d):
        out = [0]
        for x in self.dims(d):
            out.append(out[-1] + x)
        return out

    def dim(self, d):
        return self.offsets(d)[-1]

    def _mult(self, i, p, d):
        key = (i, p, d)
        if key not in self._mults:
            self._mults[key] = _mult_matrix(self.evs[i], p, d)
        return self._mults[key]

    def diff(self, d):
        """Matrix of the mapping-complex differential from degree d to d - 1."""
        roff = self.offsets(d - 1)
        coff = self.offsets(d)
        mat = [[Fraction(0)] * coff[-1] for _ in range(roff[-1])]
        eps = 1 if d % 2 == 0 else -1

        def insert(ri, ci, block, coef):
            r0 = roff[ri]
            c0 = coff[ci]
            for r, row in enumerate(block):
                for c, x in enumerate(row):
                    if x:
                        mat[r0 + r][c0 + c] = coef * x

        for gi, (i, sub, sub2) in enumerate(self.gens):
            # precomposition with the cell differential
            for pos, a in enumerate(sub):
                src = (i, sub[:pos] + sub[pos + 1:], sub2)
                ci = self.gen_index[src]
                p = self.cell.elements[i][a]
                block = self._mult(i, p, self.goff[ci] + d)
                sign = -eps * (1 if pos % 2 == 0 else -1)
                insert(gi, ci, block, sign)
            # postcomposition with the twist differential
            if self.twist is not None:
                nl = self.twist.subgroup.codimension
                for b in range(nl):
                    if b in sub2:
                        continue
                    merged = tuple(sorted(sub2 + (b,)))
                    src = (i, sub, merged)
                    ci = self.gen_index[src]
                    p = self.twist.elements[i][b]
                    block = self._mult(i, p, self.goff[ci] + d)
                    sign = 1 if merged.index(b) % 2 == 0 else -1
                    insert(gi, ci, block, sign)
        return mat


def _coords_in(basis_vectors, vec):
    if not basis_vectors:
        if any(x != 0 for x in vec):
            raise ValueError("differential leaves the equalizer")
        return []
    rows = [[bv[r] for bv in basis_vectors] for r in range(len(vec))]
    sol = linalg.solve(rows, vec)
    if sol is None:
        raise ValueError("differential leaves the equalizer")
    return sol


class _HomEvaluation:
    """Node-wise mapping complexes tied together along localization edges.

    A global map out of the cell is a family of node-wise assignments at
    the base level, equalized over the edges between base-level nodes.
    Kernels of the constraint matrices carry the restricted differential;
    homology is computed in those coordinates.
    """

    def __init__(self, M: DiagramModule, cell: CellModel, twist=None):
        diagram = M.diagram
        tlevels = [l for l, _ in diagram.levels if l.is_trivial]
        if not tlevels:
            raise ValueError("module diagram misses the base level")
        if diagram.family(tlevels[0]).members != cell.family.members:
            raise ValueError("cell and module are over different base families")
        shape = diagram.shape
        self.std = [ni for ni, n in enumerate(shape.nodes) if n.level.is_trivial]
        pos = {ni: s for s, ni in enumerate(self.std)}
        self.homs = [_NodeHom(cell, M.values[ni], twist) for ni in self.std]
        self.edges = []
        for ei, e in enumerate(shape.edges):
            if e.src in pos and e.dst in pos:
                mes = {}
                for i in self.homs[0].members:
                    mm = M.maps[ei][i]
                    mes[i] = _MapEval(
                        M.values[e.src][mm.src_member], M.values[e.dst][i], mm.images, None
                    )
                self.edges.append((pos[e.src], pos[e.dst], mes))
        self._kernels = {}
        self._kdiffs = {}

    def node_offsets(self, d):
        out = [0]
        for h in self.homs:
            out.append(out[-1] + h.dim(d))
        return out

    def dim(self, d):
        return self.node_offsets(d)[-1]

    def kernel(self, d):
        if d not in self._kernels:
            total = self.dim(d)
            noff = self.node_offsets(d)
            rows = []
            gens = self.homs[0].gens if self.homs else ()
            for si, di, mes in self.edges:
                hs = self.homs[si]
                hd = self.homs[di]
                soff = hs.offsets(d)
                doff = hd.offsets(d)
                for gi, g in enumerate(gens):
                    vd = hs.goff[gi] + d
                    mat, sdim, ddim = mes[g[0]].matrix(vd)
                    for r in range(ddim):
                        row = [Fraction(0)] * total
                        for c in range(sdim):
                            x = mat[r][c]
                            if x:
                                row[noff[si] + soff[gi] + c] = x
                        row[noff[di] + doff[gi] + r] -= 1
                        rows.append(row)
            self._kernels[d] = linalg.nullspace(rows, total)
        return self._kernels[d]

    def ambient_diff(self, d):
        roff = self.node_offsets(d - 1)
        coff = self.node_offsets(d)
        mat = [[Fraction(0)] * coff[-1] for _ in range(roff[-1])]
        for s, h in enumerate(self.homs):
            block = h.diff(d)
            for r, row in enumerate(block):
                for c, x in enumerate(row):
                    if x:
                        mat[roff[s] + r][coff[s] + c] = x
        return mat

    def kernel_diff(self, d):
        """The differential written in the kernel bases, degree d to d - 1."""
        if d not in self._kdiffs:
            zs = self.kernel(d)
            zt = self.kernel(d - 1)
            amb = self.ambient_diff(d)
            cols = [_coords_in(zt, linalg.mat_vec(amb, z)) for z in zs]
            self._kdiffs[d] = [
                [cols[c][r] for c in range(len(cols))] for r in range(len(zt))
            ]
        return self._kdiffs[d]


def _hom_result(M, cell, window, twist=None) -> HomologyResult:
    a, b = _validate_window(window)
    he = _HomEvaluation(M, cell, twist)
    zdims = {d: len(he.kernel(d)) for d in range(a - 1, b + 2)}
    diffs = {d: he.kernel_diff(d) for d in range(a, b + 2)}
    for d in range(a, b + 1):
        if zdims[d] and zdims[d - 1] and zdims[d + 1]:
            assert linalg.is_zero_matrix(linalg.mat_mul(diffs[d], diffs[d + 1]))
    entries = {}
    for d in range(a, b + 1):
        h = zdims[d] - linalg.rank(diffs[d]) - linalg.rank(diffs[d + 1])
        entries[d] = [
            {
                "component": "0",
                "dimension": h,
                "basis": tuple("h%d" % j for j in range(h)),
            }
        ]
    return HomologyResult((a, b), entries)


# -- homotopy tables ---------------------------------------------------------------

@dataclass(frozen=True)
class HomEntry:
    subgroup: ClosedSubgroup
    homology: object
    note: str  # "" when evaluated, "not-locally-finite" when unsupported


@dataclass(frozen=True)
class HomTable:
    window: tuple
    entries: tuple

    def subgroups(self):
        return tuple(e.subgroup for e in self.entries)

    def entry(self, k) -> HomEntry:
        for e in self.entries:
            if e.subgroup == k:
                return e
        raise ValueError("no cell sampled at %r" % (k,))

    def dimension(self, k, d) -> int:
        e = self.entry(k)
        if e.homology is None:
            raise ValueError("entry at %r is unsupported: %s" % (k, e.note))
        return e.homology.dimension(d)

    def to_json(self):
        return {
            "window": list(self.window),
            "entries": [
                {
                    "subgroup": subgroup_to_json(e.subgroup),
                    "note": e.note,
                    "homology": None if e.homology is None else e.homology.to_json(),
                }
                for e in self.entries
            ],
        }


def hom_from_cells(M: DiagramModule, window, families) -> HomTable:
    """Homotopy table of a diagram module: homology of maps out of the
    basic cell of every family member.

    Entries whose evaluation is not locally finite are reported as
    unsupported rather than approximated.
    """
    a, b = _validate_window(window)
    subs = sorted(
        {m for fam in families.values() for m in fam.members}, key=subgroup_sort_key
    )
    entries = []
    for k in subs:
        cell = flat_cell(k, families)
        try:
            entries.append(HomEntry(k, _hom_result(M, cell, (a, b)), ""))
        except NotLocallyFinite:
            entries.append(HomEntry(k, None, "not-locally-finite"))
    return HomTable((a, b), tuple(entries))


def tensor_cell_identity_check(k: ClosedSubgroup, l: ClosedSubgroup, X: DiagramModule, window) -> bool:
    """Check the tensor identity: maps from the cell of k into X tensored
    with the cell of l match, degreewise, the intersection cell's table
    shifted by codim l and tensored with an exterior algebra on
    codim(join(k, l)) generators of degree -1.

    The diagram of X must sample k, l, and their intersection.
    """
    a, b = _validate_window(window)
    families = dict(X.diagram.levels)
    ck = flat_cell(k, families)
    cl = flat_cell(l, families)
    lhs = _hom_result(X, ck, (a, b), twist=cl)
    cint = flat_cell(intersection(k, l), families)
    cl_codim = l.codimension
    n_ext = join(k, l).codimension
    rhs = _hom_result(X, cint, (a - cl_codim, b - cl_codim + n_ext))
    for d in range(a, b + 1):
        want = sum(
            comb(n_ext, j) * rhs.dimension(d - cl_codim + j) for j in range(n_ext + 1)
        )
        if lhs.dimension(d) != want:
            return False
    return True


def support_dimension(M: DiagramModule, window):
    """Largest dimension of a sampled level where the diagonal value has
    nonzero graded pieces in the window, or "empty" when all vanish."""
    a, b = _validate_window(window)
    best = None
    for ni, n in enumerate(M.diagram.shape.nodes):
        if n.quotient != n.level:
            continue
        for v in M.values[ni]:
            ev = evaluator(v)
            if any(ev.dim(d) for d in range(a, b + 1)):
                dim = n.level.dimension
                best = dim if best is None else max(best, dim)
                break
    return "empty" if best is None else best


# -- morphisms and cellular equivalences -------------------------------------------

@dataclass(frozen=True)
class ModuleMorphism:
    """Map of diagram modules over a common diagram.

    images holds, per node and per member, one image list per generator of
    the source value, with coefficients over the member ring of the
    destination value.
    """

    src: DiagramModule
    dst: DiagramModule
    images: tuple


def module_morphism(src: DiagramModule, dst: DiagramModule, images) -> ModuleMorphism:
    if src.diagram != dst.diagram:
        raise ValueError("morphisms need a common diagram")
    shape = src.diagram.shape
    images = tuple(
        tuple(_normalize_images(im) for im in node_images) for node_images in images
    )
    if len(images) != len(shape.nodes):
        raise ValueError("one image table per node is required")
    for ni, n in enumerate(shape.nodes):
        fam = src.diagram.family(n.level)
        if len(images[ni]) != len(fam.members):
            raise ValueError("one image list per member is required")
        for mi, f in enumerate(fam.members):
            sgens = module_generators(src.values[ni][mi])
            dgens = module_generators(dst.values[ni][mi])
            ims = images[ni][mi]
            if len(ims) != len(sgens):
                raise ValueError("image count differs from the generator count")
            nv = member_ring(f).nvars
            for g, entries in enumerate(ims):
                for g2, q in entries:
                    if not 0 <= g2 < len(dgens):
                        raise ValueError("image hits a missing generator")
                    if q.nvars != nv:
                        raise ValueError("image coefficients over the wrong ring")
                    if not q.is_zero and dgens[g2][2] + q.degree != sgens[g][2]:
                        raise ValueError("image entry is not degree preserving")
    return ModuleMorphism(src, dst, images)


def identity_morphism(M: DiagramModule) -> ModuleMorphism:
    images = tuple(
        tuple(_identity_images(v) for v in M.values[ni])
        for ni in range(len(M.diagram.shape.nodes))
    )
    return module_morphism(M, M, images)


def homology_isomorphism_check(f: ModuleMorphism, window) -> bool:
    """Degreewise isomorphism test on the values at the base level; the
    base level determines the rest of a quasi-coherent module."""
    a, b = _validate_window(window)
    shape = f.src.diagram.shape
    for ni, n in enumerate(shape.nodes):
        if not n.level.is_trivial:
            continue
        for mi in range(len(f.src.values[ni])):
            me = _MapEval(
                f.src.values[ni][mi], f.dst.values[ni][mi], f.images[ni][mi], None
            )
            if _first_noniso(me, (a, b)) is not None:
                return False
    return True


def _f_ambient(hsrc, hdst, fmes, d):
    roff = hdst.node_offsets(d)
    coff = hsrc.node_offsets(d)
    mat = [[Fraction(0)] * coff[-1] for _ in range(roff[-1])]
    for s in range(len(hsrc.homs)):
        hs = hsrc.homs[s]
        hd = hdst.homs[s]
        soff = hs.offsets(d)
        doff = hd.offsets(d)
        for gi, g in enumerate(hs.gens):
            block, sdim, ddim = fmes[s][g[0]].matrix(hs.goff[gi] + d)
            for r in range(ddim):
                for c in range(sdim):
                    x = block[r][c]
                    if x:
                        mat[roff[s] + doff[gi] + r][coff[s] + soff[gi] + c] = x
    return mat


def _induced_iso(hsrc, hdst, fmes, window) -> bool:
    a, b = window
    zs = {d: hsrc.kernel(d) for d in range(a - 1, b + 2)}
    zd = {d: hdst.kernel(d) for d in range(a - 1, b + 2)}
    ds = {d: hsrc.kernel_diff(d) for d in range(a, b + 2)}
    dd = {d: hdst.kernel_diff(d) for d in range(a, b + 2)}
    for d in range(a, b + 1):
        hs = len(zs[d]) - linalg.rank(ds[d]) - linalg.rank(ds[d + 1])
        hd = len(zd[d]) - linalg.rank(dd[d]) - linalg.rank(dd[d + 1])
        if hs != hd:
            return False
        if hs == 0:
            continue
        famb = _f_ambient(hsrc, hdst, fmes, d)
        fk = [
            _coords_in(zd[d], linalg.mat_vec(famb, z)) for z in zs[d]
        ]  # columns over the destination kernel basis
        cycles = linalg.nullspace(ds[d], len(zs[d]))
        boundaries = [
            [dd[d + 1][r][c] for r in range(len(zd[d]))]
            for c in range(len(dd[d + 1][0]) if dd[d + 1] else 0)
        ]
        imgs = []
        for cyc in cycles:
            v = [Fraction(0)] * len(zd[d])
            for ci, x in enumerate(cyc):
                if x:
                    for r in range(len(zd[d])):
                        v[r] += x * fk[ci][r]
            imgs.append(v)
        if linalg.rank(imgs + boundaries) - linalg.rank(boundaries) != hs:
            return False
    return True


def cellular_equivalence_check(f: ModuleMorphism, cells, window) -> bool:
    """Whether the map induces homology isomorphisms on maps out of each
    sampled cell over the window; the map must commute with the structure
    maps at the base level."""
    a, b = _validate_window(window)
    families = dict(f.src.diagram.levels)
    for k in cells:
        cell = flat_cell(k, families)
        hs = _HomEvaluation(f.src, cell)
        hd = _HomEvaluation(f.dst, cell)
        fmes = []
        for ni in hs.std:
            fmes.append(
                {
                    i: _MapEval(
                        f.src.values[ni][i], f.dst.values[ni][i], f.images[ni][i], None
                    )
                    for i in hs.homs[0].members
                }
            )
        if not _induced_iso(hs, hd, fmes, (a, b)):
            return False
    return True
