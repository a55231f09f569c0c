"""Coextended injectives, resolutions and derived mapping tables at rank one.

Injective comparison objects come in two kinds: a divisible torsion tower
placed at one finite subgroup, and the localized sheaf of a graded space
placed at the full torus.  Maps into either kind read off at a single
value, which keeps resolutions short: torsion embeds into towers with a
tower cokernel, and the free part is carried across the localized row by
the vertex.  Towers are realized as finite quotients whose top clears the
requested window, so every statement here is a window commitment.

The connecting map of a resolution quotients a localized value by its
polynomial lattice.  No generator image data can express that map, so
resolution maps are stored as degreewise matrix providers per node and
member instead of as structure maps.
"""

from dataclasses import dataclass
from fractions import Fraction

from . import linalg
from .cells import _mult_matrix
from .diagrams import (
    DiagramModule,
    MemberMap,
    _MapEval,
    _identity_images,
    build_diagram_shape,
    delta,
    diagram_module,
    module_generators,
    structure_diagram,
)
from .graded import (
    CanonicalEulerSet,
    HomologyResult,
    Sum,
    _validate_window,
    constant,
    evaluator,
    free,
    linear,
    localize,
    normal_form,
    poly,
    quotient,
)
from .lattice_groups import identity_component
from .structure_rings import canonical_component_set, inflation_ring_map, member_ring


# -- diagram layout ----------------------------------------------------------------

def _circle_layout(diagram):
    """Node and edge indices of the rank one inflation diagram.

    Returns (bottom, localized, vertex, quotient_edge, level_edge)."""
    shape = diagram.shape
    if shape.rank != 1:
        raise ValueError(
            "rank %d is not supported here; injective comparison needs rank one"
            % shape.rank
        )
    bottom = lnode = vertex = None
    for ni, n in enumerate(shape.nodes):
        if n.quotient.is_trivial and n.level.is_trivial:
            bottom = ni
        elif n.quotient.is_full and n.level.is_trivial:
            lnode = ni
        elif n.quotient.is_full and n.level.is_full:
            vertex = ni
    qedge = ledge = None
    for ei, e in enumerate(shape.edges):
        if e.src == bottom and e.dst == lnode:
            qedge = ei
        elif e.src == vertex and e.dst == lnode:
            ledge = ei
    if None in (bottom, lnode, vertex, qedge, ledge) or len(shape.nodes) != 3:
        raise ValueError("expected the three node circle diagram")
    return bottom, lnode, vertex, qedge, ledge


# -- presentations -----------------------------------------------------------------

def _inert_block(b, nvars) -> bool:
    """Whether every Euler set on the block inverts nothing."""
    for s in b.sets:
        if not isinstance(s, CanonicalEulerSet):
            return False
        if linalg.rank([list(r) for r in s.avoid_rows()]) != nvars:
            return False
    return True


def _block_presentation(block):
    """Shifts and relations of one block; forms expand to one row per
    generator they kill.  Relations are (row_degree, {gen: entry})."""
    shifts = tuple(block.shifts)
    rels = []
    for f in block.forms:
        p = linear(list(f))
        if p.is_zero:
            continue
        for j, s in enumerate(shifts):
            rels.append((s + p.degree, {j: p}))
    for rd, entries in block.rows:
        row = {j: q for j, q in enumerate(entries) if not q.is_zero}
        if row:
            rels.append((rd, row))
    return shifts, rels


def _presentation(value):
    nm = normal_form(value)
    shifts = []
    rels = []
    off = 0
    for b in nm.blocks:
        if not _inert_block(b, nm.ring.nvars):
            raise ValueError("presentations need unlocalized values")
        bs, br = _block_presentation(b)
        shifts.extend(bs)
        rels.extend((rd, {off + j: p for j, p in row.items()}) for rd, row in br)
        off += len(bs)
    return tuple(shifts), tuple(rels)


# -- monomial diagonalization ------------------------------------------------------

def _as_monomial(p):
    """(exponent, coefficient) of a one variable monomial, None if zero."""
    if not p.terms:
        return None
    if len(p.terms) != 1:
        raise ValueError("relation entry is not a monomial")
    e, c = p.terms[0]
    return e[0], c


def _mono_poly(e, c):
    return poly(1, [((e,), c)])


def _smith(ngens, gdegs, rows):
    """Diagonalize a homogeneous relation matrix over the one variable ring.

    Entries are monomials, so a minimal exponent divides its whole row and
    column and one sweep per pivot clears both.  Column operations are
    tracked two ways: W expresses old generators through new ones
    (old[i] = sum_j W[i][j] new[j]) and V expresses new through old.
    Entries of both are (exponent, coefficient) monomials or None.

    Returns (newdegs, W, V, diag) with diag mapping a new index to the
    exponent of its cyclic annihilator; indices outside diag are free and
    an exponent of zero means the generator dies.
    """
    mat = [dict(r) for r in rows]
    W = [[(0, Fraction(1)) if i == j else None for j in range(ngens)] for i in range(ngens)]
    V = [[(0, Fraction(1)) if i == j else None for j in range(ngens)] for i in range(ngens)]
    degs = list(gdegs)
    p = 0
    nrows = len(mat)
    while True:
        best = None
        for ri in range(p, nrows):
            for cj, (k, _) in mat[ri].items():
                if cj >= p and (best is None or k < best[2]):
                    best = (ri, cj, k)
        if best is None:
            break
        ri, cj, kp = best
        mat[p], mat[ri] = mat[ri], mat[p]
        if cj != p:
            for r in mat:
                rp, rc = r.get(p), r.get(cj)
                if rc is None:
                    r.pop(p, None)
                else:
                    r[p] = rc
                if rp is None:
                    r.pop(cj, None)
                else:
                    r[cj] = rp
            for row in W:
                row[p], row[cj] = row[cj], row[p]
            V[p], V[cj] = V[cj], V[p]
            degs[p], degs[cj] = degs[cj], degs[p]
        ap = mat[p][p][1]
        if ap != 1:
            mat[p] = {c: (k, x / ap) for c, (k, x) in mat[p].items()}
        for ri2 in range(nrows):
            if ri2 == p or p not in mat[ri2]:
                continue
            k2, a2 = mat[ri2][p]
            sh = k2 - kp
            new = dict(mat[ri2])
            for c, (k, x) in mat[p].items():
                cur = new.get(c)
                add = (k + sh, -a2 * x)
                if cur is None:
                    new[c] = add
                elif cur[0] != add[0]:
                    raise ValueError("relation row lost homogeneity")
                else:
                    s = cur[1] + add[1]
                    if s:
                        new[c] = (cur[0], s)
                    else:
                        del new[c]
            mat[ri2] = new
        for c in [c for c in mat[p] if c != p]:
            kc, ac = mat[p][c]
            sh = kc - kp
            # col_c -= ac c^sh col_p; only row p still meets column p, so the
            # relation matrix change is just dropping the entry
            for i in range(ngens):
                wp = W[i][p]
                if wp is not None:
                    _acc_cell(W[i], c, (wp[0] + sh, -ac * wp[1]))
            for j in range(ngens):
                vc = V[c][j]
                if vc is not None:
                    _acc_cell(V[p], j, (vc[0] + sh, ac * vc[1]))
            del mat[p][c]
        p += 1
    diag = {}
    for ri in range(min(p, nrows)):
        if ri in mat[ri]:
            diag[ri] = mat[ri][ri][0]
    return degs, W, V, diag


def _acc_cell(row, j, add):
    cur = row[j]
    if cur is None:
        row[j] = add
        return
    if cur[0] != add[0]:
        raise ValueError("basis change lost homogeneity")
    s = cur[1] + add[1]
    row[j] = (cur[0], s) if s else None


def _split(shifts, rels):
    """(newdegs, W, V, torsion, free) for a presented value."""
    rows = []
    for _, entries in rels:
        row = {}
        for j, q in entries.items():
            m = _as_monomial(q)
            if m is not None:
                row[j] = m
        if row:
            rows.append(row)
    newdegs, W, V, diag = _smith(len(shifts), list(shifts), rows)
    torsion = tuple((j, k) for j, k in sorted(diag.items()) if k >= 1)
    freeidx = tuple(j for j in range(len(shifts)) if j not in diag)
    return newdegs, W, V, torsion, freeidx


# -- degreewise image matrices -----------------------------------------------------

def _flat_gens(ev):
    out = []
    for bi, bev in enumerate(ev.evals):
        for j, s in enumerate(bev.block.shifts):
            out.append((bi, j, s))
    return out


def _reduced_labels(ev, d):
    """Column labels (block, gen, exponents) in evaluation order."""
    out = []
    for bi, bev in enumerate(ev.evals):
        if bev.killed:
            continue
        red = bev.reducer(d)
        bas = bev.basis(d)
        for c in red.free_cols:
            j, e = bas[c]
            out.append((bi, j, e))
    return out


def _image_matrix(sev, dev, images, d):
    """Degree d matrix of a degree zero generator image map over one ring.

    A term whose monomial label is missing from the target basis at its
    degree is dropped: the target block is localized or truncated there
    and the element is zero.  Both values must share the ring."""
    dgens = _flat_gens(dev)
    dbases = []
    dreds = []
    dindex = []
    for bev in dev.evals:
        if bev.killed:
            dbases.append([])
            dreds.append(None)
            dindex.append({})
            continue
        bas = bev.basis(d)
        dbases.append(bas)
        dreds.append(bev.reducer(d))
        dindex.append({be: t for t, be in enumerate(bas)})
    gen_of = {}
    for g, (bi, j, _) in enumerate(_flat_gens(sev)):
        gen_of[(bi, j)] = g
    cols = []
    for bi, bev in enumerate(sev.evals):
        if bev.killed:
            continue
        red = bev.reducer(d)
        bas = bev.basis(d)
        for ci in red.free_cols:
            j, e = bas[ci]
            g = gen_of[(bi, j)]
            raws = [[Fraction(0)] * len(db) for db in dbases]
            for g2, q in images[g]:
                b2, j2, _ = dgens[g2]
                idx = dindex[b2]
                for eq, cq in q.terms:
                    t = idx.get((j2, tuple(x + y for x, y in zip(e, eq))))
                    if t is not None:
                        raws[b2][t] += cq
            col = []
            for b2, raw in enumerate(raws):
                if dreds[b2] is not None:
                    col.extend(dreds[b2].reduce(raw))
            cols.append(col)
    nrows = dev.dim(d)
    return [[cols[c][r] for c in range(len(cols))] for r in range(nrows)]


def _solve_columns(amat, a_ncols, bmat, b_ncols, nrows, what, d):
    """X with A X = B for a square invertible A, else a ValueError."""
    if a_ncols != nrows or linalg.rank(amat) != nrows:
        raise ValueError("%s at degree %d" % (what, d))
    cols = []
    for c in range(b_ncols):
        rhs = [bmat[r][c] for r in range(nrows)]
        x = linalg.solve(amat, rhs) if nrows else []
        if x is None:
            raise ValueError("%s at degree %d" % (what, d))
        cols.append(x)
    return [[cols[c][r] for c in range(b_ncols)] for r in range(a_ncols)]


def _zero_matrix(m, n):
    return [[Fraction(0)] * n for _ in range(m)]


# -- sums --------------------------------------------------------------------------

def module_sum(A: DiagramModule, B: DiagramModule) -> DiagramModule:
    """Spotwise direct sum of two diagram modules on one diagram."""
    if A.diagram != B.diagram:
        raise ValueError("sums need a common diagram")
    shape = A.diagram.shape
    values = tuple(
        tuple(Sum((a, b)) for a, b in zip(A.values[n], B.values[n]))
        for n in range(len(shape.nodes))
    )
    maps = []
    for ei, e in enumerate(shape.edges):
        mms = []
        for mf, (ma, mb) in enumerate(zip(A.maps[ei], B.maps[ei])):
            off = len(module_generators(A.values[e.dst][mf]))
            images = tuple(ma.images) + tuple(
                tuple((g2 + off, q) for g2, q in row) for row in mb.images
            )
            mms.append(MemberMap(ma.src_member, images))
        maps.append(tuple(mms))
    return diagram_module(A.diagram, values, tuple(maps))


# -- coextension -------------------------------------------------------------------

def coextend(h_tilde, placed, families) -> DiagramModule:
    """Spread a value at one subgroup over the diagram, so that maps into
    the result read off at that subgroup alone.

    At a finite subgroup the value must be torsion over its member ring; it
    sits untouched at its member, zero elsewhere, with a zero vertex.  At
    the full torus the value is a sum of shifted lines and spreads as its
    localized sheaf with identity structure maps.
    """
    shape = build_diagram_shape("inflation", list(families))
    diagram = structure_diagram(shape, families)
    bottom, lnode, vertex, qedge, ledge = _circle_layout(diagram)
    nodes = shape.nodes
    gl = nodes[vertex].level
    base = diagram.family(nodes[bottom].level)
    h = identity_component(h_tilde)
    if h.is_full:
        shifts, rels = _presentation(placed)
        if rels:
            raise ValueError("coextension from the full torus needs a sum of shifted lines")
        if normal_form(placed).ring != member_ring(gl):
            raise ValueError("placed value over the wrong ring")
        # the bottom is already localized, so maps from a torsion bottom
        # into this object vanish and the adjunction reads at the vertex
        values = [None] * len(nodes)
        maps = [None] * len(shape.edges)
        bvals = tuple(
            localize(free(member_ring(f), shifts), canonical_component_set(gl, f))
            for f in base.members
        )
        values[bottom] = bvals
        values[lnode] = tuple(
            localize(free(member_ring(f), shifts), canonical_component_set(gl, f))
            for f in base.members
        )
        values[vertex] = (
            localize(free(member_ring(gl), shifts), canonical_component_set(gl, gl)),
        )
        maps[qedge] = tuple(
            MemberMap(i, _identity_images(bvals[i])) for i in range(len(base.members))
        )
        maps[ledge] = tuple(
            MemberMap(
                0,
                tuple(
                    ((j, constant(member_ring(f).nvars, 1)),)
                    for j in range(len(shifts))
                ),
            )
            for f in base.members
        )
        return diagram_module(diagram, tuple(values), tuple(maps))
    if not h.is_trivial:
        raise ValueError("coextension points are finite subgroups or the full torus")
    try:
        idx = list(base.members).index(h_tilde)
    except ValueError:
        raise ValueError("the subgroup is not a sampled family member")
    shifts, rels = _presentation(placed)
    _, _, _, _, freeidx = _split(shifts, rels)
    if freeidx:
        raise ValueError("coextension at a finite subgroup needs a torsion value")
    phi = {
        nodes[bottom].level: tuple(
            placed if i == idx else free(member_ring(m), ())
            for i, m in enumerate(base.members)
        ),
        gl: (free(member_ring(gl), ()),),
    }
    basing = {(gl, nodes[bottom].level): tuple(() for _ in base.members)}
    return delta(diagram, phi, basing)


@dataclass(frozen=True)
class InjectiveObject:
    """A coextended value with the place maps into it are read at.

    socle is the lowest degree of the tower at a finite subgroup; at the
    full torus the placed shifts carry the reading degrees instead."""

    subgroup: object
    placed: object
    module: DiagramModule
    socle: int = 0


def _tower_span(socle, top_needed) -> int:
    """Lines a tower starting at socle needs to reach top_needed."""
    return max(1, (top_needed - socle + 1) // 2 + 1)


def _tower_value(ring, socle, length):
    """Finite divisible tower: basis in degrees socle up to socle + 2(length-1),
    the variable steps down and kills the bottom line."""
    top = socle + 2 * (length - 1)
    return quotient(
        ring,
        shifts=(top,),
        rows=((top - 2 * length, (_mono_poly(length, 1),)),),
    )


def basic_injective(h_tilde, families, window, shift=0) -> InjectiveObject:
    """The injective comparison object at one subgroup, sized for a window.

    At a finite subgroup this is the coextended torsion tower with socle in
    degree shift and top past the window; at the full torus it is the
    coextended line in degree shift."""
    a, b = _validate_window(window)
    h = identity_component(h_tilde)
    if h.is_full:
        placed = free(member_ring(h_tilde), (shift,))
        return InjectiveObject(h_tilde, placed, coextend(h_tilde, placed, families), shift)
    length = _tower_span(shift, b + 2)
    placed = _tower_value(member_ring(h_tilde), shift, length)
    return InjectiveObject(h_tilde, placed, coextend(h_tilde, placed, families), shift)


# -- reduction formulas ------------------------------------------------------------

def hom_via_reduction(X, inj: InjectiveObject, window, path=False) -> HomologyResult:
    """Mapping space dimensions into a coextended target, by evaluation.

    Maps into a coextension only see the value of the source at the
    defining subgroup; a path object shifts the reading degree by one.
    The tower is read as unbounded, so compare against towers whose top
    clears the window."""
    a, b = _validate_window(window)
    if X.diagram != inj.module.diagram:
        raise ValueError("mapping spaces need a common diagram")
    bottom, lnode, vertex, qedge, ledge = _circle_layout(X.diagram)
    h = identity_component(inj.subgroup)
    off = 1 if path else 0
    entries = {}
    if h.is_full:
        ev = evaluator(X.values[vertex][0])
        shifts = [s for _, _, s in module_generators(inj.placed)]
        for d in range(a, b + 1):
            labels = []
            for u in shifts:
                labels.extend(ev.labels(u - d - off))
            if labels:
                entries[d] = [
                    {"component": "0", "dimension": len(labels), "basis": tuple(labels)}
                ]
        return HomologyResult((a, b), entries)
    base = X.diagram.family(X.diagram.shape.nodes[bottom].level)
    try:
        idx = list(base.members).index(inj.subgroup)
    except ValueError:
        raise ValueError("the subgroup is not a sampled family member")
    ev = evaluator(X.values[bottom][idx])
    for d in range(a, b + 1):
        labels = ev.labels(inj.socle - d - off)
        if labels:
            entries[d] = [
                {"component": "0", "dimension": len(labels), "basis": tuple(labels)}
            ]
    return HomologyResult((a, b), entries)


# -- mapping spaces ----------------------------------------------------------------

class _HomSpace:
    """Degreewise mapping spaces between diagram modules on one diagram.

    Variables are the images of the source bottom generators, per member,
    in the matching target bottom value, and of the source vertex
    generators in the target vertex.  The localized row is determined by
    the bottom row, so it enters only through agreement around the square.
    The source must have unlocalized bottom values; the localized row must
    share the bottom generator layout, which holds for every construction
    in this package."""

    def __init__(self, X, Y):
        if X.diagram != Y.diagram:
            raise ValueError("mapping spaces need a common diagram")
        self.lay = _circle_layout(X.diagram)
        bottom, lnode, vertex, qedge, ledge = self.lay
        nodes = X.diagram.shape.nodes
        gl = nodes[vertex].level
        self.members = X.diagram.family(nodes[bottom].level).members
        self.xb = []
        self.yb = []
        self.yloc = []
        self.yq = []
        self.yl = []
        self.xlv = []
        for i, f in enumerate(self.members):
            self.xb.append(_presentation(X.values[bottom][i]))
            self.yb.append(evaluator(Y.values[bottom][i]))
            self.yloc.append(evaluator(Y.values[lnode][i]))
            self.yq.append(
                _MapEval(
                    Y.values[bottom][i],
                    Y.values[lnode][i],
                    Y.maps[qedge][i].images,
                    None,
                )
            )
            self.yl.append(
                _MapEval(
                    Y.values[vertex][0],
                    Y.values[lnode][i],
                    Y.maps[ledge][i].images,
                    inflation_ring_map(gl, f),
                )
            )
            self.xlv.append(X.maps[ledge][i].images)
        self.xv = _presentation(X.values[vertex][0])
        self.yv = evaluator(Y.values[vertex][0])
        self._cache = {}

    def space(self, d):
        """(nullspace basis, layout) at degree d; layout rows are
        (key, offset, width, source degree) with keys ("b", member, gen)
        and ("v", 0, gen)."""
        if d in self._cache:
            return self._cache[d]
        layout = []
        total = 0
        for i in range(len(self.members)):
            shifts, _ = self.xb[i]
            for g, s in enumerate(shifts):
                w = self.yb[i].dim(s + d)
                layout.append((("b", i, g), total, w, s))
                total += w
        vshifts, vrels = self.xv
        for g, s in enumerate(vshifts):
            w = self.yv.dim(s + d)
            layout.append((("v", 0, g), total, w, s))
            total += w
        offs = {key: (off, w) for key, off, w, _ in layout}
        rows = []
        for i in range(len(self.members)):
            shifts, rels = self.xb[i]
            for rd, entries in rels:
                m = self.yb[i].dim(rd + d)
                if m == 0:
                    continue
                block = _zero_matrix(m, total)
                for g, p in entries.items():
                    mm = _mult_matrix(self.yb[i], p, shifts[g] + d)
                    off, w = offs[("b", i, g)]
                    for r in range(m):
                        for c in range(w):
                            block[r][off + c] += mm[r][c]
                rows.extend(block)
            for v, e in enumerate(vshifts):
                m = self.yloc[i].dim(e + d)
                if m == 0:
                    continue
                block = _zero_matrix(m, total)
                for g2, q in self.xlv[i][v]:
                    qm, _, _ = self.yq[i].matrix(shifts[g2] + d)
                    mu = _mult_matrix(self.yloc[i], q, shifts[g2] + d)
                    coeff = linalg.mat_mul(mu, qm)
                    off, w = offs[("b", i, g2)]
                    for r in range(m):
                        for c in range(w):
                            block[r][off + c] += coeff[r][c]
                lm, _, _ = self.yl[i].matrix(e + d)
                off, w = offs[("v", 0, v)]
                for r in range(m):
                    for c in range(w):
                        block[r][off + c] -= lm[r][c]
                rows.extend(block)
        for rd, entries in self.xv[1]:
            m = self.yv.dim(rd + d)
            if m == 0:
                continue
            block = _zero_matrix(m, total)
            for g, p in entries.items():
                mm = _mult_matrix(self.yv, p, self.xv[0][g] + d)
                off, w = offs[("v", 0, g)]
                for r in range(m):
                    for c in range(w):
                        block[r][off + c] += mm[r][c]
            rows.extend(block)
        basis = linalg.nullspace(rows, total)
        self._cache[d] = (basis, layout)
        return self._cache[d]


def module_hom(X, Y, window) -> HomologyResult:
    """Dimensions of the degreewise mapping spaces between two diagram
    modules, by the equalizer over the square."""
    a, b = _validate_window(window)
    hs = _HomSpace(X, Y)
    entries = {}
    for d in range(a, b + 1):
        basis, _ = hs.space(d)
        if basis:
            entries[d] = [
                {
                    "component": "0",
                    "dimension": len(basis),
                    "basis": tuple("m%d" % t for t in range(len(basis))),
                }
            ]
    return HomologyResult((a, b), entries)


# -- resolutions -------------------------------------------------------------------

@dataclass(frozen=True)
class Summand:
    """One coextended piece of a resolution stage: a torsion tower at a
    family member, or the sheaf of shifted lines at the full torus."""

    kind: str
    member: int = -1
    socle: int = 0
    length: int = 0
    shifts: tuple = ()

    def to_json(self):
        if self.kind == "sheaf":
            return {"kind": self.kind, "shifts": list(self.shifts)}
        return {
            "kind": self.kind,
            "member": self.member,
            "socle": self.socle,
            "length": self.length,
        }


class _StepMap:
    """Degreewise matrices of one resolution map, per (node, member)."""

    def __init__(self, entries):
        self._entries = entries
        self._memo = {}

    def matrix(self, node, member, d):
        key = (node, member, d)
        if key not in self._memo:
            self._memo[key] = self._entries[(node, member)](d)
        return self._memo[key]


@dataclass(frozen=True)
class Resolution:
    """Exact comparison of a module with sums of coextended pieces.

    providers[0] embeds the module into steps[0]; providers[1], when
    present, is the connecting quotient.  Both are degreewise matrix
    providers: matrix(node, member, d) in the reduced coordinates of the
    participating values.  labels[s] lists the summands of steps[s].
    Exactness holds degreewise inside the window the resolution was built
    for; beyond it the towers are truncated."""

    module: DiagramModule
    steps: tuple
    labels: tuple
    providers: tuple

    @property
    def length(self) -> int:
        return max(0, len(self.steps) - 1)

    def exactness_report(self, window) -> dict:
        a, b = _validate_window(window)
        lay = _circle_layout(self.module.diagram)
        failures = []
        for node in lay[:3]:
            for mem in range(len(self.module.values[node])):
                mev = evaluator(self.module.values[node][mem])
                e0 = evaluator(self.steps[0].values[node][mem]) if self.steps else None
                e1 = (
                    evaluator(self.steps[1].values[node][mem])
                    if len(self.steps) > 1
                    else None
                )
                for d in range(a, b + 1):
                    mdim = mev.dim(d)
                    if not self.steps:
                        if mdim:
                            failures.append(
                                _fail(node, mem, d, "nonzero value with an empty resolution")
                            )
                        continue
                    amat = self.providers[0].matrix(node, mem, d)
                    i0dim = e0.dim(d)
                    rka = linalg.rank(amat)
                    if rka != mdim:
                        failures.append(_fail(node, mem, d, "the embedding drops rank"))
                    if e1 is None:
                        if i0dim != mdim:
                            failures.append(
                                _fail(node, mem, d, "the closing stage is not an isomorphism")
                            )
                        continue
                    dmat = self.providers[1].matrix(node, mem, d)
                    i1dim = e1.dim(d)
                    if mdim and i0dim and i1dim:
                        comp = linalg.mat_mul(dmat, amat)
                        if not linalg.is_zero_matrix(comp):
                            failures.append(
                                _fail(node, mem, d, "the composite does not vanish")
                            )
                    rkd = linalg.rank(dmat)
                    if rkd != i0dim - rka:
                        failures.append(_fail(node, mem, d, "exactness fails in the middle"))
                    if rkd != i1dim:
                        failures.append(
                            _fail(node, mem, d, "the final stage is not exhausted")
                        )
        return {
            "window": [a, b],
            "length": self.length,
            "ok": not failures,
            "failures": failures,
        }


def _fail(node, mem, d, reason):
    return {"node": node, "member": mem, "degree": d, "reason": reason}


def injective_resolution(M: DiagramModule, window) -> Resolution:
    """Embed a finitely presented module into coextended pieces with an
    exact quotient stage, never more than one.

    Torsion splits off as cyclic towers whose hulls close in one step; the
    free part is carried by the vertex across the localized row, and its
    quotient by the polynomial lattice is again a sum of towers, one per
    lattice line.  The construction is audited degreewise over the window
    before returning."""
    a, b = _validate_window(window)
    diagram = M.diagram
    bottom, lnode, vertex, qedge, ledge = _circle_layout(diagram)
    nodes = diagram.shape.nodes
    gl = nodes[vertex].level
    base = diagram.family(nodes[bottom].level)
    members = base.members
    ring0 = member_ring(gl)

    vshifts, vrels = _presentation(M.values[vertex][0])
    if vrels:
        raise ValueError("the vertex value must be a sum of shifted lines")
    have_sheaf = bool(vshifts)

    total_gens = sum(
        len(module_generators(v)) for vals in M.values for v in vals
    )
    if total_gens == 0:
        res = Resolution(M, (), (), ())
        _audit(res, (a, b))
        return res

    data = []
    for i, f in enumerate(members):
        nm = normal_form(M.values[bottom][i])
        ext_gens = []
        plain_shifts = []
        plain_idx = []
        plain_rels = []
        off = 0
        for blk in nm.blocks:
            n = len(blk.shifts)
            if _inert_block(blk, nm.ring.nvars):
                bs, br = _block_presentation(blk)
                lo = len(plain_shifts)
                plain_shifts.extend(bs)
                plain_idx.extend(range(off, off + n))
                plain_rels.extend(
                    (rd, {lo + j: p for j, p in row.items()}) for rd, row in br
                )
            else:
                if blk.rows or blk.forms:
                    raise ValueError("localized values with relations are not supported")
                ext_gens.extend(off + j for j in range(n))
            off += n
        newdegs, W, V, torsion, freeidx = _split(tuple(plain_shifts), tuple(plain_rels))
        data.append(
            {
                "ring": member_ring(f),
                "ngens": off,
                "ext": ext_gens,
                "pshifts": plain_shifts,
                "pidx": plain_idx,
                "newdegs": newdegs,
                "W": W,
                "V": V,
                "torsion": torsion,
                "free": freeidx,
            }
        )

    any_free = any(md["ext"] or md["free"] for md in data)
    if any_free and not have_sheaf:
        raise ValueError("the bottom has a free part the vertex does not extend")
    if have_sheaf and not any_free:
        raise ValueError("the vertex does not vanish over a torsion bottom")

    # stage values and summand bookkeeping
    vals0 = [None] * len(nodes)
    vals1 = [None] * len(nodes)
    labels0 = []
    labels1 = []
    if have_sheaf:
        labels0.append(Summand("sheaf", shifts=tuple(vshifts)))
    b0 = []
    b1 = []
    for i, f in enumerate(members):
        md = data[i]
        rf = md["ring"]
        hulls = []
        for j, k in md["torsion"]:
            sp = md["newdegs"][j]
            span = _tower_span(sp + 2, b + 2)
            hulls.append((j, k, sp, span))
        md["hulls"] = hulls
        lats = []
        for j in md["free"]:
            sig = md["newdegs"][j]
            lats.append((j, sig, _tower_span(sig + 2, b + 2)))
        md["lats"] = lats
        parts0 = []
        if have_sheaf:
            parts0.append(
                localize(free(rf, tuple(vshifts)), canonical_component_set(gl, f))
            )
        for j, k, sp, span in hulls:
            parts0.append(_tower_value(rf, sp - 2 * (k - 1), k + span))
            labels0.append(Summand("tower", i, sp - 2 * (k - 1), k + span))
        b0.append(Sum(tuple(parts0)) if parts0 else free(rf, ()))
        parts1 = []
        for j, sig, ln in lats:
            parts1.append(_tower_value(rf, sig + 2, ln))
            labels1.append(Summand("tower", i, sig + 2, ln))
        for j, k, sp, span in hulls:
            parts1.append(_tower_value(rf, sp + 2, span))
            labels1.append(Summand("tower", i, sp + 2, span))
        b1.append(Sum(tuple(parts1)) if parts1 else free(rf, ()))

    vals0[bottom] = tuple(b0)
    vals0[lnode] = tuple(
        localize(b0[i], canonical_component_set(gl, f)) for i, f in enumerate(members)
    )
    vals0[vertex] = (
        localize(free(ring0, tuple(vshifts)), canonical_component_set(gl, gl))
        if have_sheaf
        else free(ring0, ()),
    )
    maps0 = [None] * len(diagram.shape.edges)
    maps0[qedge] = tuple(MemberMap(i, _identity_images(b0[i])) for i in range(len(members)))
    maps0[ledge] = tuple(
        MemberMap(0, tuple(((j, constant(1, 1)),) for j in range(len(vshifts))))
        for _ in members
    )
    I0 = diagram_module(diagram, tuple(vals0), tuple(maps0))

    have_step = any(len(module_generators(v)) for v in b1)
    I1 = None
    if have_step:
        vals1[bottom] = tuple(b1)
        vals1[lnode] = tuple(
            localize(b1[i], canonical_component_set(gl, f)) for i, f in enumerate(members)
        )
        vals1[vertex] = (free(ring0, ()),)
        maps1 = [None] * len(diagram.shape.edges)
        maps1[qedge] = tuple(
            MemberMap(i, _identity_images(b1[i])) for i in range(len(members))
        )
        maps1[ledge] = tuple(MemberMap(0, ()) for _ in members)
        I1 = diagram_module(diagram, tuple(vals1), tuple(maps1))

    # shared evaluators
    mb = [evaluator(M.values[bottom][i]) for i in range(len(members))]
    mloc = [evaluator(M.values[lnode][i]) for i in range(len(members))]
    mv = evaluator(M.values[vertex][0])
    i0b = [evaluator(I0.values[bottom][i]) for i in range(len(members))]
    i0v = evaluator(I0.values[vertex][0])
    i1b = [evaluator(I1.values[bottom][i]) for i in range(len(members))] if have_step else None
    sheaf_ev = []
    gp_ev = []
    gp_images = []
    for i, f in enumerate(members):
        md = data[i]
        rf = md["ring"]
        if not have_sheaf:
            sheaf_ev.append(None)
            gp_ev.append(None)
            gp_images.append(None)
            continue
        sheaf_ev.append(
            evaluator(localize(free(rf, tuple(vshifts)), canonical_component_set(gl, f)))
        )
        qimg = M.maps[qedge][i].images
        ext_shifts = tuple(
            s for g, (_, _, s) in enumerate(module_generators(M.values[bottom][i]))
            if g in set(md["ext"])
        )
        free_degs = tuple(md["newdegs"][j] for j in md["free"])
        gp_ev.append(
            evaluator(
                Sum(
                    (
                        localize(free(rf, ext_shifts), canonical_component_set(gl, f)),
                        localize(free(rf, free_degs), canonical_component_set(gl, f)),
                    )
                )
            )
        )
        imgs = []
        for g in md["ext"]:
            imgs.append(tuple(qimg[g]))
        for j in md["free"]:
            acc = {}
            for t, orig in enumerate(md["pidx"]):
                cell = md["V"][j][t]
                if cell is None:
                    continue
                for g2, q in qimg[orig]:
                    for eq, cq in q.terms:
                        acc.setdefault(g2, []).append(((cell[0] + eq[0],), cell[1] * cq))
            row = []
            for g2 in sorted(acc):
                p = poly(1, acc[g2])
                if not p.is_zero:
                    row.append((g2, p))
            imgs.append(tuple(row))
        gp_images.append(tuple(imgs))

    def _bmat(i, d):
        return _image_matrix(sheaf_ev[i], mloc[i], M.maps[ledge][i].images, d)

    def _lmat(i, d):
        return _image_matrix(mb[i], mloc[i], M.maps[qedge][i].images, d)

    # generator image table of the torsion component of the embedding
    tor_images = []
    for i in range(len(members)):
        md = data[i]
        local_of = {orig: t for t, orig in enumerate(md["pidx"])}
        hull_pos = {j: t for t, (j, _, _, _) in enumerate(md["hulls"])}
        hull_gen0 = len(vshifts) if have_sheaf else 0
        imgs = []
        for g in range(md["ngens"]):
            t = local_of.get(g)
            if t is None:
                imgs.append(())
                continue
            row = []
            for j, k, sp, span in md["hulls"]:
                cell = md["W"][t][j]
                if cell is None:
                    continue
                row.append((hull_gen0 + hull_pos[j], _mono_poly(cell[0] + span, cell[1])))
            imgs.append(tuple(row))
        tor_images.append(tuple(imgs))

    aug_entries = {}
    for i in range(len(members)):
        def _aug_bottom(d, i=i):
            mat = _image_matrix(mb[i], i0b[i], tor_images[i], d)
            if have_sheaf:
                s = _solve_columns(
                    _bmat(i, d),
                    sheaf_ev[i].dim(d),
                    _lmat(i, d),
                    mb[i].dim(d),
                    mloc[i].dim(d),
                    "the bottom does not extend across the vertex",
                    d,
                )
                for r in range(len(s)):
                    mat[r] = s[r]
            return mat

        def _aug_loc(d, i=i):
            n = mloc[i].dim(d)
            if not have_sheaf:
                return _zero_matrix(0, n)
            return _solve_columns(
                _bmat(i, d),
                sheaf_ev[i].dim(d),
                linalg.identity(n),
                n,
                n,
                "the bottom does not extend across the vertex",
                d,
            )

        aug_entries[(bottom, i)] = _aug_bottom
        aug_entries[(lnode, i)] = _aug_loc
    aug_entries[(vertex, 0)] = lambda d: linalg.identity(mv.dim(d))
    providers = [_StepMap(aug_entries)]

    if have_step:
        # images of the hull quotient, extended by zero on the sheaf block
        hullq_images = []
        for i in range(len(members)):
            md = data[i]
            nlat = len(md["lats"])
            imgs = []
            if have_sheaf:
                imgs.extend(() for _ in vshifts)
            for t in range(len(md["hulls"])):
                imgs.append(((nlat + t, constant(1, 1)),))
            hullq_images.append(tuple(imgs))

        delta_entries = {}
        for i in range(len(members)):
            def _delta_bottom(d, i=i):
                md = data[i]
                mat = _image_matrix(i0b[i], i1b[i], hullq_images[i], d)
                if have_sheaf and md["lats"]:
                    bmat = _bmat(i, d)
                    gdim = gp_ev[i].dim(d)
                    y = _solve_columns(
                        _image_matrix(gp_ev[i], mloc[i], gp_images[i], d),
                        gdim,
                        bmat,
                        sheaf_ev[i].dim(d),
                        mloc[i].dim(d),
                        "the localized row does not match its lattice",
                        d,
                    )
                    # rows of the lattice cokernel towers present at degree d
                    offsets = {}
                    r = 0
                    for t, (j, sig, ln) in enumerate(md["lats"]):
                        top = sig + 2 * ln
                        if (d - sig) % 2 == 0 and sig + 2 <= d <= top:
                            offsets[t] = r
                            r += 1
                    slot_of = {j: t for t, (j, _, _) in enumerate(md["lats"])}
                    for c, (bi, j, e) in enumerate(_reduced_labels(gp_ev[i], d)):
                        if bi != 1:
                            continue
                        t = slot_of.get(md["free"][j])
                        if t is None:
                            continue
                        p = e[0]
                        ln = md["lats"][t][2]
                        if p > -1 or ln + p < 0 or t not in offsets:
                            continue
                        row = offsets[t]
                        for cc in range(len(y[0]) if y else 0):
                            mat[row][cc] += y[c][cc]
                return mat

            def _delta_rest(d, i=i, node=lnode):
                return _zero_matrix(0, evaluator(I0.values[node][i]).dim(d))

            delta_entries[(bottom, i)] = _delta_bottom
            delta_entries[(lnode, i)] = _delta_rest
        delta_entries[(vertex, 0)] = lambda d: _zero_matrix(0, i0v.dim(d))
        providers.append(_StepMap(delta_entries))

    steps = (I0, I1) if have_step else (I0,)
    labels = ((tuple(labels0), tuple(labels1)) if have_step else (tuple(labels0),))
    res = Resolution(M, steps, labels, tuple(providers))
    _audit(res, (a, b))
    return res


def _audit(res: Resolution, window):
    rep = res.exactness_report(window)
    if not rep["ok"]:
        f = rep["failures"][0]
        raise ValueError(
            "resolution audit failed at node %d member %d degree %d: %s"
            % (f["node"], f["member"], f["degree"], f["reason"])
        )


# -- derived tables ----------------------------------------------------------------

@dataclass(frozen=True)
class ExtTable:
    """Derived mapping dimensions; rows beyond the diagram rank vanish."""

    window: tuple
    rows: dict

    def dimension(self, s, d) -> int:
        a, b = self.window
        if not (a <= d <= b):
            raise ValueError("degree %d outside window [%d, %d]" % (d, a, b))
        if s < 0:
            raise ValueError("row index must not be negative")
        return self.rows.get(s, {}).get(d, 0)

    def to_json(self):
        return {
            "window": list(self.window),
            "rows": {
                str(s): {str(d): n for d, n in sorted(self.rows[s].items()) if n}
                for s in sorted(self.rows)
            },
        }


def ext(M: DiagramModule, N: DiagramModule, window) -> ExtTable:
    """Derived mapping table from the comparison tower of the target.

    Row zero agrees with the plain mapping space; row one is the cokernel
    against the connecting map; higher rows vanish at rank one.  The
    target is resolved over a window widened by the top source generator
    degree, so the truncated towers behave as unbounded ones on every
    degree the source can reach."""
    a, b = _validate_window(window)
    spread = 0
    for vals in M.values:
        for v in vals:
            for _, _, s in module_generators(v):
                spread = max(spread, s)
    res = injective_resolution(N, (a, b + spread))
    if not res.steps:
        return ExtTable((a, b), {0: {}, 1: {}})
    bottom, lnode, vertex, qedge, ledge = _circle_layout(M.diagram)
    h0 = _HomSpace(M, res.steps[0])
    h1 = _HomSpace(M, res.steps[1]) if res.length else None
    row0 = {}
    row1 = {}
    for d in range(a, b + 1):
        basis0, layout0 = h0.space(d)
        if h1 is None:
            if basis0:
                row0[d] = len(basis0)
            continue
        basis1, layout1 = h1.space(d)
        pos1 = {key: (off, w) for key, off, w, _ in layout1}
        total1 = sum(w for _, _, w, _ in layout1)
        prov = res.providers[1]
        imvecs = []
        for vec in basis0:
            out = [Fraction(0)] * total1
            for key, off, w, s in layout0:
                if w == 0:
                    continue
                off1, w1 = pos1[key]
                if w1 == 0:
                    continue
                node, mem = (bottom, key[1]) if key[0] == "b" else (vertex, 0)
                img = linalg.mat_vec(prov.matrix(node, mem, s + d), vec[off:off + w])
                for t, x in enumerate(img):
                    out[off1 + t] += x
            imvecs.append(out)
        r = linalg.rank(imvecs)
        if linalg.rank([list(v) for v in basis1] + imvecs) != len(basis1):
            raise ValueError("the connecting map left the mapping space")
        if len(basis0) - r:
            row0[d] = len(basis0) - r
        if len(basis1) - r:
            row1[d] = len(basis1) - r
    return ExtTable((a, b), {0: row0, 1: row1})
