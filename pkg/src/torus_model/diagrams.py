"""Diagrams of modules over the subgroup poset, with localization and
inflation structure maps.

A shape indexes nodes by a pair of connected subgroups: the quotient K the
node reports on and the level L it lives over, with L <= K.  The
"completion" and "full" kinds add a plain/complete flavor with a one way
comparison; flavored plain nodes are combinatorial only, so rings and
modules are attached to shapes of the "inflation" kind.

A node value is one module per member of the level family.  Structure maps
along quotient edges are further localizations; maps along level edges are
inflations, pairing each member F of the finer family with the member
join(K, F) of the coarser one.  Maps are recorded by generator images and
realized degreewise as exact rational matrices.

The fracture helpers at the bottom do the integral arithmetic for the
rationalization/completion square of a finitely generated abelian group.
"""

from dataclasses import dataclass
from typing import Optional

from . import intmat, linalg
from .graded import (
    CanonicalEulerSet,
    ExplicitEulerSet,
    FormalModule,
    Localize,
    NotLocallyFinite,
    Shift,
    Sum,
    TensorOver,
    _integer_direction,
    constant,
    evaluator,
    free,
    localize,
    module_from_json,
    module_to_json,
    normal_form,
    poly,
    poly_from_json,
    poly_to_json,
)
from .lattice_groups import (
    ClosedSubgroup,
    contains,
    intersection,
    join,
    subgroup_from_json,
    subgroup_sort_key,
    subgroup_to_json,
)
from .structure_rings import (
    FiniteFamily,
    StructureRing,
    canonical_component_set,
    canonical_localized_modules,
    family_from_json,
    family_to_json,
    inflation_ring_map,
    member_ring,
    structure_ring,
)

KIND_INFLATION = "inflation"
KIND_COMPLETION = "completion"
KIND_FULL = "full"
KINDS = (KIND_INFLATION, KIND_COMPLETION, KIND_FULL)

FLAVOR_PLAIN = "plain"
FLAVOR_COMPLETE = "complete"

TAG_QUOTIENT = "quotient"
TAG_LEVEL = "level"
TAG_COMPARE = "compare"


# -- shapes ----------------------------------------------------------------------

@dataclass(frozen=True)
class DiagramNode:
    quotient: ClosedSubgroup
    level: ClosedSubgroup
    flavor: str


@dataclass(frozen=True)
class DiagramEdge:
    src: int
    dst: int
    tag: str


@dataclass(frozen=True)
class DiagramShape:
    kind: str
    rank: int
    sample: tuple
    nodes: tuple
    edges: tuple


def node_leq(a: DiagramNode, b: DiagramNode) -> bool:
    """Whether the poset admits a map from node a to node b."""
    flavor_ok = a.flavor == b.flavor or (
        a.flavor == FLAVOR_PLAIN and b.flavor == FLAVOR_COMPLETE
    )
    return flavor_ok and contains(b.quotient, a.quotient) and contains(a.level, b.level)


def build_diagram_shape(kind: str, sample) -> DiagramShape:
    """Node and edge lists over a finite sample of connected subgroups.

    The sample must be closed under pairwise intersection and contain both
    the trivial subgroup and the full torus.  Edges are transitively closed
    within each tag; mixed composites are not listed.
    """
    if kind not in KINDS:
        raise ValueError("unknown diagram kind %r" % (kind,))
    subs = sorted(set(sample), key=subgroup_sort_key)
    if not subs:
        raise ValueError("empty subgroup sample")
    rank = subs[0].rank
    for s in subs:
        if s.rank != rank:
            raise ValueError("sampled subgroups come from different tori")
        if not s.is_connected:
            raise ValueError("sampled subgroups must be connected")
    if not any(s.is_trivial for s in subs):
        raise ValueError("sample must contain the trivial subgroup")
    if not any(s.is_full for s in subs):
        raise ValueError("sample must contain the full torus")
    present = set(subs)
    for a in subs:
        for b in subs:
            if intersection(a, b) not in present:
                raise ValueError("sample is not closed under intersections")

    flavors = (FLAVOR_COMPLETE,) if kind == KIND_INFLATION else (FLAVOR_PLAIN, FLAVOR_COMPLETE)
    nodes = []
    for k in subs:
        for l in subs:
            if kind == KIND_COMPLETION:
                if not l.is_trivial:
                    continue
            elif not contains(k, l):
                continue
            for f in flavors:
                nodes.append(DiagramNode(k, l, f))
    nodes.sort(
        key=lambda n: (
            subgroup_sort_key(n.quotient),
            subgroup_sort_key(n.level),
            n.flavor == FLAVOR_COMPLETE,
        )
    )

    edges = []
    for i, a in enumerate(nodes):
        for j, b in enumerate(nodes):
            if i == j:
                continue
            if (
                a.level == b.level
                and a.flavor == b.flavor
                and a.quotient != b.quotient
                and contains(b.quotient, a.quotient)
            ):
                edges.append(DiagramEdge(i, j, TAG_QUOTIENT))
            elif (
                a.quotient == b.quotient
                and a.flavor == b.flavor
                and a.level != b.level
                and contains(a.level, b.level)
            ):
                edges.append(DiagramEdge(i, j, TAG_LEVEL))
            elif (
                a.quotient == b.quotient
                and a.level == b.level
                and a.flavor == FLAVOR_PLAIN
                and b.flavor == FLAVOR_COMPLETE
            ):
                edges.append(DiagramEdge(i, j, TAG_COMPARE))
    return DiagramShape(kind, rank, tuple(subs), tuple(nodes), tuple(edges))


# -- ring diagrams ---------------------------------------------------------------

@dataclass(frozen=True)
class RingNode:
    quotient: ClosedSubgroup
    level: ClosedSubgroup
    ring: StructureRing
    modules: tuple  # one localized free component per member


@dataclass(frozen=True)
class RingDiagram:
    shape: DiagramShape
    levels: tuple  # (level subgroup, FiniteFamily) pairs
    nodes: tuple

    def family(self, level: ClosedSubgroup) -> FiniteFamily:
        for l, fam in self.levels:
            if l == level:
                return fam
        raise ValueError("no family recorded for level %r" % (level,))


def structure_diagram(shape: DiagramShape, families) -> RingDiagram:
    """Localized structure rings over an inflation shape.

    families maps each sampled subgroup to the finite family used at that
    level.  Each family must contain join(K, F) for every sampled K above
    its level and every member F, so that inflation maps stay inside the
    sampled components.
    """
    if shape.kind != KIND_INFLATION:
        raise ValueError("only inflation shapes carry structure rings")
    levels = []
    for l in shape.sample:
        if l not in families:
            raise ValueError("no family supplied for level %r" % (l,))
        fam = families[l]
        if fam.level != l:
            raise ValueError("family level does not match its key")
        levels.append((l, fam))
    for l, fam in levels:
        for k in shape.sample:
            if not contains(k, l):
                continue
            upper = families[k]
            for f in fam.members:
                kf = join(k, f)
                if kf not in upper.members:
                    raise ValueError(
                        "family at level %r is missing the member %r" % (k, kf)
                    )
    rings = {l: structure_ring(fam) for l, fam in levels}
    nodes = []
    for n in shape.nodes:
        ring = rings[n.level]
        nodes.append(
            RingNode(n.quotient, n.level, ring, canonical_localized_modules(n.quotient, ring))
        )
    return RingDiagram(shape, tuple(levels), tuple(nodes))


def edge_ring_maps(diagram: RingDiagram, edge_index: int):
    """Per destination member: (source member index, ring map or None).

    Quotient edges keep the component ring; level edges change rings by
    inflation from the member join(K, F).
    """
    e = diagram.shape.edges[edge_index]
    a = diagram.shape.nodes[e.src]
    b = diagram.shape.nodes[e.dst]
    fam_dst = diagram.family(b.level)
    if e.tag == TAG_QUOTIENT:
        return tuple((i, None) for i in range(len(fam_dst.members)))
    if e.tag != TAG_LEVEL:
        raise ValueError("edge %d carries no ring map" % (edge_index,))
    fam_src = diagram.family(a.level)
    out = []
    for f in fam_dst.members:
        kf = join(a.level, f)
        out.append((fam_src.members.index(kf), inflation_ring_map(kf, f)))
    return tuple(out)


# -- generator-image maps --------------------------------------------------------

def _gen_layout(nm):
    gens = []
    for bi, b in enumerate(nm.blocks):
        for j, s in enumerate(b.shifts):
            gens.append((bi, j, s))
    return gens


def module_generators(m: FormalModule):
    """Flattened (block, position, degree) list of the generators."""
    return _gen_layout(normal_form(m))


def _normalize_images(images):
    out = []
    for entries in images:
        acc = {}
        for g, q in entries:
            g = int(g)
            acc[g] = acc[g] + q if g in acc else q
        out.append(tuple((g, q) for g, q in sorted(acc.items()) if not q.is_zero))
    return tuple(out)


@dataclass(frozen=True)
class GradedMap:
    """Degree-zero map between modules over one ring, by generator images.

    images[g] lists (target generator, coefficient) pairs with coefficients
    in the target ring.  Matrices are computed on the canonical monomial
    representatives, so the images must be compatible with the source
    relations.
    """

    src: FormalModule
    dst: FormalModule
    images: tuple


def graded_map(src: FormalModule, dst: FormalModule, images) -> GradedMap:
    snm = normal_form(src)
    dnm = normal_form(dst)
    if snm.ring != dnm.ring:
        raise ValueError("generator-image maps need a common ring")
    sgens = _gen_layout(snm)
    dgens = _gen_layout(dnm)
    images = _normalize_images(images)
    if len(images) != len(sgens):
        raise ValueError(
            "expected %d generator images, got %d" % (len(sgens), len(images))
        )
    for g, entries in enumerate(images):
        for g2, q in entries:
            if not (0 <= g2 < len(dgens)):
                raise ValueError("image hits unknown generator %d" % (g2,))
            if q.nvars != dnm.ring.nvars:
                raise ValueError("image coefficient over the wrong ring")
            if dgens[g2][2] + q.degree != sgens[g][2]:
                raise ValueError("map is not degree preserving")
    return GradedMap(src, dst, images)


def _same_elimination(e1, e2) -> bool:
    if e1.free_cols != e2.free_cols:
        return False
    return [p.terms for p in e1.images] == [p.terms for p in e2.images]


def _full_monomial(ev, e):
    exps = [0] * ev.ring.nvars
    for i, k in enumerate(e):
        exps[ev.elim.free_cols[i]] = k
    return tuple(exps)


class _MapEval:
    """Degreewise matrices of a generator-image map, evaluators built once.

    rho is the inflation ring map for level edges and None when both values
    share a ring."""

    def __init__(self, src_value, dst_value, images, rho):
        self.sev = evaluator(src_value)
        self.dev = evaluator(dst_value)
        self.images = images
        self.rho = rho
        self.sgens = []
        for bi, ev in enumerate(self.sev.evals):
            for j, s in enumerate(ev.block.shifts):
                self.sgens.append((bi, j, s))
        self.dgens = []
        for bi, ev in enumerate(self.dev.evals):
            for j, s in enumerate(ev.block.shifts):
                self.dgens.append((bi, j, s))
        self.gen_of = {(bi, j): g for g, (bi, j, _) in enumerate(self.sgens)}
        self.nvars = self.sev.ring.nvars

    def dims(self, d):
        return self.sev.dim(d), self.dev.dim(d)

    def _expand_into(self, d, contributions):
        vecs = [None] * len(self.dev.evals)
        for g2, exps, c in contributions:
            bi, j, _ = self.dgens[g2]
            ev = self.dev.evals[bi]
            if ev.killed:
                continue
            basis = ev.basis(d)
            if vecs[bi] is None:
                vecs[bi] = [0] * len(basis)
            pos = None
            for t, be in enumerate(basis):
                if be == (j, exps):
                    pos = t
                    break
            if pos is None:
                raise ValueError(
                    "image of a basis element leaves the target module at degree %d"
                    % (d,)
                )
            vecs[bi][pos] += c
        return vecs

    def matrix(self, d):
        """(matrix, src_dim, dst_dim) at one degree."""
        cols = []
        for bi, ev in enumerate(self.sev.evals):
            red = ev.reducer(d)
            basis = ev.basis(d)
            for c in red.free_cols:
                j, e = basis[c]
                g = self.gen_of[(bi, j)]
                contributions = []
                if min(e, default=0) >= 0:
                    mono = poly(self.nvars, [(_full_monomial(ev, e), 1)])
                    base = self.rho.poly_image(mono) if self.rho is not None else mono
                    for g2, q in self.images[g]:
                        prod = base * q
                        ev2 = self.dev.evals[self.dgens[g2][0]]
                        for er, cr in ev2.elim.poly_image(prod).terms:
                            contributions.append((g2, er, cr))
                else:
                    # negative powers: transport the exponent directly
                    k = e[0]
                    for g2, q in self.images[g]:
                        ev2 = self.dev.evals[self.dgens[g2][0]]
                        qr = ev2.elim.poly_image(q)
                        if self.rho is None:
                            if not _same_elimination(ev.elim, ev2.elim):
                                raise ValueError(
                                    "cannot express negative powers in the target presentation"
                                )
                            for er, cr in qr.terms:
                                contributions.append((g2, (k + er[0],), cr))
                        else:
                            x = poly(self.nvars, [(_full_monomial(ev, (1,)), 1)])
                            xr = ev2.elim.poly_image(self.rho.poly_image(x))
                            if len(xr.terms) != 1:
                                raise ValueError(
                                    "cannot express negative powers in the target presentation"
                                )
                            em, cm = xr.terms[0]
                            scale = cm ** k
                            for er, cr in qr.terms:
                                key = tuple(k * a + b for a, b in zip(em, er))
                                contributions.append((g2, key, scale * cr))
                vecs = self._expand_into(d, contributions)
                col = []
                for bi2, ev2 in enumerate(self.dev.evals):
                    raw = vecs[bi2] if vecs[bi2] is not None else [0] * len(ev2.basis(d))
                    col.extend(ev2.reducer(d).reduce(raw))
                cols.append(col)
        dst_dim = self.dev.dim(d)
        mat = [[cols[c][r] for c in range(len(cols))] for r in range(dst_dim)]
        return mat, len(cols), dst_dim


def map_matrix(gm: GradedMap, d: int):
    mat, _, _ = _MapEval(gm.src, gm.dst, gm.images, None).matrix(d)
    return mat


def _first_noniso(me: _MapEval, window):
    """First degree where the map fails to be bijective, or None.

    Dimensions are compared before the matrix is built, so a plain size
    mismatch is reported even when the map itself has no finite expression."""
    a, b = window
    for d in range(a, b + 1):
        sdim, ddim = me.dims(d)
        if sdim != ddim:
            return d, sdim, ddim
        mat, _, _ = me.matrix(d)
        if linalg.rank(mat) != ddim:
            return d, sdim, ddim
    return None


# -- diagram modules -------------------------------------------------------------

@dataclass(frozen=True)
class MemberMap:
    """One component of a structure map: where a destination member reads
    from, and the generator images with destination-ring coefficients."""

    src_member: int
    images: tuple


@dataclass(frozen=True)
class DiagramModule:
    diagram: RingDiagram
    values: tuple  # per node: one module per member of the node family
    maps: tuple    # per edge: one MemberMap per destination member


def _as_list(seq, n, what):
    if isinstance(seq, dict):
        missing = [i for i in range(n) if i not in seq]
        if missing:
            raise ValueError("%s missing for index %d" % (what, missing[0]))
        return [seq[i] for i in range(n)]
    out = list(seq)
    if len(out) != n:
        raise ValueError("expected %d %s entries, got %d" % (n, what, len(out)))
    return out


def diagram_module(diagram: RingDiagram, values, maps) -> DiagramModule:
    shape = diagram.shape
    values = _as_list(values, len(shape.nodes), "node value")
    maps = _as_list(maps, len(shape.edges), "edge map")
    norm_values = []
    for i, node in enumerate(shape.nodes):
        fam = diagram.family(node.level)
        vals = tuple(values[i])
        if len(vals) != len(fam.members):
            raise ValueError("node %d needs one value per family member" % (i,))
        for m, v in zip(fam.members, vals):
            if normal_form(v).ring != member_ring(m):
                raise ValueError("node %d carries a value over the wrong ring" % (i,))
        norm_values.append(vals)
    norm_maps = []
    for ei, e in enumerate(shape.edges):
        a = shape.nodes[e.src]
        b = shape.nodes[e.dst]
        fam_src = diagram.family(a.level)
        fam_dst = diagram.family(b.level)
        mms = list(maps[ei])
        if len(mms) != len(fam_dst.members):
            raise ValueError("edge %d needs one map per destination member" % (ei,))
        out = []
        for mf, mm in enumerate(mms):
            if not (0 <= mm.src_member < len(fam_src.members)):
                raise ValueError("edge %d reads from an unknown member" % (ei,))
            if e.tag == TAG_QUOTIENT:
                if mm.src_member != mf:
                    raise ValueError("quotient edges stay within one component")
            elif e.tag == TAG_LEVEL:
                want = join(a.level, fam_dst.members[mf])
                if fam_src.members[mm.src_member] != want:
                    raise ValueError("level edges must pair members along joins")
            src_gens = _gen_layout(normal_form(norm_values[e.src][mm.src_member]))
            dst_gens = _gen_layout(normal_form(norm_values[e.dst][mf]))
            dst_ring = member_ring(fam_dst.members[mf])
            images = _normalize_images(mm.images)
            if len(images) != len(src_gens):
                raise ValueError(
                    "edge %d member %d: expected %d generator images"
                    % (ei, mf, len(src_gens))
                )
            for g, entries in enumerate(images):
                for g2, q in entries:
                    if not (0 <= g2 < len(dst_gens)):
                        raise ValueError("edge %d image hits unknown generator" % (ei,))
                    if q.nvars != dst_ring.nvars:
                        raise ValueError("edge %d image over the wrong ring" % (ei,))
                    if dst_gens[g2][2] + q.degree != src_gens[g][2]:
                        raise ValueError("edge %d map is not degree preserving" % (ei,))
            out.append(MemberMap(mm.src_member, images))
        norm_maps.append(tuple(out))
    return DiagramModule(diagram, tuple(norm_values), tuple(norm_maps))


def _strip_sets(m: FormalModule, allowed: CanonicalEulerSet) -> FormalModule:
    """Remove localization wrappers whose inverted classes the target
    localization inverts anyway; reject anything else."""
    if isinstance(m, Localize):
        for s in m.sets:
            if isinstance(s, CanonicalEulerSet):
                if not intmat.lattice_contains(list(s.avoid), allowed.avoid_rows()):
                    raise ValueError(
                        "cannot strip a localization the target does not subsume"
                    )
            elif isinstance(s, ExplicitEulerSet):
                for el in s.elements:
                    for f in el:
                        if intmat.hnf_contains(list(allowed.avoid), _integer_direction(f)):
                            raise ValueError(
                                "cannot strip a localization the target does not subsume"
                            )
            else:
                raise TypeError("unknown Euler set %r" % (s,))
        return _strip_sets(m.module, allowed)
    if isinstance(m, Shift):
        return Shift(_strip_sets(m.module, allowed), m.n)
    if isinstance(m, Sum):
        return Sum(tuple(_strip_sets(p, allowed) for p in m.parts))
    return m


# -- quasi-coherence and extension reports ---------------------------------------

VERDICT_ISO = "iso"
VERDICT_FAILS = "fails"
VERDICT_NOT_LOCALLY_FINITE = "not-locally-finite"


@dataclass(frozen=True)
class EdgeVerdict:
    edge: int
    src: int
    dst: int
    tag: str
    verdict: str
    member: Optional[int] = None
    first_failure_degree: Optional[int] = None
    dims: Optional[tuple] = None
    note: Optional[str] = None


@dataclass(frozen=True)
class QceReport:
    window: tuple
    edges: tuple
    quasi_coherent: Optional[bool] = None
    extended: Optional[bool] = None

    def to_json(self) -> dict:
        return {
            "window": list(self.window),
            "quasi_coherent": self.quasi_coherent,
            "extended": self.extended,
            "edges": [
                {
                    "edge": v.edge,
                    "src": v.src,
                    "dst": v.dst,
                    "tag": v.tag,
                    "verdict": v.verdict,
                    "member": v.member,
                    "first_failure_degree": v.first_failure_degree,
                    "dims": list(v.dims) if v.dims is not None else None,
                    "note": v.note,
                }
                for v in self.edges
            ],
        }


def _check_edges(M: DiagramModule, window, tag):
    shape = M.diagram.shape
    verdicts = []
    for ei, e in enumerate(shape.edges):
        if e.tag != tag:
            continue
        a = shape.nodes[e.src]
        b = shape.nodes[e.dst]
        fam_dst = M.diagram.family(b.level)
        fam_src = M.diagram.family(a.level)
        verdict = EdgeVerdict(ei, e.src, e.dst, e.tag, VERDICT_ISO)
        try:
            for mf, mm in enumerate(M.maps[ei]):
                f = fam_dst.members[mf]
                target = M.values[e.dst][mf]
                if tag == TAG_QUOTIENT:
                    lhs = localize(
                        M.values[e.src][mm.src_member],
                        canonical_component_set(b.quotient, f),
                    )
                    rho = None
                else:
                    kf = fam_src.members[mm.src_member]
                    rho = inflation_ring_map(kf, f)
                    core = _strip_sets(
                        M.values[e.src][mm.src_member],
                        canonical_component_set(b.quotient, kf),
                    )
                    lhs = localize(
                        TensorOver(rho, core),
                        canonical_component_set(b.quotient, f),
                    )
                res = _first_noniso(_MapEval(lhs, target, mm.images, None), window)
                if res is not None:
                    d, sdim, ddim = res
                    verdict = EdgeVerdict(
                        ei, e.src, e.dst, e.tag, VERDICT_FAILS, mf, d, (sdim, ddim)
                    )
                    break
        except NotLocallyFinite as exc:
            verdict = EdgeVerdict(
                ei, e.src, e.dst, e.tag, VERDICT_NOT_LOCALLY_FINITE, note=str(exc)
            )
        verdicts.append(verdict)
    return tuple(verdicts)


def is_quasicoherent(M: DiagramModule, window) -> QceReport:
    """Whether every further localization map is an isomorphism in the
    window.  Components that cannot be evaluated finitely are reported, not
    passed."""
    verdicts = _check_edges(M, window, TAG_QUOTIENT)
    ok = all(v.verdict == VERDICT_ISO for v in verdicts)
    return QceReport(tuple(window), verdicts, quasi_coherent=ok)


def is_extended(M: DiagramModule, window) -> QceReport:
    """Whether every inflation adjunct (base change then localization) is an
    isomorphism in the window."""
    verdicts = _check_edges(M, window, TAG_LEVEL)
    ok = all(v.verdict == VERDICT_ISO for v in verdicts)
    return QceReport(tuple(window), verdicts, extended=ok)


def qce_report(M: DiagramModule, window) -> QceReport:
    """Both checks in one report."""
    q = is_quasicoherent(M, window)
    e = is_extended(M, window)
    return QceReport(
        tuple(window),
        q.edges + e.edges,
        quasi_coherent=q.quasi_coherent,
        extended=e.extended,
    )


# -- the canonical constructor ---------------------------------------------------

def _identity_images(value: FormalModule):
    nm = normal_form(value)
    one = constant(nm.ring.nvars, 1)
    return tuple(((g, one),) for g in range(len(_gen_layout(nm))))


def _compose_images(im1, rho, im2):
    # im1 with coefficients over the middle ring, im2 over the target ring
    out = []
    for entries in im1:
        acc = {}
        for g1, q1 in entries:
            q1d = rho.poly_image(q1) if rho is not None else q1
            for g2, q2 in im2[g1]:
                p = q1d * q2
                acc[g2] = acc[g2] + p if g2 in acc else p
        out.append(tuple((g, q) for g, q in sorted(acc.items()) if not q.is_zero))
    return tuple(out)


def delta(diagram: RingDiagram, phi, basing) -> DiagramModule:
    """Assemble the diagram with values given by localizing fixed-level data.

    phi maps each sampled subgroup L to one unlocalized module per member of
    the level-L family.  basing maps each cover pair (K, L) to the
    generator images of phi[K] inside phi[L], one image list per member of
    the level-L family, read at the member join(K, F).  Longer pairs may be
    supplied; every supplied or composed route between two levels must
    agree, else the data is rejected.
    """
    shape = diagram.shape
    if shape.kind != KIND_INFLATION:
        raise ValueError("only inflation shapes carry module diagrams")
    sample = shape.sample
    for l in sample:
        if l not in phi:
            raise ValueError("fixed-level data missing for level %r" % (l,))
        fam = diagram.family(l)
        vals = tuple(phi[l])
        if len(vals) != len(fam.members):
            raise ValueError("fixed-level data at %r needs one module per member" % (l,))
        for m, v in zip(fam.members, vals):
            nm = normal_form(v)
            if nm.ring != member_ring(m):
                raise ValueError("fixed-level module over the wrong ring")
            if any(b.sets for b in nm.blocks):
                raise ValueError("fixed-level data must be unlocalized")

    strict = [
        (k, l)
        for k in sample
        for l in sample
        if k != l and contains(k, l)
    ]
    covers = {
        (k, l)
        for k, l in strict
        if not any(contains(k, j) and contains(j, l) and j != k and j != l for j in sample)
    }
    for key in basing:
        if key not in strict:
            raise ValueError("basing data for a pair outside the sample")
    for key in covers:
        if key not in basing:
            raise ValueError("basing data missing for the cover %r <= %r" % (key[1], key[0]))

    def normalized(k, l, data):
        fam = diagram.family(l)
        data = tuple(data)
        if len(data) != len(fam.members):
            raise ValueError("basing data needs one image list per member")
        out = []
        for f, images in zip(fam.members, data):
            kf = join(k, f)
            src_gens = _gen_layout(normal_form(phi[k][diagram.family(k).members.index(kf)]))
            images = _normalize_images(images)
            if len(images) != len(src_gens):
                raise ValueError("basing data has the wrong number of generators")
            out.append(images)
        return tuple(out)

    given = {key: normalized(key[0], key[1], basing[key]) for key in basing}

    pair_images = {}

    def images_for(k, l):
        if (k, l) in pair_images:
            return pair_images[(k, l)]
        candidates = []
        if (k, l) in given:
            candidates.append(given[(k, l)])
        for j in sample:
            if j in (k, l) or not (contains(k, j) and contains(j, l)):
                continue
            if (k, j) not in covers:
                continue
            upper = given[(k, j)]
            lower = images_for(j, l)
            fam_l = diagram.family(l)
            fam_j = diagram.family(j)
            composed = []
            for fi, f in enumerate(fam_l.members):
                jf = join(j, f)
                mid = fam_j.members.index(jf)
                rho = inflation_ring_map(jf, f)
                composed.append(_compose_images(upper[mid], rho, lower[fi]))
            candidates.append(tuple(composed))
        if not candidates:
            raise ValueError("no basing route from %r to %r" % (k, l))
        for other in candidates[1:]:
            if other != candidates[0]:
                raise ValueError("incompatible basing data between %r and %r" % (k, l))
        pair_images[(k, l)] = candidates[0]
        return candidates[0]

    values = []
    for n in shape.nodes:
        fam = diagram.family(n.level)
        vals = []
        for fi, f in enumerate(fam.members):
            vals.append(localize(phi[n.level][fi], canonical_component_set(n.quotient, f)))
        values.append(tuple(vals))

    maps = []
    for e in shape.edges:
        a = shape.nodes[e.src]
        b = shape.nodes[e.dst]
        fam_dst = diagram.family(b.level)
        if e.tag == TAG_QUOTIENT:
            maps.append(
                tuple(
                    MemberMap(fi, _identity_images(phi[b.level][fi]))
                    for fi in range(len(fam_dst.members))
                )
            )
        else:
            fam_src = diagram.family(a.level)
            pair = images_for(a.level, b.level)
            mms = []
            for fi, f in enumerate(fam_dst.members):
                kf = join(a.level, f)
                mms.append(MemberMap(fam_src.members.index(kf), pair[fi]))
            maps.append(tuple(mms))
    return diagram_module(diagram, values, maps)


def structure_module(diagram: RingDiagram) -> DiagramModule:
    """The diagram of localized structure rings as a module over itself."""
    phi = {
        l: tuple(free(member_ring(m)) for m in fam.members)
        for l, fam in diagram.levels
    }
    basing = {}
    sample = diagram.shape.sample
    for k in sample:
        for l in sample:
            if k == l or not contains(k, l):
                continue
            if any(contains(k, j) and contains(j, l) and j not in (k, l) for j in sample):
                continue
            fam = diagram.family(l)
            basing[(k, l)] = tuple(
                (((0, constant(member_ring(f).nvars, 1)),),) for f in fam.members
            )
    return delta(diagram, phi, basing)


# -- whole-edge matrices and fills -----------------------------------------------

class _EdgeEval:
    """Structure map of one edge as matrices over all members at once."""

    def __init__(self, diagram, node_src, node_dst, vals_src, vals_dst, edge_maps):
        fam_src = diagram.family(node_src.level)
        fam_dst = diagram.family(node_dst.level)
        same_level = node_src.level == node_dst.level
        self.src_evs = [evaluator(v) for v in vals_src]
        self.dst_evs = [evaluator(v) for v in vals_dst]
        self.parts = []
        for mf, mm in enumerate(edge_maps):
            if same_level:
                rho = None
            else:
                kf = fam_src.members[mm.src_member]
                rho = inflation_ring_map(kf, fam_dst.members[mf])
            self.parts.append(
                (mf, mm.src_member, _MapEval(vals_src[mm.src_member], vals_dst[mf], mm.images, rho))
            )

    def matrix(self, d):
        src_off = [0]
        for ev in self.src_evs:
            src_off.append(src_off[-1] + ev.dim(d))
        dst_off = [0]
        for ev in self.dst_evs:
            dst_off.append(dst_off[-1] + ev.dim(d))
        mat = [[0] * src_off[-1] for _ in range(dst_off[-1])]
        for mf, ms, me in self.parts:
            block, sdim, ddim = me.matrix(d)
            for r in range(ddim):
                for c in range(sdim):
                    if block[r][c] != 0:
                        mat[dst_off[mf] + r][src_off[ms] + c] = block[r][c]
        return mat, src_off[-1], dst_off[-1]


def edge_matrix(M: DiagramModule, edge_index: int, d: int):
    """Structure map of one edge as a plain rational matrix at degree d."""
    e = M.diagram.shape.edges[edge_index]
    mat, _, _ = _EdgeEval(
        M.diagram,
        M.diagram.shape.nodes[e.src],
        M.diagram.shape.nodes[e.dst],
        M.values[e.src],
        M.values[e.dst],
        M.maps[edge_index],
    ).matrix(d)
    return mat


def subdiagram(M: DiagramModule, node_indices):
    """Values and maps of the module restricted to a subset of nodes."""
    keep = set(node_indices)
    values = {i: M.values[i] for i in keep}
    maps = {
        ei: M.maps[ei]
        for ei, e in enumerate(M.diagram.shape.edges)
        if e.src in keep and e.dst in keep
    }
    return values, maps


def _anchor(shape, present, n):
    preds = [s for s in present if s != n and node_leq(shape.nodes[s], shape.nodes[n])]
    if not preds:
        raise ValueError("no fill-in position for node %d" % (n,))
    maximal = [
        s
        for s in preds
        if not any(t != s and node_leq(shape.nodes[s], shape.nodes[t]) for t in preds)
    ]
    if len(maximal) != 1:
        raise ValueError("ambiguous fill-in position for node %d" % (n,))
    return maximal[0]


def _extend_value(diagram, node_from, node_to, vals_from):
    fam_from = diagram.family(node_from.level)
    fam_to = diagram.family(node_to.level)
    out = []
    for f in fam_to.members:
        m_src = join(node_from.level, f)
        idx = fam_from.members.index(m_src)
        core = _strip_sets(vals_from[idx], canonical_component_set(node_to.quotient, m_src))
        if node_from.level != node_to.level:
            core = TensorOver(inflation_ring_map(m_src, f), core)
        out.append(localize(core, canonical_component_set(node_to.quotient, f)))
    return tuple(out)


def _unit_member_maps(diagram, node_src, node_dst, vals_src):
    fam_src = diagram.family(node_src.level)
    fam_dst = diagram.family(node_dst.level)
    out = []
    for f in fam_dst.members:
        idx = fam_src.members.index(join(node_src.level, f))
        out.append(MemberMap(idx, _identity_images(vals_src[idx])))
    return tuple(out)


def fill_by_extension(diagram: RingDiagram, values: dict, maps: dict, fill=None):
    """Extend a partial module along the canonical base-change maps.

    Each filled node takes the value of its unique closest predecessor
    among the given nodes, base changed along the connecting ring maps.
    Returns (values, maps) dictionaries covering the given entries plus the
    filled ones; structure maps are derived where the generators transport,
    and the given entries are returned untouched.
    """
    shape = diagram.shape
    present = sorted(values)
    targets = sorted(set(fill)) if fill is not None else [
        i for i in range(len(shape.nodes)) if i not in values
    ]
    values_out = dict(values)
    maps_out = dict(maps)
    anchors = {i: i for i in present}
    for n in targets:
        if n in values_out:
            continue
        p = _anchor(shape, present, n)
        anchors[n] = p
        values_out[n] = _extend_value(diagram, shape.nodes[p], shape.nodes[n], values[p])
    for ei, e in enumerate(shape.edges):
        if ei in maps_out:
            continue
        if e.src not in values_out or e.dst not in values_out:
            continue
        a_src = anchors.get(e.src)
        a_dst = anchors.get(e.dst)
        if a_src is None or a_dst is None:
            continue
        node_src = shape.nodes[e.src]
        node_dst = shape.nodes[e.dst]
        if a_src == a_dst:
            maps_out[ei] = _unit_member_maps(diagram, node_src, node_dst, values_out[e.src])
            continue
        base = next(
            (
                bi
                for bi, be in enumerate(shape.edges)
                if be.src == a_src and be.dst == a_dst and bi in maps
            ),
            None,
        )
        if base is None:
            raise ValueError("cannot derive the structure map for edge %d" % (ei,))
        fam_dst = diagram.family(node_dst.level)
        fam_src = diagram.family(node_src.level)
        anchor_dst = shape.nodes[a_dst]
        fam_anchor_dst = diagram.family(anchor_dst.level)
        mms = []
        for f in fam_dst.members:
            f_up = join(anchor_dst.level, f)
            mm0 = maps[base][fam_anchor_dst.members.index(f_up)]
            rho = None if f_up == f else inflation_ring_map(f_up, f)
            images = tuple(
                tuple((g2, rho.poly_image(q) if rho is not None else q) for g2, q in entries)
                for entries in mm0.images
            )
            mms.append(MemberMap(fam_src.members.index(join(node_src.level, f)), images))
        maps_out[ei] = tuple(mms)
    return values_out, maps_out


@dataclass(frozen=True)
class DegreewiseValue:
    """A value known only through its exact dimensions in a window."""

    window: tuple
    dims: tuple

    def dim(self, d: int) -> int:
        a, b = self.window
        if not (a <= d <= b):
            raise ValueError("degree %d outside window [%d, %d]" % (d, a, b))
        return self.dims[d - a]


def fill_by_pullback(diagram: RingDiagram, values: dict, maps: dict, window, fill=None):
    """Fill missing nodes with the limit of their given successors.

    The limit is computed degreewise over the sub-poset of given successor
    nodes, using the given structure maps; the result is returned as exact
    dimensions per degree.  Nodes with no given successors get zero."""
    shape = diagram.shape
    present = sorted(values)
    targets = sorted(set(fill)) if fill is not None else [
        i for i in range(len(shape.nodes)) if i not in values
    ]
    a, b = window
    node_evs = {s: [evaluator(v) for v in values[s]] for s in present}
    edge_evs = {}
    out = {}
    for n in targets:
        if n in values:
            continue
        succ = [
            s for s in present if s != n and node_leq(shape.nodes[n], shape.nodes[s])
        ]
        pos = {s: t for t, s in enumerate(succ)}
        sub_edges = [
            ei
            for ei, e in enumerate(shape.edges)
            if e.src in pos and e.dst in pos and ei in maps
        ]
        for ei in sub_edges:
            if ei not in edge_evs:
                e = shape.edges[ei]
                edge_evs[ei] = _EdgeEval(
                    diagram,
                    shape.nodes[e.src],
                    shape.nodes[e.dst],
                    values[e.src],
                    values[e.dst],
                    maps[ei],
                )
        dims = []
        for d in range(a, b + 1):
            node_dims = [sum(ev.dim(d) for ev in node_evs[s]) for s in succ]
            off = [0]
            for x in node_dims:
                off.append(off[-1] + x)
            rows = []
            for ei in sub_edges:
                e = shape.edges[ei]
                mat, sdim, ddim = edge_evs[ei].matrix(d)
                i0 = off[pos[e.src]]
                j0 = off[pos[e.dst]]
                for r in range(ddim):
                    row = [0] * off[-1]
                    for c in range(sdim):
                        row[i0 + c] = mat[r][c]
                    row[j0 + r] -= 1
                    rows.append(row)
            dims.append(off[-1] - linalg.rank(rows) if rows else off[-1])
        out[n] = DegreewiseValue((a, b), tuple(dims))
    return out


# -- arithmetic fracture ---------------------------------------------------------

def _prime_factorization(n: int) -> dict:
    if n < 1:
        raise ValueError("expected a positive integer")
    out = {}
    p = 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def _check_primes(primes):
    out = []
    for p in primes:
        p = int(p)
        if p < 2 or _prime_factorization(p) != {p: 1}:
            raise ValueError("%r is not a prime" % (p,))
        out.append(p)
    return sorted(set(out))


def invariant_factors(rows, ncols: int):
    """Free rank and torsion invariant factors of the abelian group
    presented by relation rows on ncols generators."""
    rows = [list(r) for r in rows]
    for r in rows:
        if len(r) != ncols:
            raise ValueError("relation row of the wrong length")
    divs = intmat.elementary_divisors(rows) if rows else []
    free_rank = ncols - len(divs)
    return free_rank, tuple(d for d in divs if d > 1)


def p_completion(free_rank: int, factors, p: int):
    """(free rank, p-power torsion) of the p-completion."""
    parts = []
    for d in factors:
        e = _prime_factorization(d).get(p, 0)
        if e:
            parts.append(p ** e)
    return free_rank, tuple(parts)


def fracture_reconstruct(rows, ncols: int, primes) -> dict:
    """Reassemble a finitely generated abelian group from its rationalization
    and the listed completions.  The prime set must cover the torsion; a
    missing prime is rejected rather than silently dropped."""
    primes = _check_primes(primes)
    free_rank, factors = invariant_factors(rows, ncols)
    torsion_primes = set()
    for d in factors:
        torsion_primes.update(_prime_factorization(d))
    missing = sorted(torsion_primes - set(primes))
    if missing:
        raise ValueError("prime set misses torsion primes %s" % (missing,))
    rebuilt = []
    for d in factors:
        fac = _prime_factorization(d)
        x = 1
        for p in primes:
            x *= p ** fac.get(p, 0)
        rebuilt.append(x)
    assert tuple(rebuilt) == factors
    return {"free_rank": free_rank, "invariant_factors": list(factors)}


def corner_adjunction(rows, ncols: int, primes) -> dict:
    """Unit of the comparison with the pullback of the rationalization
    against the product of the listed completions, glued over the
    rationalized product.  Reports whether the unit is an isomorphism."""
    primes = _check_primes(primes)
    free_rank, factors = invariant_factors(rows, ncols)
    completions = {p: p_completion(free_rank, factors, p) for p in primes}
    pullback = []
    for d in factors:
        fac = _prime_factorization(d)
        x = 1
        for p in primes:
            x *= p ** fac.get(p, 0)
        if x > 1:
            pullback.append(x)
    unit_iso = tuple(pullback) == factors
    return {
        "free_rank": free_rank,
        "invariant_factors": list(factors),
        "rational_dimension": free_rank,
        "completions": {
            p: {"free_rank": fr, "torsion": list(parts)}
            for p, (fr, parts) in completions.items()
        },
        "pullback_free_rank": free_rank,
        "pullback_invariant_factors": pullback,
        "unit_iso": unit_iso,
    }


# -- serialization ---------------------------------------------------------------

def shape_to_json(shape: DiagramShape) -> dict:
    return {
        "kind": shape.kind,
        "sample": [subgroup_to_json(s) for s in shape.sample],
    }


def shape_from_json(obj) -> DiagramShape:
    return build_diagram_shape(obj["kind"], [subgroup_from_json(s) for s in obj["sample"]])


def diagram_to_json(diagram: RingDiagram) -> dict:
    return {
        "shape": shape_to_json(diagram.shape),
        "families": [family_to_json(fam) for _, fam in diagram.levels],
    }


def diagram_from_json(obj) -> RingDiagram:
    shape = shape_from_json(obj["shape"])
    families = {}
    for fj in obj["families"]:
        fam = family_from_json(fj)
        families[fam.level] = fam
    return structure_diagram(shape, families)


def _member_map_to_json(mm: MemberMap) -> dict:
    return {
        "src_member": mm.src_member,
        "images": [
            [[g, poly_to_json(q)] for g, q in entries] for entries in mm.images
        ],
    }


def _member_map_from_json(obj, nvars) -> MemberMap:
    images = tuple(
        tuple((int(g), poly_from_json(qj, nvars)) for g, qj in entries)
        for entries in obj["images"]
    )
    return MemberMap(int(obj["src_member"]), images)


def diagram_module_to_json(M: DiagramModule) -> dict:
    return {
        "diagram": diagram_to_json(M.diagram),
        "values": [[module_to_json(v) for v in vals] for vals in M.values],
        "maps": [[_member_map_to_json(mm) for mm in mms] for mms in M.maps],
    }


def diagram_module_from_json(obj) -> DiagramModule:
    diagram = diagram_from_json(obj["diagram"])
    shape = diagram.shape
    values = [
        tuple(module_from_json(vj) for vj in vals) for vals in obj["values"]
    ]
    maps = []
    for ei, mms in enumerate(obj["maps"]):
        e = shape.edges[ei]
        fam_dst = diagram.family(shape.nodes[e.dst].level)
        maps.append(
            tuple(
                _member_map_from_json(mj, member_ring(fam_dst.members[mf]).nvars)
                for mf, mj in enumerate(mms)
            )
        )
    return diagram_module(diagram, values, maps)
