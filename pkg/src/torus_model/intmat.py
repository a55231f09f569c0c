"""Exact integer matrix routines: Hermite and Smith normal forms, kernels,
saturation.

Matrices are lists of rows of Python ints and all transforms are unimodular,
so every computation here is exact.  Row convention throughout: a matrix
presents the lattice spanned by its rows inside Z^n.
"""

from __future__ import annotations


def xgcd(a, b):
    """Return (g, s, t) with g = gcd(a, b) >= 0 and s*a + t*b = g.

    t is reduced mod a/g, so t == 0 whenever a divides b.  The pivot
    transforms built on top of this then leave the pivot row alone in
    the divisible case, which is what makes the SNF sweeps terminate.
    """
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r != 0:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    if old_r < 0:
        old_r, old_s, old_t = -old_r, -old_s, -old_t
    if old_r and a:
        aa, bb = a // old_r, b // old_r
        k = old_t // aa
        old_t -= k * aa
        old_s += k * bb
    return old_r, old_s, old_t


def mat_copy(rows):
    return [list(r) for r in rows]


def identity(n):
    return [[1 if i == j else 0 for j in range(n)] for i in range(n)]


def mat_mul(a, b):
    n, k = len(a), len(b)
    m = len(b[0]) if b else 0
    out = [[0] * m for _ in range(n)]
    for i in range(n):
        ai = a[i]
        oi = out[i]
        for t in range(k):
            c = ai[t]
            if c:
                bt = b[t]
                for j in range(m):
                    oi[j] += c * bt[j]
    return out


def hnf(rows, ncols=None):
    """Row-style Hermite normal form of the lattice spanned by `rows`.

    Returns a new matrix whose rows are a canonical basis: pivots positive,
    pivot columns strictly increasing, entries above each pivot reduced to
    [0, pivot).  Zero rows are dropped, so the result of the empty lattice
    is [].
    """
    a = mat_copy(rows)
    if ncols is None:
        ncols = len(a[0]) if a else 0
    m = len(a)
    pivot_rows = []
    r = 0
    for c in range(ncols):
        # gather a nonzero entry in column c at row r by gcd steps
        piv = None
        for i in range(r, m):
            if a[i][c] != 0:
                piv = i
                break
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        for i in range(r + 1, m):
            while a[i][c] != 0:
                g, s, t = xgcd(a[r][c], a[i][c])
                # rows (r, i) <- (s*r + t*i, -(i/g)*r + (r/g)*i); det = 1
                u, v = a[r][c] // g, a[i][c] // g
                row_r = [s * x + t * y for x, y in zip(a[r], a[i])]
                row_i = [-v * x + u * y for x, y in zip(a[r], a[i])]
                a[r], a[i] = row_r, row_i
        if a[r][c] < 0:
            a[r] = [-x for x in a[r]]
        pivot_rows.append((r, c))
        r += 1
        if r == m:
            break
    # reduce entries above each pivot; pivot order matters: row r has zeros
    # left of its pivot, so earlier reductions stay intact
    for r, c in pivot_rows:
        p = a[r][c]
        for i in range(r):
            q = a[i][c] // p  # floor division: leaves remainder in [0, p)
            if q:
                a[i] = [x - q * y for x, y in zip(a[i], a[r])]
    return [a[r] for r, _ in pivot_rows]


def hnf_rank(rows):
    return len(hnf(rows))


def snf(rows):
    """Smith normal form.  Returns (d, u, v, vinv) where
    diag(d) = u * A * v, u and v unimodular, d nonnegative with
    d[i] | d[i+1], and vinv = v^(-1).

    d is padded/truncated to min(m, n) entries; trailing zeros mean rank
    deficiency.
    """
    a = mat_copy(rows)
    m = len(a)
    n = len(a[0]) if a else 0
    u = identity(m)
    v = identity(n)
    vinv = identity(n)

    def row_op(i, j, s, t, uu, vv):
        # (row_i, row_j) <- (s*row_i + t*row_j, -vv*row_i + uu*row_j)
        for mat in (a, u):
            ri = [s * x + t * y for x, y in zip(mat[i], mat[j])]
            rj = [-vv * x + uu * y for x, y in zip(mat[i], mat[j])]
            mat[i], mat[j] = ri, rj

    def col_op(i, j, s, t, uu, vv):
        for k in range(m):
            x, y = a[k][i], a[k][j]
            a[k][i], a[k][j] = s * x + t * y, -vv * x + uu * y
        for k in range(n):
            x, y = v[k][i], v[k][j]
            v[k][i], v[k][j] = s * x + t * y, -vv * x + uu * y
        # inverse of [[s, -vv], [t, uu]] acting on columns is applied to
        # vinv rows: [[uu, vv], [-t, s]]
        ri = [uu * x + vv * y for x, y in zip(vinv[i], vinv[j])]
        rj = [-t * x + s * y for x, y in zip(vinv[i], vinv[j])]
        vinv[i], vinv[j] = ri, rj

    def swap_rows(i, j):
        a[i], a[j] = a[j], a[i]
        u[i], u[j] = u[j], u[i]

    def swap_cols(i, j):
        for k in range(m):
            a[k][i], a[k][j] = a[k][j], a[k][i]
        for k in range(n):
            v[k][i], v[k][j] = v[k][j], v[k][i]
        vinv[i], vinv[j] = vinv[j], vinv[i]

    r = 0
    size = min(m, n)
    while r < size:
        # find a pivot
        piv = None
        for i in range(r, m):
            for j in range(r, n):
                if a[i][j] != 0:
                    piv = (i, j)
                    break
            if piv:
                break
        if piv is None:
            break
        swap_rows(r, piv[0])
        swap_cols(r, piv[1])
        while True:
            dirty = False
            for i in range(r + 1, m):
                if a[i][r] != 0:
                    g, s, t = xgcd(a[r][r], a[i][r])
                    row_op(r, i, s, t, a[r][r] // g, a[i][r] // g)
                    dirty = True
            for j in range(r + 1, n):
                if a[r][j] != 0:
                    g, s, t = xgcd(a[r][r], a[r][j])
                    col_op(r, j, s, t, a[r][r] // g, a[r][j] // g)
                    dirty = True
            if not dirty:
                break
        if a[r][r] < 0:
            a[r] = [-x for x in a[r]]
            u[r] = [-x for x in u[r]]
        r += 1
    # enforce divisibility d[i] | d[i+1]
    def clean_block(i):
        # re-diagonalize the 2x2 block at (i, i+1); terminates because the
        # pivot strictly decreases until it divides both cleared entries
        j = i + 1
        while True:
            dirty = False
            if a[j][i] != 0:
                g, s, t = xgcd(a[i][i], a[j][i])
                row_op(i, j, s, t, a[i][i] // g, a[j][i] // g)
                dirty = True
            if a[i][j] != 0:
                g, s, t = xgcd(a[i][i], a[i][j])
                col_op(i, j, s, t, a[i][i] // g, a[i][j] // g)
                dirty = True
            if not dirty:
                break
        if a[i][i] < 0:
            a[i] = [-x for x in a[i]]
            u[i] = [-x for x in u[i]]
        if a[j][j] < 0:
            for k in range(m):
                a[k][j] = -a[k][j]
            for k in range(n):
                v[k][j] = -v[k][j]
            vinv[j] = [-x for x in vinv[j]]

    changed = True
    while changed:
        changed = False
        for i in range(r - 1):
            if a[i + 1][i + 1] % a[i][i] != 0:
                # add column i+1 to column i so the gcd appears, then clean
                col_op(i, i + 1, 1, 1, 1, 0)
                clean_block(i)
                changed = True
    d = [a[i][i] for i in range(size)]
    return d, u, v, vinv


def elementary_divisors(rows):
    """Nonzero diagonal entries of the Smith form, each > 0."""
    d, _, _, _ = snf(rows)
    return [x for x in d if x != 0]


def left_kernel(rows):
    """Basis (in HNF) of {x in Z^m : x * A = 0}."""
    m = len(rows)
    if m == 0:
        return []
    d, u, _, _ = snf(rows)
    rank = sum(1 for x in d if x != 0)
    ker = [u[i] for i in range(rank, m)]
    return hnf(ker, ncols=m)


def saturation(rows, ncols=None):
    """HNF basis of (span_Q(rows) intersect Z^n)."""
    if ncols is None:
        ncols = len(rows[0]) if rows else 0
    if not rows:
        return []
    d, _, _, vinv = snf(rows)
    rank = sum(1 for x in d if x != 0)
    return hnf([vinv[i] for i in range(rank)], ncols=ncols)


def index_in_saturation(rows):
    """Index of the lattice in its saturation: product of the nonzero
    elementary divisors."""
    out = 1
    for x in elementary_divisors(rows):
        out *= x
    return out


def hnf_contains(basis, vec):
    """Whether vec lies in the lattice with HNF basis `basis`."""
    v = list(vec)
    for row in basis:
        c = next((j for j, x in enumerate(row) if x != 0), None)
        if c is None:
            continue
        if v[c] % row[c] != 0:
            return False
        q = v[c] // row[c]
        if q:
            v = [x - q * y for x, y in zip(v, row)]
    return all(x == 0 for x in v)


def hnf_solve(basis, vec):
    """Coefficients writing vec as an integer combination of the HNF basis
    rows, or None."""
    v = list(vec)
    coeffs = []
    for row in basis:
        c = next((j for j, x in enumerate(row) if x != 0), None)
        if c is None:
            coeffs.append(0)
            continue
        if v[c] % row[c] != 0:
            return None
        q = v[c] // row[c]
        coeffs.append(q)
        if q:
            v = [x - q * y for x, y in zip(v, row)]
    if any(x != 0 for x in v):
        return None
    return coeffs


def lattice_contains(a_basis, b_rows):
    """Whether every row of b_rows lies in the lattice spanned by a_basis
    (a_basis in HNF)."""
    return all(hnf_contains(a_basis, r) for r in b_rows)


def lattice_sum(a_rows, b_rows, ncols):
    return hnf(list(a_rows) + list(b_rows), ncols=ncols)


def lattice_intersect(a_rows, b_rows, ncols):
    """HNF basis of the intersection of the two row lattices."""
    a = [list(r) for r in a_rows]
    b = [list(r) for r in b_rows]
    if not a or not b:
        return []
    stacked = a + b
    ker = left_kernel(stacked)
    vecs = []
    for z in ker:
        v = [0] * ncols
        for i, c in enumerate(z[: len(a)]):
            if c:
                v = [x + c * y for x, y in zip(v, a[i])]
        vecs.append(v)
    return hnf(vecs, ncols=ncols)
