"""Exact linear algebra over the rationals.

Everything here works on plain lists of lists of Fraction (or int; entries
are coerced).  Matrices act on column vectors: y[i] = sum_j m[i][j] x[j].
No floats anywhere; ranks and kernels are exact, so homology dimensions
computed downstream are exact integers.
"""

from fractions import Fraction
from typing import Optional


def frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    return Fraction(x)


def frac_rows(rows):
    return [[frac(x) for x in row] for row in rows]


def rref(rows, ncols: Optional[int] = None):
    """Reduced row echelon form.

    Returns (reduced_rows, pivot_cols) where reduced_rows contains only the
    nonzero rows, each scaled to a leading 1, with zeros above and below
    every pivot.  pivot_cols is strictly increasing.
    """
    a = frac_rows(rows)
    if not a:
        return [], []
    n = ncols if ncols is not None else len(a[0])
    pivots = []
    r = 0
    for c in range(n):
        piv = None
        for i in range(r, len(a)):
            if a[i][c] != 0:
                piv = i
                break
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        inv = a[r][c]
        a[r] = [x / inv for x in a[r]]
        for i in range(len(a)):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
        if r == len(a):
            break
    return a[:r], pivots


def rank(rows) -> int:
    return len(rref(rows)[1])


def nullspace(rows, ncols: Optional[int] = None):
    """Basis of {x : A x = 0}, one vector per free column of A."""
    if not rows:
        n = ncols if ncols is not None else 0
        return [[frac(1) if j == i else frac(0) for j in range(n)] for i in range(n)]
    n = ncols if ncols is not None else len(rows[0])
    red, pivots = rref(rows, n)
    pivset = set(pivots)
    basis = []
    for c in range(n):
        if c in pivset:
            continue
        vec = [frac(0)] * n
        vec[c] = frac(1)
        for row, p in zip(red, pivots):
            vec[p] = -row[c]
        basis.append(vec)
    return basis


def solve(rows, rhs):
    """One exact solution of A x = b, or None if inconsistent.

    Free variables are set to zero.
    """
    if not rows:
        return [] if all(frac(b) == 0 for b in rhs) else None
    n = len(rows[0])
    aug = [[frac(x) for x in row] + [frac(b)] for row, b in zip(rows, rhs)]
    red, pivots = rref(aug, n + 1)
    if n in pivots:
        return None
    x = [frac(0)] * n
    for row, p in zip(red, pivots):
        x[p] = row[n]
    return x


def mat_mul(a, b):
    if not a:
        return []
    inner = len(b)
    out_cols = len(b[0]) if b else 0
    return [
        [sum((row[k] * b[k][j] for k in range(inner)), frac(0)) for j in range(out_cols)]
        for row in a
    ]


def mat_vec(a, v):
    return [sum((row[k] * v[k] for k in range(len(v))), frac(0)) for row in a]


def identity(n):
    return [[frac(1) if i == j else frac(0) for j in range(n)] for i in range(n)]


def is_zero_matrix(rows) -> bool:
    return all(x == 0 for row in rows for x in row)


class CosetReducer:
    """Quotient of Q^n by the span of a list of relation vectors.

    dim is the quotient dimension; reduce maps a vector to its coordinates
    in the basis given by the images of the free-column unit vectors, and
    lift returns the canonical representative (zero in every pivot column).
    """

    def __init__(self, relations, n: int):
        self.n = n
        self.rows, self.pivots = rref(relations, n)
        pivset = set(self.pivots)
        self.free_cols = [c for c in range(n) if c not in pivset]
        self.dim = len(self.free_cols)

    def reduce(self, vec):
        v = [frac(x) for x in vec]
        for row, p in zip(self.rows, self.pivots):
            if v[p] != 0:
                f = v[p]
                v = [x - f * y for x, y in zip(v, row)]
        return [v[c] for c in self.free_cols]

    def lift(self, coords):
        vec = [frac(0)] * self.n
        for c, x in zip(self.free_cols, coords):
            vec[c] = frac(x)
        return vec

    def reduce_matrix(self, columns):
        """Reduce a list of vectors; returns the matrix with reduce(v) as columns."""
        cols = [self.reduce(v) for v in columns]
        return [[col[i] for col in cols] for i in range(self.dim)]


def kernel_dim(rows, ncols: int) -> int:
    return ncols - rank(rows)


def homology_dim(d_out_rank: int, d_in_rank: int, ncols: int) -> int:
    # dim ker(out) - rank(in); caller guarantees out . in = 0
    return ncols - d_out_rank - d_in_rank
