"""Exact rational linear algebra.

Dense matrices over Q (entries are ``fractions.Fraction``), canonical
subspaces with syntactic equality, multi-index bookkeeping for symmetric and
wedge powers, and the induced (derivation) action of a matrix on a power
space.  Everything is immutable after construction and free of rounding; this
module is the substrate for all representation-theoretic computations in the
package.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from math import comb
from typing import Iterable, Optional, Sequence

Rational = Fraction

ZERO = Fraction(0)
ONE = Fraction(1)


def rat(x) -> Fraction:
    """Coerce an int, string or Fraction to an exact rational."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"cannot coerce {type(x).__name__} to a rational")


def format_rational(x: Fraction) -> str:
    """Render a rational as ``p/q``, or ``p`` when the denominator is 1."""
    x = rat(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def parse_rational(s: str) -> Fraction:
    """Inverse of :func:`format_rational`."""
    return Fraction(s)


class Matrix:
    """Immutable dense matrix over Q.

    Rows are stored as tuples of Fractions.  Zero-row and zero-column
    matrices are legal (they show up as bases of trivial spaces).
    """

    __slots__ = ("rows", "cols", "data")

    def __init__(self, data: Sequence[Sequence]):
        rows = tuple(tuple(rat(x) for x in row) for row in data)
        self.data = rows
        self.rows = len(rows)
        self.cols = len(rows[0]) if rows else 0
        for row in rows:
            if len(row) != self.cols:
                raise ValueError("ragged rows")

    @staticmethod
    def zeros(rows: int, cols: int) -> "Matrix":
        return Matrix([[ZERO] * cols for _ in range(rows)])

    @staticmethod
    def identity(n: int) -> "Matrix":
        return Matrix([[ONE if i == j else ZERO for j in range(n)] for i in range(n)])

    @staticmethod
    def from_cols(cols: Sequence[Sequence], rows: Optional[int] = None) -> "Matrix":
        cols = [tuple(rat(x) for x in c) for c in cols]
        if rows is None:
            if not cols:
                raise ValueError("rows must be given for a matrix with no columns")
            rows = len(cols[0])
        return Matrix([[c[i] for c in cols] for i in range(rows)])

    def __getitem__(self, ij) -> Fraction:
        i, j = ij
        return self.data[i][j]

    def row(self, i: int) -> tuple:
        return self.data[i]

    def col(self, j: int) -> tuple:
        return tuple(row[j] for row in self.data)

    def columns(self) -> list:
        return [self.col(j) for j in range(self.cols)]

    def transpose(self) -> "Matrix":
        return Matrix([[self.data[i][j] for i in range(self.rows)] for j in range(self.cols)])

    def _check_same_shape(self, other: "Matrix"):
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch: {self.shape} vs {other.shape}")

    def __add__(self, other: "Matrix") -> "Matrix":
        self._check_same_shape(other)
        return Matrix([[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(self.data, other.data)])

    def __sub__(self, other: "Matrix") -> "Matrix":
        self._check_same_shape(other)
        return Matrix([[a - b for a, b in zip(r1, r2)] for r1, r2 in zip(self.data, other.data)])

    def __neg__(self) -> "Matrix":
        return Matrix([[-a for a in row] for row in self.data])

    def scale(self, c) -> "Matrix":
        c = rat(c)
        return Matrix([[c * a for a in row] for row in self.data])

    def __mul__(self, other: "Matrix") -> "Matrix":
        if self.cols != other.rows:
            raise ValueError(f"shape mismatch: {self.shape} * {other.shape}")
        ocols = other.cols
        odata = other.data
        out = []
        for row in self.data:
            acc = [ZERO] * ocols
            for k, a in enumerate(row):
                if a:
                    orow = odata[k]
                    for j in range(ocols):
                        b = orow[j]
                        if b:
                            acc[j] += a * b
                    # noqa: fallthrough kept simple; dense but small matrices
            out.append(acc)
        return Matrix(out)

    def apply(self, v: Sequence) -> tuple:
        """Matrix-vector product."""
        if len(v) != self.cols:
            raise ValueError("vector length mismatch")
        return tuple(sum((a * x for a, x in zip(row, v) if a and x), ZERO) for row in self.data)

    def trace(self) -> Fraction:
        if self.rows != self.cols:
            raise ValueError("trace of a non-square matrix")
        return sum((self.data[i][i] for i in range(self.rows)), ZERO)

    def bracket(self, other: "Matrix") -> "Matrix":
        """Commutator [self, other]."""
        return self * other - other * self

    def is_zero(self) -> bool:
        return all(not a for row in self.data for a in row)

    def flatten(self) -> tuple:
        """Row-major entry tuple (used to treat End(U) as a vector space)."""
        return tuple(a for row in self.data for a in row)

    @staticmethod
    def unflatten(v: Sequence, rows: int, cols: int) -> "Matrix":
        if len(v) != rows * cols:
            raise ValueError("length mismatch")
        return Matrix([v[i * cols:(i + 1) * cols] for i in range(rows)])

    @property
    def shape(self) -> tuple:
        return (self.rows, self.cols)

    def hstack(self, other: "Matrix") -> "Matrix":
        if self.rows != other.rows:
            raise ValueError("row count mismatch")
        return Matrix([r1 + r2 for r1, r2 in zip(self.data, other.data)])

    def __eq__(self, other) -> bool:
        return isinstance(other, Matrix) and self.data == other.data

    def __hash__(self) -> int:
        return hash(self.data)

    def __repr__(self) -> str:
        body = "; ".join(" ".join(format_rational(a) for a in row) for row in self.data)
        return f"Matrix({self.rows}x{self.cols}: {body})"


def _row_reduce(rows: list) -> tuple:
    """In-place reduced row echelon form; returns (rows, pivot column list)."""
    nrows = len(rows)
    ncols = len(rows[0]) if rows else 0
    pivots = []
    r = 0
    for c in range(ncols):
        pr = None
        for i in range(r, nrows):
            if rows[i][c]:
                pr = i
                break
        if pr is None:
            continue
        rows[r], rows[pr] = rows[pr], rows[r]
        inv = ONE / rows[r][c]
        if inv != 1:
            rows[r] = [a * inv for a in rows[r]]
        for i in range(nrows):
            if i != r and rows[i][c]:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == nrows:
            break
    return rows, pivots


class Subspace:
    """Subspace of Q^n with a canonical reduced-echelon basis.

    The basis matrix has the subspace's vectors as columns; pivot rows carry
    a single 1 across the basis.  Two subspaces are equal iff their basis
    matrices are identical, so equality and containment are syntactic.
    """

    __slots__ = ("ambient_dim", "basis", "pivots")

    def __init__(self, ambient_dim: int, basis: Matrix, pivots: tuple):
        self.ambient_dim = ambient_dim
        self.basis = basis
        self.pivots = pivots

    @staticmethod
    def from_vectors(ambient_dim: int, vectors: Iterable[Sequence]) -> "Subspace":
        """Canonicalize a spanning set (vectors of length ambient_dim)."""
        rows = [[rat(x) for x in v] for v in vectors]
        for v in rows:
            if len(v) != ambient_dim:
                raise ValueError("vector length mismatch")
        rows, pivots = _row_reduce(rows)
        basis_rows = rows[: len(pivots)]
        basis = Matrix.from_cols(basis_rows, rows=ambient_dim) if basis_rows else Matrix.zeros(ambient_dim, 0)
        return Subspace(ambient_dim, basis, tuple(pivots))

    @staticmethod
    def from_columns(m: Matrix) -> "Subspace":
        return Subspace.from_vectors(m.rows, [m.col(j) for j in range(m.cols)])

    @staticmethod
    def zero(ambient_dim: int) -> "Subspace":
        return Subspace(ambient_dim, Matrix.zeros(ambient_dim, 0), ())

    @staticmethod
    def full(ambient_dim: int) -> "Subspace":
        return Subspace(ambient_dim, Matrix.identity(ambient_dim), tuple(range(ambient_dim)))

    @property
    def dim(self) -> int:
        return self.basis.cols

    def basis_columns(self) -> list:
        return self.basis.columns()

    def reduce(self, v: Sequence) -> tuple:
        """Residual of v after removing its component in this subspace."""
        v = list(rat(x) for x in v)
        for j, p in enumerate(self.pivots):
            c = v[p]
            if c:
                col = self.basis.col(j)
                for i in range(self.ambient_dim):
                    if col[i]:
                        v[i] -= c * col[i]
        return tuple(v)

    def coords(self, v: Sequence) -> Optional[tuple]:
        """Coordinates of v in the canonical basis, or None if v is outside."""
        v = list(rat(x) for x in v)
        cs = [v[p] for p in self.pivots]
        for j, c in enumerate(cs):
            if c:
                col = self.basis.col(j)
                for i in range(self.ambient_dim):
                    if col[i]:
                        v[i] -= c * col[i]
        if any(v):
            return None
        return tuple(cs)

    def contains_vector(self, v: Sequence) -> bool:
        return not any(self.reduce(v))

    def contains(self, other: "Subspace") -> bool:
        self._check_ambient(other)
        return all(self.contains_vector(c) for c in other.basis_columns())

    def sum(self, other: "Subspace") -> "Subspace":
        self._check_ambient(other)
        return Subspace.from_vectors(
            self.ambient_dim, self.basis_columns() + other.basis_columns()
        )

    def intersect(self, other: "Subspace") -> "Subspace":
        self._check_ambient(other)
        if self.dim == 0 or other.dim == 0:
            return Subspace.zero(self.ambient_dim)
        stacked = self.basis.hstack(other.basis)
        ker = kernel_basis(stacked)
        vecs = []
        for w in ker.basis_columns():
            x = w[: self.dim]
            vecs.append(self.basis.apply(x))
        return Subspace.from_vectors(self.ambient_dim, vecs)

    def quotient_basis(self) -> list:
        """Standard-basis vectors whose classes form a basis of ambient/self."""
        pivset = set(self.pivots)
        out = []
        for i in range(self.ambient_dim):
            if i not in pivset:
                e = [ZERO] * self.ambient_dim
                e[i] = ONE
                out.append(tuple(e))
        return out

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Subspace)
            and self.ambient_dim == other.ambient_dim
            and self.basis == other.basis
        )

    def __hash__(self) -> int:
        return hash((self.ambient_dim, self.basis))

    def __repr__(self) -> str:
        return f"Subspace(dim {self.dim} of Q^{self.ambient_dim})"

    def _check_ambient(self, other: "Subspace"):
        if self.ambient_dim != other.ambient_dim:
            raise ValueError("ambient dimension mismatch")


class RrefResult:
    __slots__ = ("rank", "kernel", "image")

    def __init__(self, rank: int, kernel: Subspace, image: Subspace):
        self.rank = rank
        self.kernel = kernel
        self.image = image


def rref(m: Matrix) -> RrefResult:
    """Rank, kernel and column space of a matrix, all exact.

    rank + dim kernel = cols; the image is spanned by the pivot columns.
    """
    rows = [list(r) for r in m.data]
    reduced, pivots = _row_reduce(rows)
    rank = len(pivots)
    # kernel: one vector per free column
    pivset = set(pivots)
    free = [c for c in range(m.cols) if c not in pivset]
    kvecs = []
    for fc in free:
        v = [ZERO] * m.cols
        v[fc] = ONE
        for r, pc in enumerate(pivots):
            v[pc] = -reduced[r][fc]
        kvecs.append(v)
    kernel = Subspace.from_vectors(m.cols, kvecs)
    image = Subspace.from_vectors(m.rows, [m.col(c) for c in pivots])
    return RrefResult(rank, kernel, image)


def kernel_basis(m: Matrix) -> Subspace:
    return rref(m).kernel


def solve(a: Matrix, b: Sequence) -> Optional[tuple]:
    """Solve a x = b exactly; returns (particular, kernel) or None if inconsistent."""
    if len(b) != a.rows:
        raise ValueError("right-hand side length mismatch")
    aug = [list(r) + [rat(x)] for r, x in zip(a.data, b)]
    if a.rows == 0:
        return (tuple([ZERO] * a.cols), kernel_basis(a))
    reduced, pivots = _row_reduce(aug)
    if a.cols in pivots:
        return None
    x = [ZERO] * a.cols
    for r, pc in enumerate(pivots):
        x[pc] = reduced[r][a.cols]
    return (tuple(x), kernel_basis(a))


class CoordSolver:
    """Repeated exact coordinate solves against a fixed independent family.

    Vectors are sparse dicts index -> Fraction.  The family is echelonized
    once (with tags tracking the expression of each echelon row in the
    original family), after which each solve costs one sparse reduction.
    """

    __slots__ = ("nvecs", "pivots")

    def __init__(self, vectors: Sequence[dict]):
        self.nvecs = len(vectors)
        self.pivots = []  # (pivot index, reduced row dict, tag dict)
        for i, v in enumerate(vectors):
            row = {k: rat(c) for k, c in v.items() if c}
            tag = {i: ONE}
            row, tag = self._reduce(row, tag)
            if not row:
                raise ValueError(f"vector {i} is dependent on the previous ones")
            p = min(row)
            inv = ONE / row[p]
            if inv != 1:
                row = {k: c * inv for k, c in row.items()}
                tag = {k: c * inv for k, c in tag.items()}
            # keep stored rows fully reduced against the new pivot
            for q, (pp, prow, ptag) in enumerate(self.pivots):
                c = prow.get(p)
                if c:
                    self.pivots[q] = (pp, _sub_scaled(prow, row, c), _sub_scaled(ptag, tag, c))
            self.pivots.append((p, row, tag))

    def _reduce(self, row: dict, tag: Optional[dict]):
        for p, prow, ptag in self.pivots:
            c = row.get(p)
            if c:
                row = _sub_scaled(row, prow, c)
                if tag is not None:
                    tag = _sub_scaled(tag, ptag, c)
        return row, tag

    def residual(self, v: dict) -> dict:
        row, _ = self._reduce({k: rat(c) for k, c in v.items() if c}, None)
        return row

    def solve(self, v: dict) -> Optional[list]:
        """Coordinates of v in the original family, or None if outside its span."""
        row = {k: rat(c) for k, c in v.items() if c}
        coeffs = {}
        for p, prow, ptag in self.pivots:
            c = row.get(p)
            if c:
                row = _sub_scaled(row, prow, c)
                for k, t in ptag.items():
                    coeffs[k] = coeffs.get(k, ZERO) + c * t
        if row:
            return None
        return [coeffs.get(i, ZERO) for i in range(self.nvecs)]

    def contains(self, v: dict) -> bool:
        return not self.residual(v)


def _sub_scaled(a: dict, b: dict, c: Fraction) -> dict:
    """a - c*b on sparse dicts, dropping zeros."""
    out = dict(a)
    for k, v in b.items():
        w = out.get(k, ZERO) - c * v
        if w:
            out[k] = w
        else:
            out.pop(k, None)
    return out


class MultiIndexTable:
    """Ordered index tuples for a power-space basis, with position lookup.

    kind 'wedge' lists strictly increasing tuples, kind 'sym' weakly
    increasing ones, both in lexicographic order.
    """

    __slots__ = ("base_dim", "degree", "kind", "tuples", "position")

    def __init__(self, base_dim: int, degree: int, kind: str):
        if kind not in ("wedge", "sym"):
            raise ValueError("kind must be 'wedge' or 'sym'")
        self.base_dim = base_dim
        self.degree = degree
        self.kind = kind
        if kind == "wedge":
            self.tuples = list(itertools.combinations(range(base_dim), degree))
        else:
            self.tuples = list(itertools.combinations_with_replacement(range(base_dim), degree))
        self.position = {t: i for i, t in enumerate(self.tuples)}

    @property
    def size(self) -> int:
        return len(self.tuples)

    def expected_size(self) -> int:
        if self.kind == "wedge":
            return comb(self.base_dim, self.degree)
        return comb(self.base_dim + self.degree - 1, self.degree)

    def __len__(self) -> int:
        return len(self.tuples)

    def __iter__(self):
        return iter(self.tuples)


def sort_wedge_tuple(t: Sequence[int]) -> Optional[tuple]:
    """Sort a wedge index tuple; returns (sign, sorted tuple) or None if repeated."""
    t = list(t)
    sign = 1
    # insertion sort, counting transpositions
    for i in range(1, len(t)):
        j = i
        while j > 0 and t[j - 1] > t[j]:
            t[j - 1], t[j] = t[j], t[j - 1]
            sign = -sign
            j -= 1
    for i in range(1, len(t)):
        if t[i - 1] == t[i]:
            return None
    return sign, tuple(t)


def induced_power_operator(x: Matrix, k: int, kind: str) -> Matrix:
    """Derivation action of x on the k-th wedge or symmetric power.

    Acts by the Leibniz rule on decomposables: v1...vk goes to the sum over
    slots of v1...(x vi)...vk.  The map x -> induced operator is a Lie algebra
    homomorphism.
    """
    if x.rows != x.cols:
        raise ValueError("operator must be square")
    table = MultiIndexTable(x.rows, k, kind)
    n = table.size
    out = [[ZERO] * n for _ in range(n)]
    for col, idx in enumerate(table.tuples):
        for slot in range(k):
            src = idx[slot]
            for dst in range(x.rows):
                c = x[dst, src]
                if not c:
                    continue
                new = list(idx)
                new[slot] = dst
                if kind == "wedge":
                    sw = sort_wedge_tuple(new)
                    if sw is None:
                        continue
                    sign, tup = sw
                    out[table.position[tup]][col] += sign * c
                else:
                    tup = tuple(sorted(new))
                    out[table.position[tup]][col] += c
    return Matrix(out)
