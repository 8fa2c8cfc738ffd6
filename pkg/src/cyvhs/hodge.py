"""Canonical Calabi-Yau Hodge representations for the classical tube-domain
families, and the graded decomposition of End(U,Q) they induce.

Families:

* ``A(n)``: sl(2n) acting on the middle wedge power of C^(2n); the compact
  dual is the grassmannian Gr(n, 2n).
* ``C(g)``: sp(2g) acting on the primitive part of the g-th wedge power of
  C^(2g); the compact dual is the Lagrangian grassmannian.
* ``BD(k)``: so(k+2) on C^(k+2) with Hodge numbers (1, k, 1); the compact
  dual is the quadric hypersurface.

Basis conventions: U-coordinates are always ordered by Hodge block, with
block q spanning U^(n-q, q), so the first coordinate line is U^(n,0).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Dict, List, Optional, Sequence, Tuple

from .exact_linalg import (
    ONE,
    ZERO,
    CoordSolver,
    Matrix,
    MultiIndexTable,
    Subspace,
    format_rational,
    induced_power_operator,
    parse_rational,
    rat,
    rref,
)

FAMILIES = ("A", "C", "BD")


class ConstructionError(Exception):
    """A family construction or frame adaptation failed an exact invariant."""


@dataclass(frozen=True)
class BilinearForm:
    """Nondegenerate bilinear form with symmetry +1 (symmetric) or -1 (alternating)."""

    gram: Matrix
    symmetry: int

    def __post_init__(self):
        if self.symmetry not in (1, -1):
            raise ValueError("symmetry must be +1 or -1")
        if self.gram.transpose() != self.gram.scale(self.symmetry):
            raise ConstructionError("gram matrix does not have the declared symmetry")

    def value(self, u: Sequence, v: Sequence) -> Fraction:
        return sum((a * b for a, b in zip(self.gram.apply(v), u) if a and b), ZERO)

    def is_invariant(self, x: Matrix) -> bool:
        """Q(Xu, v) + Q(u, Xv) = 0, i.e. X^T G + G X = 0."""
        return (x.transpose() * self.gram + self.gram * x).is_zero()


@dataclass
class CanonicalVHS:
    """A canonical CY Hodge representation: (U, Q, g, grading, Hodge pieces)."""

    family: str
    size: int
    dim_u: int
    weight: int
    q_form: BilinearForm
    g_basis: List[Matrix]
    grading_element: Matrix
    hodge_pieces: Dict[Tuple[int, int], Subspace]

    @property
    def hodge_numbers(self) -> List[int]:
        n = self.weight
        return [self.hodge_pieces[(n - q, q)].dim for q in range(n + 1)]

    def block_sizes(self) -> List[int]:
        return self.hodge_numbers

    def block_starts(self) -> List[int]:
        starts, s = [], 0
        for h in self.hodge_numbers:
            starts.append(s)
            s += h
        return starts

    def block_of_position(self, j: int) -> int:
        for q, (s, h) in enumerate(zip(self.block_starts(), self.hodge_numbers)):
            if s <= j < s + h:
                return q
        raise IndexError(j)


# ---------------------------------------------------------------------------
# family constructions


def _wedge_sign_complement(idx: tuple, comp: tuple) -> int:
    seq = list(idx) + list(comp)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def _sl_basis(m: int) -> List[Matrix]:
    out = []
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            e = [[ZERO] * m for _ in range(m)]
            e[i][j] = ONE
            out.append(Matrix(e))
    for i in range(m - 1):
        e = [[ZERO] * m for _ in range(m)]
        e[i][i] = ONE
        e[i + 1][i + 1] = -ONE
        out.append(Matrix(e))
    return out


def _sp_basis(g: int) -> List[Matrix]:
    # Split form: S(a_i, b_j) = delta_ij with a = 0..g-1, b = g..2g-1.
    m = 2 * g
    out = []

    def mk(entries):
        e = [[ZERO] * m for _ in range(m)]
        for (i, j), v in entries.items():
            e[i][j] = rat(v)
        return Matrix(e)

    for i in range(g):
        for j in range(g):
            out.append(mk({(i, j): 1, (g + j, g + i): -1}))
    for i in range(g):
        for j in range(i, g):
            if i == j:
                out.append(mk({(i, g + i): 1}))
            else:
                out.append(mk({(i, g + j): 1, (j, g + i): 1}))
    for i in range(g):
        for j in range(i, g):
            if i == j:
                out.append(mk({(g + i, i): 1}))
            else:
                out.append(mk({(g + i, j): 1, (g + j, i): 1}))
    return out


def _symplectic_gram(g: int) -> Matrix:
    m = 2 * g
    e = [[ZERO] * m for _ in range(m)]
    for i in range(g):
        e[i][g + i] = ONE
        e[g + i][i] = -ONE
    return Matrix(e)


def _contraction_matrix(g: int, s_gram: Matrix) -> Matrix:
    """Wedge contraction with the symplectic form: degree g -> degree g-2."""
    m = 2 * g
    src = MultiIndexTable(m, g, "wedge")
    dst = MultiIndexTable(m, g - 2, "wedge") if g >= 2 else None
    rows = dst.size if dst else 0
    out = [[ZERO] * src.size for _ in range(rows)]
    for col, idx in enumerate(src.tuples):
        for r, s in itertools.combinations(range(g), 2):
            val = s_gram[idx[r], idx[s]]
            if not val:
                continue
            rest = tuple(idx[t] for t in range(g) if t not in (r, s))
            sign = (-1) ** (r + s - 1)
            out[dst.position[rest]][col] += sign * val
    return Matrix(out) if rows else Matrix.zeros(0, src.size)


def _block_order_permutation(table: MultiIndexTable, n_a: int) -> Tuple[list, list]:
    """Order wedge monomials by (#indices in the B half, lex); return (perm, q of each)."""
    tagged = []
    for pos, idx in enumerate(table.tuples):
        q = sum(1 for i in idx if i >= n_a)
        tagged.append((q, idx, pos))
    tagged.sort()
    perm = [t[2] for t in tagged]
    qs = [t[0] for t in tagged]
    return perm, qs


def _reindex(m: Matrix, perm: Sequence[int]) -> Matrix:
    return Matrix([[m[perm[i], perm[j]] for j in range(len(perm))] for i in range(len(perm))])


def _unit_block_subspaces(qs: Sequence[int], weight: int) -> Dict[Tuple[int, int], Subspace]:
    dim = len(qs)
    pieces = {}
    for q in range(weight + 1):
        vecs = []
        for pos, qq in enumerate(qs):
            if qq == q:
                e = [ZERO] * dim
                e[pos] = ONE
                vecs.append(e)
        pieces[(weight - q, q)] = Subspace.from_vectors(dim, vecs)
    return pieces


def _build_type_a(n: int) -> CanonicalVHS:
    m = 2 * n
    table = MultiIndexTable(m, n, "wedge")
    perm, qs = _block_order_permutation(table, n)

    half = Fraction(1, 2)
    h_small = Matrix([[(half if i < n else -half) if i == j else ZERO for j in range(m)]
                      for i in range(m)])
    grading = _reindex(induced_power_operator(h_small, n, "wedge"), perm)

    g_basis = [_reindex(induced_power_operator(x, n, "wedge"), perm) for x in _sl_basis(m)]

    # wedge pairing Q(e_I, e_J) = sign when J is the complement of I
    dim = table.size
    gram = [[ZERO] * dim for _ in range(dim)]
    allidx = set(range(m))
    for a in range(dim):
        idx = table.tuples[perm[a]]
        comp = tuple(sorted(allidx - set(idx)))
        b = perm.index(table.position[comp])
        gram[a][b] = rat(_wedge_sign_complement(idx, comp))
    q_form = BilinearForm(Matrix(gram), (-1) ** n)

    return CanonicalVHS(
        family="A",
        size=n,
        dim_u=dim,
        weight=n,
        q_form=q_form,
        g_basis=g_basis,
        grading_element=grading,
        hodge_pieces=_unit_block_subspaces(qs, n),
    )


def _build_type_c(g: int) -> CanonicalVHS:
    m = 2 * g
    s_gram = _symplectic_gram(g)
    table = MultiIndexTable(m, g, "wedge")
    contraction = _contraction_matrix(g, s_gram)

    # primitive subspace, assembled block by block so U-coordinates are block-ordered
    perm, qs = _block_order_permutation(table, g)
    cols: List[dict] = []
    col_blocks: List[int] = []
    for q in range(g + 1):
        block_positions = [perm[i] for i in range(len(perm)) if qs[i] == q]
        if contraction.rows == 0:
            ker = Subspace.full(len(block_positions))
        else:
            sub = Matrix([[contraction[r, c] for c in block_positions] for r in range(contraction.rows)])
            ker = rref(sub).kernel
        for v in ker.basis_columns():
            col = {}
            for local, c in enumerate(v):
                if c:
                    col[block_positions[local]] = c
            cols.append(col)
            col_blocks.append(q)
    dim = len(cols)
    k_matrix = Matrix.zeros(table.size, 0)
    k_cols = []
    for col in cols:
        k_cols.append([col.get(r, ZERO) for r in range(table.size)])
    k_matrix = Matrix.from_cols(k_cols, rows=table.size)
    solver = CoordSolver(cols)

    def restrict(op: Matrix) -> Matrix:
        out_cols = []
        for j in range(dim):
            img = op.apply(k_matrix.col(j))
            coords = solver.solve({i: v for i, v in enumerate(img) if v})
            if coords is None:
                raise ConstructionError("operator does not preserve the primitive subspace")
            out_cols.append(coords)
        return Matrix.from_cols(out_cols, rows=dim)

    g_basis = [restrict(induced_power_operator(x, g, "wedge")) for x in _sp_basis(g)]

    half = Fraction(1, 2)
    h_small = Matrix([[(half if i < g else -half) if i == j else ZERO for j in range(m)] for i in range(m)])
    grading = restrict(induced_power_operator(h_small, g, "wedge"))

    # wedge pairing restricted to the primitive part
    allidx = set(range(m))
    wedge_gram = [[ZERO] * table.size for _ in range(table.size)]
    for a, idx in enumerate(table.tuples):
        comp = tuple(sorted(allidx - set(idx)))
        wedge_gram[a][table.position[comp]] = rat(_wedge_sign_complement(idx, comp))
    q_u = k_matrix.transpose() * Matrix(wedge_gram) * k_matrix
    q_form = BilinearForm(q_u, (-1) ** g)
    if rref(q_u).rank != dim:
        raise ConstructionError("polarization degenerates on the primitive subspace")

    return CanonicalVHS(
        family="C",
        size=g,
        dim_u=dim,
        weight=g,
        q_form=q_form,
        g_basis=g_basis,
        grading_element=grading,
        hodge_pieces=_unit_block_subspaces(col_blocks, g),
    )


def _build_type_bd(k: int) -> CanonicalVHS:
    dim = k + 2
    d = dim - 1
    gram = Matrix([[ONE if i + j == d else ZERO for j in range(dim)] for i in range(dim)])
    q_form = BilinearForm(gram, 1)

    g_basis = []
    for u in range(dim):
        for v in range(dim):
            pu, pv = d - v, d - u
            if (u, v) < (pu, pv):
                e = [[ZERO] * dim for _ in range(dim)]
                e[u][v] = ONE
                e[pu][pv] = -ONE
                g_basis.append(Matrix(e))

    grading = Matrix([[ONE if i == j == 0 else -ONE if i == j == d else ZERO
                       for j in range(dim)] for i in range(dim)])
    qs = [0] + [1] * k + [2]
    return CanonicalVHS(
        family="BD",
        size=k,
        dim_u=dim,
        weight=2,
        q_form=q_form,
        g_basis=g_basis,
        grading_element=grading,
        hodge_pieces=_unit_block_subspaces(qs, 2),
    )


def build_family(tag: str, size: int) -> CanonicalVHS:
    """Construct the canonical CY Hodge representation for one family.

    A(n): U = wedge^n C^(2n), weight n.  C(g): U = primitive part of
    wedge^g C^(2g), weight g.  BD(k): U = C^(k+2), weight 2.
    """
    if tag not in FAMILIES:
        raise ValueError(f"unsupported family tag {tag!r}; expected one of {FAMILIES}")
    if size < 1:
        raise ValueError(f"family {tag} needs size >= 1, got {size}")
    if tag == "A":
        vhs = _build_type_a(size)
    elif tag == "C":
        vhs = _build_type_c(size)
    else:
        vhs = _build_type_bd(size)
    _validate(vhs)
    return vhs


def _validate(vhs: CanonicalVHS):
    n = vhs.weight
    if vhs.hodge_pieces[(n, 0)].dim != 1:
        raise ConstructionError("h^(n,0) must be 1")
    if sum(vhs.hodge_numbers) != vhs.dim_u:
        raise ConstructionError("hodge pieces do not fill U")
    for x in vhs.g_basis:
        if not vhs.q_form.is_invariant(x):
            raise ConstructionError("g does not preserve the polarization")
    # grading acts on block q by (p - q)/2 = (n - 2q)/2
    starts, sizes = vhs.block_starts(), vhs.hodge_numbers
    for q, (s, h) in enumerate(zip(starts, sizes)):
        ev = Fraction(n - 2 * q, 2)
        for j in range(s, s + h):
            col = vhs.grading_element.col(j)
            for i, c in enumerate(col):
                want = ev if i == j else ZERO
                if c != want:
                    raise ConstructionError("grading element is not diagonal with (p-q)/2 eigenvalues")


# ---------------------------------------------------------------------------
# adapted frames


@dataclass
class AdaptedFrame:
    """Basis e_0..e_d refining the Hodge flag with anti-diagonal Q-gram.

    ``signs[j]`` is the value Q(e_j, e_{d-j}); +1 throughout for symmetric Q,
    and +1 on the first half / -1 on the second for alternating Q.
    """

    basis_matrix: Matrix
    basis_inverse: Matrix
    signs: List[Fraction]
    block_sizes: List[int]
    block_starts: List[int]
    weight: int
    symmetry: int

    @property
    def dim(self) -> int:
        return self.basis_matrix.rows

    @property
    def flag_dims(self) -> List[int]:
        """d^p for p = 0..n, where d^p + 1 = dim F^p."""
        n = self.weight
        out = []
        for p in range(n + 1):
            dimf = sum(self.block_sizes[q] for q in range(n - p + 1))
            out.append(dimf - 1)
        return out

    def gram(self) -> Matrix:
        d = self.dim - 1
        return Matrix([[self.signs[i] if i + j == d else ZERO for j in range(self.dim)]
                       for i in range(self.dim)])

    def block_of_position(self, j: int) -> int:
        for q in range(len(self.block_sizes) - 1, -1, -1):
            if j >= self.block_starts[q]:
                return q
        raise IndexError(j)

    def to_frame(self, x: Matrix) -> Matrix:
        """Conjugate an operator on U into frame coordinates."""
        return self.basis_inverse * x * self.basis_matrix

    def filtration_subspace(self, p: int) -> Subspace:
        """F^p in the original U-coordinates."""
        n = self.weight
        cols = []
        for q in range(n - p + 1):
            s, h = self.block_starts[q], self.block_sizes[q]
            cols.extend(self.basis_matrix.col(j) for j in range(s, s + h))
        return Subspace.from_vectors(self.dim, cols)


def _middle_hyperbolic(vhs: CanonicalVHS, positions: List[int]) -> List[list]:
    """Order a self-paired middle block so its internal gram is anti-diagonal 1s.

    Greedy hyperbolic-pair extraction over Q.  Fails (exactly) when the middle
    block has no rational isotropic vector or its residual line does not
    represent 1; this cannot happen for the acceptance families.
    """
    q = vhs.q_form
    dim = vhs.dim_u
    space = Subspace.from_vectors(dim, [_unit(dim, p) for p in positions])
    front, back = [], []
    while space.dim > 1:
        cands = list(space.basis_columns())
        cands += [[a + b for a, b in zip(x, y)] for x, y in itertools.combinations(space.basis_columns(), 2)]
        cands += [[a - b for a, b in zip(x, y)] for x, y in itertools.combinations(space.basis_columns(), 2)]
        u = next((c for c in cands if any(c) and q.value(c, c) == 0), None)
        if u is None:
            raise ConstructionError("no rational isotropic vector in the middle block")
        v = next((c for c in space.basis_columns() if q.value(u, c)), None)
        if v is None:
            raise ConstructionError("polarization degenerates on the middle block")
        c = q.value(u, v)
        v = [a / c for a in v]
        qvv = q.value(v, v)
        if qvv:
            half = qvv / 2
            v = [a - half * b for a, b in zip(v, u)]
        # pass to the orthogonal complement of the hyperbolic pair
        rows = []
        for w in (u, v):
            rows.append([q.value(w, col) for col in space.basis_columns()])
        ker = rref(Matrix(rows)).kernel
        vecs = [space.basis.apply(x) for x in ker.basis_columns()]
        space = Subspace.from_vectors(dim, vecs)
        front.append(u)
        back.insert(0, v)
    middle = []
    if space.dim == 1:
        v = list(space.basis_columns()[0])
        c = q.value(v, v)
        if c != 1:
            num, den = c.numerator, c.denominator
            r = _exact_sqrt(num * den)
            if r is None or r == 0:
                raise ConstructionError("middle self-pairing is not a rational square")
            v = [a * den / Fraction(r) for a in v]
        middle = [v]
    return front + middle + back


def _exact_sqrt(n: int) -> Optional[int]:
    if n < 0:
        return None
    r = int(n ** 0.5)
    for cand in (r - 1, r, r + 1, r + 2):
        if cand >= 0 and cand * cand == n:
            return cand
    return None


def build_adapted_frame(vhs: CanonicalVHS) -> AdaptedFrame:
    """Pair the Hodge blocks against their Q-duals into an adapted frame."""
    n = vhs.weight
    dim = vhs.dim_u
    d = dim - 1
    sizes = vhs.hodge_numbers
    starts = vhs.block_starts()
    sym = vhs.q_form.symmetry

    cols: List[Optional[list]] = [None] * dim
    for q in range(n + 1):
        s, h = starts[q], sizes[q]
        if q < n - q:
            for j in range(s, s + h):
                e = [ZERO] * dim
                e[j] = ONE
                cols[j] = e
        elif q == n - q:
            ordered = _middle_hyperbolic(vhs, list(range(s, s + h)))
            for i, v in enumerate(ordered):
                cols[s + i] = v
    # partner blocks: reversed Q-dual bases
    for q in range(n + 1):
        if q >= n - q:
            continue
        qp = n - q
        s, h = starts[q], sizes[q]
        sp = starts[qp]
        cross = Matrix([[vhs.q_form.value(cols[s + i], _unit(dim, sp + j)) for j in range(h)]
                        for i in range(h)])
        inv = _invert(cross)
        if inv is None:
            raise ConstructionError(f"Q degenerates on the pairing of blocks {q} and {qp}")
        for i in range(h):
            x = inv.col(i)
            v = [ZERO] * dim
            for j in range(h):
                if x[j]:
                    v[sp + j] = x[j]
            cols[d - (s + i)] = v

    basis = Matrix.from_cols(cols, rows=dim)
    inv = _invert(basis)
    if inv is None:
        raise ConstructionError("adapted frame is singular")
    half = Fraction(dim, 2)
    signs = [ONE if (sym == 1 or j < half) else -ONE for j in range(dim)]
    frame = AdaptedFrame(
        basis_matrix=basis,
        basis_inverse=inv,
        signs=signs,
        block_sizes=sizes,
        block_starts=starts,
        weight=n,
        symmetry=sym,
    )
    expected = frame.gram()
    actual = basis.transpose() * vhs.q_form.gram * basis
    if actual != expected:
        raise ConstructionError("adapted frame gram does not match the convention")
    return frame


def _unit(dim: int, j: int) -> list:
    e = [ZERO] * dim
    e[j] = ONE
    return e


def _invert(m: Matrix) -> Optional[Matrix]:
    if m.rows != m.cols:
        return None
    n = m.rows
    aug = [list(r) + list(Matrix.identity(n).row(i)) for i, r in enumerate(m.data)]
    from .exact_linalg import _row_reduce

    reduced, pivots = _row_reduce(aug)
    if list(pivots) != list(range(n)):
        return None
    return Matrix([row[n:] for row in reduced])


# ---------------------------------------------------------------------------
# graded decomposition of End(U,Q)


def _sparse_entries(m: Matrix) -> dict:
    out = {}
    for i, row in enumerate(m.data):
        for j, v in enumerate(row):
            if v:
                out[(i, j)] = v
    return out


def _flat(d: dict, n: int) -> dict:
    return {i * n + j: v for (i, j), v in d.items()}


class GradedEnd:
    """E_l / g_l / g-perp_l decomposition of End(U,Q) in adapted-frame coordinates.

    Matrices here act on frame coordinates; the Q-gram is the frame's signed
    anti-diagonal.  Subspaces live in the flattened (dim x dim) entry space.
    """

    def __init__(self, vhs: CanonicalVHS, frame: AdaptedFrame):
        self.vhs = vhs
        self.frame = frame
        n = frame.dim
        d = n - 1
        self.dim = n
        self.weight = vhs.weight
        signs = frame.signs

        blk = [frame.block_of_position(j) for j in range(n)]
        self._blk = blk

        # structural pair basis of End(U,Q), graded by entry degree
        self._pair_reps: Dict[int, List[dict]] = {}
        for u in range(n):
            for v in range(n):
                pu, pv = d - v, d - u
                deg = blk[v] - blk[u]
                if (u, v) < (pu, pv):
                    ratio = signs[d - u] / signs[d - v]
                    self._pair_reps.setdefault(deg, []).append({(u, v): ONE, (pu, pv): -ratio})
                elif (u, v) == (pu, pv) and signs[u] + signs[v] == 0:
                    self._pair_reps.setdefault(deg, []).append({(u, v): ONE})

        self.E_pieces: Dict[int, Subspace] = {}
        for deg, reps in sorted(self._pair_reps.items()):
            vecs = [[ZERO] * (n * n) for _ in reps]
            for r, rep in zip(vecs, reps):
                for (i, j), val in rep.items():
                    r[i * n + j] = val
            self.E_pieces[deg] = Subspace.from_vectors(n * n, vecs)

        # g in frame coordinates, split by degree via entry filtering
        self.g_frame: List[Matrix] = [frame.to_frame(x) for x in vhs.g_basis]
        by_degree: Dict[int, List[dict]] = {}
        for x in self.g_frame:
            comps: Dict[int, dict] = {}
            for (i, j), val in _sparse_entries(x).items():
                comps.setdefault(blk[j] - blk[i], {})[(i, j)] = val
            for deg, comp in comps.items():
                by_degree.setdefault(deg, []).append(comp)
        self.g_pieces: Dict[int, Subspace] = {}
        for deg in self.degrees():
            vecs = [_flat(c, n) for c in by_degree.get(deg, [])]
            self.g_pieces[deg] = Subspace.from_vectors(n * n, [_dense(v, n * n) for v in vecs])

        # trace-form complement, degree by degree
        self.gperp_pieces: Dict[int, Subspace] = {}
        for deg in self.degrees():
            self.gperp_pieces[deg] = self._complement(deg)

        self._check_trace_pairing()

    def degrees(self) -> List[int]:
        return sorted(self.E_pieces)

    def dim_end(self) -> int:
        return sum(s.dim for s in self.E_pieces.values())

    def dim_g(self) -> int:
        return sum(s.dim for s in self.g_pieces.values())

    def dim_gperp(self) -> int:
        return sum(s.dim for s in self.gperp_pieces.values())

    @property
    def ambient(self) -> Subspace:
        vecs = []
        for s in self.E_pieces.values():
            vecs.extend(s.basis_columns())
        return Subspace.from_vectors(self.dim * self.dim, vecs)

    def _complement(self, deg: int) -> Subspace:
        e_piece = self.E_pieces[deg]
        g_opp = self.g_pieces.get(-deg, Subspace.zero(self.dim ** 2))
        if g_opp.dim == 0:
            return e_piece
        n = self.dim
        rows = []
        for gcol in g_opp.basis_columns():
            gm = Matrix.unflatten(gcol, n, n)
            row = []
            for ecol in e_piece.basis_columns():
                em = Matrix.unflatten(ecol, n, n)
                row.append((em * gm).trace())
            rows.append(row)
        ker = rref(Matrix(rows)).kernel
        vecs = []
        for kv in ker.basis_columns():
            acc = [ZERO] * (n * n)
            for c, ecol in zip(kv, e_piece.basis_columns()):
                if c:
                    for i, val in enumerate(ecol):
                        if val:
                            acc[i] += c * val
            vecs.append(acc)
        return Subspace.from_vectors(n * n, vecs)

    def _check_trace_pairing(self):
        for deg in self.degrees():
            got = self.g_pieces[deg].dim + self.gperp_pieces[deg].dim
            if got != self.E_pieces[deg].dim:
                raise ConstructionError(
                    "trace form degenerates on g: graded complement has wrong dimension "
                    f"at degree {deg} (semisimplicity violated)"
                )

    # --- component extraction -------------------------------------------

    def graded_components(self, x: Matrix) -> Dict[int, Matrix]:
        """Split a frame-coordinate endomorphism by entry degree."""
        n = self.dim
        comps: Dict[int, dict] = {}
        for (i, j), val in _sparse_entries(x).items():
            comps.setdefault(self._blk[j] - self._blk[i], {})[(i, j)] = val
        return {deg: _to_matrix(c, n) for deg, c in comps.items()}

    def split_solver(self, deg: int) -> CoordSolver:
        """Solver expressing an E_deg element in the (g_deg, gperp_deg) basis."""
        key = ("split", deg)
        cache = getattr(self, "_solvers", None)
        if cache is None:
            cache = self._solvers = {}
        if key not in cache:
            if deg not in self.E_pieces:
                cache[key] = None
            else:
                vecs = [_col_dict(c) for c in self.g_pieces[deg].basis_columns()]
                vecs += [_col_dict(c) for c in self.gperp_pieces[deg].basis_columns()]
                cache[key] = CoordSolver(vecs) if vecs else None
        return cache[key]

    def g_gperp_parts(self, x: Matrix, deg: int) -> Tuple[Matrix, Matrix, list]:
        """g- and g-perp components of an E_deg-valued matrix, plus gperp coords."""
        n = self.dim
        solver = self.split_solver(deg)
        flatx = _flat(_sparse_entries(x), n)
        if solver is None:
            if flatx:
                raise ValueError(f"nonzero component in empty degree {deg}")
            return Matrix.zeros(n, n), Matrix.zeros(n, n), []
        coords = solver.solve(flatx)
        if coords is None:
            raise ValueError("matrix is not Q-compatible in this degree")
        kg = self.g_pieces[deg].dim if deg in self.g_pieces else 0
        gpart = _combine(self.g_pieces[deg].basis_columns(), coords[:kg], n)
        ppart = _combine(self.gperp_pieces[deg].basis_columns(), coords[kg:], n)
        return gpart, ppart, coords[kg:]

    def in_end(self, x: Matrix) -> bool:
        """Exact membership of a frame-coordinate matrix in End(U,Q)."""
        n, d = self.dim, self.dim - 1
        s = self.frame.signs
        for u in range(n):
            for v in range(n):
                a = x[u, v]
                b = x[d - v, d - u]
                if s[d - u] * a + s[d - v] * b != 0:
                    return False
        return True


def _dense(d: dict, n: int) -> list:
    out = [ZERO] * n
    for k, v in d.items():
        out[k] = v
    return out


def _col_dict(col: Sequence) -> dict:
    return {i: v for i, v in enumerate(col) if v}


def _to_matrix(entries: dict, n: int) -> Matrix:
    rows = [[ZERO] * n for _ in range(n)]
    for (i, j), v in entries.items():
        rows[i][j] = v
    return Matrix(rows)


def _combine(cols: List[tuple], coeffs: Sequence, n: int) -> Matrix:
    acc = [ZERO] * (n * n)
    for c, col in zip(coeffs, cols):
        if c:
            for i, v in enumerate(col):
                if v:
                    acc[i] += c * v
    return Matrix.unflatten(acc, n, n)


def grade_endomorphisms(vhs: CanonicalVHS, frame: Optional[AdaptedFrame] = None) -> GradedEnd:
    """Decompose End(U,Q) into ad(grading)-eigenspaces with g/g-perp refinement."""
    if frame is None:
        frame = build_adapted_frame(vhs)
    return GradedEnd(vhs, frame)


# ---------------------------------------------------------------------------
# structure verification


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class StructureReport:
    family: str
    size: int
    checks: List[CheckResult] = field(default_factory=list)
    dims: Dict[str, object] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, detail: str = ""):
        self.checks.append(CheckResult(name, bool(passed), detail))

    def to_doc(self) -> dict:
        return {
            "family": self.family,
            "size": self.size,
            "passed": self.passed,
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks],
            "dims": self.dims,
        }


class _Reducer:
    """Sparse membership tests against a subspace's echelon basis."""

    def __init__(self, space: Subspace):
        self.pivots = []
        for j, p in enumerate(space.pivots):
            col = space.basis.col(j)
            self.pivots.append((p, {i: v for i, v in enumerate(col) if v}))

    def contains(self, vec: dict) -> bool:
        v = dict(vec)
        for p, col in self.pivots:
            c = v.get(p)
            if c:
                for i, val in col.items():
                    w = v.get(i, ZERO) - c * val
                    if w:
                        v[i] = w
                    else:
                        v.pop(i, None)
        return not v


def _sparse_mul(a: dict, b_by_row: dict) -> dict:
    out = {}
    for (i, k), va in a.items():
        row = b_by_row.get(k)
        if not row:
            continue
        for j, vb in row:
            key = (i, j)
            w = out.get(key, ZERO) + va * vb
            if w:
                out[key] = w
            else:
                out.pop(key, None)
    return out


def _by_row(a: dict) -> dict:
    out: Dict[int, list] = {}
    for (i, j), v in a.items():
        out.setdefault(i, []).append((j, v))
    return out


def _sparse_bracket(a: dict, b: dict) -> dict:
    ab = _sparse_mul(a, _by_row(b))
    ba = _sparse_mul(b, _by_row(a))
    for k, v in ba.items():
        w = ab.get(k, ZERO) - v
        if w:
            ab[k] = w
        else:
            ab.pop(k, None)
    return ab


def verify_structure(vhs: CanonicalVHS, graded: GradedEnd) -> StructureReport:
    """Run the six structural checks plus the supporting graded invariants."""
    report = StructureReport(vhs.family, vhs.size)
    n = vhs.weight
    frame = graded.frame
    dim = vhs.dim_u
    blk = [frame.block_of_position(j) for j in range(dim)]

    report.dims["dim_U"] = dim
    report.dims["weight"] = n
    report.dims["hodge_numbers"] = vhs.hodge_numbers
    report.dims["dim_g"] = graded.dim_g()
    report.dims["dim_end"] = graded.dim_end()
    report.dims["dim_gperp"] = graded.dim_gperp()
    report.dims["dim_E"] = {deg: graded.E_pieces[deg].dim for deg in graded.degrees()}
    report.dims["dim_g_pieces"] = {deg: graded.g_pieces[deg].dim for deg in graded.degrees()}
    report.dims["dim_gperp_pieces"] = {deg: graded.gperp_pieces[deg].dim for deg in graded.degrees()}

    # (1) Q-invariance of g
    ok = all(vhs.q_form.is_invariant(x) for x in vhs.g_basis)
    report.add("q_invariance_of_g", ok)

    # (2) bracket-grading containments
    sp_g = {deg: [_sparse_entries(Matrix.unflatten(c, dim, dim))
                  for c in graded.g_pieces[deg].basis_columns()]
            for deg in graded.degrees()}
    sp_perp = {deg: [_sparse_entries(Matrix.unflatten(c, dim, dim))
                     for c in graded.gperp_pieces[deg].basis_columns()]
               for deg in graded.degrees()}
    red_g = {deg: _Reducer(graded.g_pieces[deg]) for deg in graded.degrees()}
    red_perp = {deg: _Reducer(graded.gperp_pieces[deg]) for deg in graded.degrees()}

    def entry_degree_ok(sp: dict, target: int) -> bool:
        return all(blk[j] - blk[i] == target for (i, j) in sp)

    def flatten_sp(sp: dict) -> dict:
        return {i * dim + j: v for (i, j), v in sp.items()}

    ok_e = True
    for k in graded.degrees():
        for l in graded.degrees():
            for a in graded._pair_reps.get(k, []):
                for b in graded._pair_reps.get(l, []):
                    br = _sparse_bracket(a, b)
                    if br and not (entry_degree_ok(br, k + l) and graded.in_end(_to_matrix(br, dim))):
                        ok_e = False
    report.add("bracket_grading_E", ok_e)

    ok_gg, ok_gp = True, True
    for k in graded.degrees():
        for l in graded.degrees():
            m = k + l
            for a in sp_g.get(k, []):
                for b in sp_g.get(l, []):
                    br = _sparse_bracket(a, b)
                    if not br:
                        continue
                    if m not in red_g or not red_g[m].contains(flatten_sp(br)):
                        ok_gg = False
                for b in sp_perp.get(l, []):
                    br = _sparse_bracket(a, b)
                    if not br:
                        continue
                    if m not in red_perp or not red_perp[m].contains(flatten_sp(br)):
                        ok_gp = False
    report.add("bracket_grading_g", ok_gg)
    report.add("bracket_grading_g_module_gperp", ok_gp)

    # (3) CY Hodge numbers
    report.add("h_n0_equals_1", vhs.hodge_numbers[0] == 1)

    # (4) CY isomorphism g_{-1} -> U^{n-1,1}
    h1 = vhs.hodge_numbers[1] if n >= 1 else 0
    gm1 = graded.g_pieces.get(-1, Subspace.zero(dim * dim))
    s1, e1 = frame.block_starts[1], frame.block_starts[1] + h1
    colmat = []
    for c in gm1.basis_columns():
        x = Matrix.unflatten(c, dim, dim)
        colmat.append([x[i, 0] for i in range(s1, e1)])
    rank = rref(Matrix.from_cols(colmat, rows=h1)).rank if colmat else 0
    report.add("cy_isomorphism", gm1.dim == h1 and rank == h1,
               f"dim g_-1 = {gm1.dim}, h^(n-1,1) = {h1}, rank = {rank}")

    # (5) surjectivity of every psi^{p,q}
    ok_psi = True
    gm1_mats = [Matrix.unflatten(c, dim, dim) for c in gm1.basis_columns()]
    for q in range(n):
        s, h = frame.block_starts[q], frame.block_sizes[q]
        s2, h2 = frame.block_starts[q + 1], frame.block_sizes[q + 1]
        images = []
        for x in gm1_mats:
            for j in range(s, s + h):
                col = x.col(j)
                images.append([col[i] for i in range(s2, s2 + h2)])
        rk = rref(Matrix.from_cols(images, rows=h2)).rank if images else 0
        if rk != h2:
            ok_psi = False
    report.add("psi_pq_surjective", ok_psi)

    # (6) degree support of g and g-perp
    ok_supp = all(graded.g_pieces[deg].dim == 0 for deg in graded.degrees() if abs(deg) > 1)
    ok_perp2 = all(graded.gperp_pieces[deg] == graded.E_pieces[deg]
                   for deg in graded.degrees() if abs(deg) >= 2)
    report.add("g_supported_in_degrees_le_1", ok_supp)
    report.add("gperp_fills_degrees_ge_2", ok_perp2)

    # supporting invariants
    dim_omega = {"A": vhs.size ** 2, "C": vhs.size * (vhs.size + 1) // 2, "BD": vhs.size}[vhs.family]
    report.add("dim_g_minus1_equals_dim_domain", gm1.dim == dim_omega,
               f"dim g_-1 = {gm1.dim}, expected {dim_omega}")

    # iterating g_{-1} on the highest line exhausts every Hodge piece
    span = [_unit(dim, 0)]
    ok_exhaust = True
    for q in range(1, n + 1):
        nxt = []
        for x in gm1_mats:
            for v in span:
                nxt.append(x.apply(v))
        s, h = frame.block_starts[q], frame.block_sizes[q]
        target = Subspace.from_vectors(dim, [_unit(dim, j) for j in range(s, s + h)])
        got = Subspace.from_vectors(dim, nxt)
        if got != target:
            ok_exhaust = False
        span = got.basis_columns()
    report.add("iterated_g_minus1_spans_blocks", ok_exhaust)

    return report


def gperp_minus1_annihilates_line(graded: GradedEnd) -> bool:
    """Whether every g-perp_{-1} element kills the highest line.

    True exactly when g-perp vanishes in degree -1.  The invariant complement
    of g does NOT have this property in general (the Maurer-Cartan engine
    therefore always extracts coframe coordinates through the full graded
    split rather than from first-column entries).
    """
    dim = graded.dim
    for c in graded.gperp_pieces.get(-1, Subspace.zero(dim * dim)).basis_columns():
        if any(Matrix.unflatten(c, dim, dim).col(0)):
            return False
    return True


# ---------------------------------------------------------------------------
# serialization


def _matrix_doc(m: Matrix) -> list:
    return [[format_rational(v) for v in row] for row in m.data]


def _matrix_from_doc(doc: list) -> Matrix:
    return Matrix([[parse_rational(v) for v in row] for row in doc])


def vhs_to_doc(vhs: CanonicalVHS) -> dict:
    n = vhs.weight
    return {
        "family": vhs.family,
        "size": vhs.size,
        "dim_U": vhs.dim_u,
        "weight": n,
        "Q": {"symmetry": vhs.q_form.symmetry, "gram": _matrix_doc(vhs.q_form.gram)},
        "g_basis": [_matrix_doc(x) for x in vhs.g_basis],
        "grading_element": _matrix_doc(vhs.grading_element),
        "hodge_pieces": {
            f"{n - q},{q}": _matrix_doc(vhs.hodge_pieces[(n - q, q)].basis)
            for q in range(n + 1)
        },
    }


def vhs_from_doc(doc: dict) -> CanonicalVHS:
    weight = int(doc["weight"])
    pieces = {}
    for key, basis in doc["hodge_pieces"].items():
        p, q = (int(t) for t in key.split(","))
        m = _matrix_from_doc(basis)
        pieces[(p, q)] = Subspace.from_columns(m) if m.cols else Subspace.zero(int(doc["dim_U"]))
    vhs = CanonicalVHS(
        family=doc["family"],
        size=int(doc["size"]),
        dim_u=int(doc["dim_U"]),
        weight=weight,
        q_form=BilinearForm(_matrix_from_doc(doc["Q"]["gram"]), int(doc["Q"]["symmetry"])),
        g_basis=[_matrix_from_doc(x) for x in doc["g_basis"]],
        grading_element=_matrix_from_doc(doc["grading_element"]),
        hodge_pieces=pieces,
    )
    _validate(vhs)
    return vhs


def dump_canonical_json(doc: dict) -> str:
    """Canonical JSON: sorted keys, fixed separators, trailing newline."""
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"
