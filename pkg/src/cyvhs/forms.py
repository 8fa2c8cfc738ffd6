"""Characteristic forms, osculating filtrations, fundamental forms, and the
model coefficient tensors of the canonical embedding.

All tensors are expressed in adapted-frame coordinates: tangent directions are
indexed by the frame basis xi_1..xi_h of g_{-1} normalized by xi_a(e_0) = e_a,
and values land in the frame basis of the Hodge block U^(n-k,k).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .exact_linalg import (
    ONE,
    ZERO,
    CoordSolver,
    Matrix,
    MultiIndexTable,
    Subspace,
    format_rational,
    rref,
)
from .hodge import AdaptedFrame, CanonicalVHS, ConstructionError, GradedEnd, _unit


class RankJumpError(Exception):
    """The osculating quotient does not have the constant rank the model forces."""


def cy_tangent_basis(graded: GradedEnd) -> List[Matrix]:
    """The basis xi_a of g_{-1} with xi_a(e_0) = e_a, in frame coordinates.

    This realizes the tangent space of the compact dual at the base point;
    every tensor in this module is indexed against it.
    """
    frame = graded.frame
    dim = graded.dim
    h1 = frame.block_sizes[1]
    s1 = frame.block_starts[1]
    raw = [Matrix.unflatten(c, dim, dim) for c in graded.g_pieces[-1].basis_columns()]
    if len(raw) != h1:
        raise ConstructionError("g_{-1} does not match h^(n-1,1)")
    ev = Matrix([[raw[c][s1 + i, 0] for c in range(h1)] for i in range(h1)])
    from .hodge import _invert

    inv = _invert(ev)
    if inv is None:
        raise ConstructionError("evaluation at the highest line is singular")
    out = []
    for a in range(h1):
        acc = Matrix.zeros(dim, dim)
        col = inv.col(a)
        for c, x in zip(col, raw):
            if c:
                acc = acc + x.scale(c)
        out.append(acc)
    # g_{-1} is abelian; the iterated applications below rely on it exactly
    for x, y in itertools.combinations(out, 2):
        if not x.bracket(y).is_zero():
            raise ConstructionError("g_{-1} is not abelian")
    return out


@dataclass
class CharForm:
    """Coefficient tensor of a degree-k form Sym^k(g_{-1}) -> Hom(line, block_k).

    ``coeffs`` has one row per weakly increasing multi-index over the tangent
    basis and one column per frame vector of the target block.
    """

    k: int
    domain_dim: int
    codomain_dim: int
    table: MultiIndexTable
    coeffs: Matrix

    @property
    def rank(self) -> int:
        if self.codomain_dim == 0 or self.table.size == 0:
            return 0
        return rref(self.coeffs).rank

    def value(self, multi_index: Tuple[int, ...]) -> tuple:
        return self.coeffs.row(self.table.position[tuple(sorted(multi_index))])

    def row_span(self) -> Subspace:
        """Span of the coefficient functionals inside Sym^k coordinates."""
        return Subspace.from_vectors(
            self.table.size, [self.coeffs.col(j) for j in range(self.coeffs.cols)]
        )

    def to_doc(self) -> dict:
        entries = {}
        for pos, idx in enumerate(self.table.tuples):
            row = self.coeffs.row(pos)
            vals = {str(mu): format_rational(v) for mu, v in enumerate(row) if v}
            if vals:
                entries[",".join(str(a) for a in idx)] = vals
        return {
            "k": self.k,
            "domain_dim": self.domain_dim,
            "codomain_dim": self.codomain_dim,
            "coeffs": entries,
        }


def _empty_form(k: int, h1: int) -> CharForm:
    table = MultiIndexTable(h1, k, "sym")
    return CharForm(k, h1, 0, table, Matrix([[ ] for _ in range(table.size)]) if table.size else Matrix.zeros(0, 0))


def characteristic_form(vhs: CanonicalVHS, graded: GradedEnd, k: int) -> CharForm:
    """The degree-k characteristic form of the canonical embedding at the base point.

    Coefficients are the block-k frame coordinates of iterated applications
    xi_{a_1}...xi_{a_k}(e_0); the ambient grading makes the result land in
    block k on the nose, so reduction mod the deeper filtration is exact.
    """
    n = vhs.weight
    if k < 0 or k > n:
        raise ValueError(f"characteristic form degree must lie in 0..{n}, got {k}")
    frame = graded.frame
    h1 = frame.block_sizes[1]
    hk = frame.block_sizes[k]
    sk = frame.block_starts[k]
    xi = cy_tangent_basis(graded)
    table = MultiIndexTable(h1, k, "sym")
    rows = []
    for idx in table.tuples:
        v = _unit(graded.dim, 0)
        for a in reversed(idx):
            v = xi[a].apply(v)
        # grading: the value must be supported in block k exactly
        for pos, c in enumerate(v):
            if c and not (sk <= pos < sk + hk):
                raise ConstructionError("iterated application escaped its Hodge block")
        rows.append([v[sk + i] for i in range(hk)])
    return CharForm(k, h1, hk, table, Matrix(rows) if rows else Matrix.zeros(0, hk))


@dataclass
class OscFiltration:
    """Increasing osculating subspaces T^0 c T^1 c ... c T^m, frame coordinates."""

    spaces: List[Subspace]

    @property
    def m(self) -> int:
        return len(self.spaces) - 1

    def space(self, k: int) -> Subspace:
        return self.spaces[min(k, self.m)]


def osculating_filtration(vhs: CanonicalVHS, graded: GradedEnd) -> OscFiltration:
    """T^k = T^(k-1) + g_{-1}(T^(k-1)) starting from the highest line."""
    dim = graded.dim
    xi = cy_tangent_basis(graded)
    spaces = [Subspace.from_vectors(dim, [_unit(dim, 0)])]
    while True:
        prev = spaces[-1]
        vecs = list(prev.basis_columns())
        for x in xi:
            for v in prev.basis_columns():
                vecs.append(x.apply(v))
        nxt = Subspace.from_vectors(dim, vecs)
        if nxt == prev:
            break
        spaces.append(nxt)
    return OscFiltration(spaces)


def fundamental_form(vhs: CanonicalVHS, graded: GradedEnd, k: int,
                     osc: Optional[OscFiltration] = None) -> CharForm:
    """The degree-k fundamental form computed through the osculating quotients.

    Independent route from :func:`characteristic_form`: values are reduced
    modulo T^(k-1) by echelon elimination and re-expressed in the classes of
    the block-k frame vectors.  Tensor equality of the two routes is the
    C = F identification.
    """
    n = vhs.weight
    if k < 0:
        raise ValueError("degree must be nonnegative")
    frame = graded.frame
    dim = graded.dim
    h1 = frame.block_sizes[1]
    if osc is None:
        osc = osculating_filtration(vhs, graded)
    if k > osc.m:
        return _empty_form(k, h1)
    if k == 0:
        table = MultiIndexTable(h1, 0, "sym")
        return CharForm(0, h1, 1, table, Matrix([[ONE]]))
    hk = frame.block_sizes[k] if k <= n else 0
    sk = frame.block_starts[k] if k <= n else 0
    prev = osc.space(k - 1)
    # classes of the block-k frame vectors must span T^k / T^(k-1)
    reduced_units = [prev.reduce(_unit(dim, sk + i)) for i in range(hk)]
    try:
        solver = CoordSolver([{i: v for i, v in enumerate(r) if v} for r in reduced_units])
    except ValueError as exc:
        raise RankJumpError("block classes are dependent modulo the previous osculating space") from exc
    xi = cy_tangent_basis(graded)
    table = MultiIndexTable(h1, k, "sym")
    rows = []
    for idx in table.tuples:
        v = _unit(dim, 0)
        for a in reversed(idx):
            v = xi[a].apply(v)
        r = prev.reduce(v)
        coords = solver.solve({i: c for i, c in enumerate(r) if c})
        if coords is None:
            raise RankJumpError("osculating value escaped the expected quotient")
        rows.append(coords)
    return CharForm(k, h1, hk, table, Matrix(rows) if rows else Matrix.zeros(0, hk))


@dataclass
class ModelCoeffs:
    """Frame coefficient tensors of the canonical model.

    ``r[k]`` maps (mu, nu, a) to the block-k coordinate mu of xi_a(e_nu) for
    e_nu in block k-1; level 1 is the identity by the normalization of the
    tangent basis.  ``level_matrix(k, a)`` is the block_(k-1) -> block_k
    matrix of xi_a.
    """

    weight: int
    block_sizes: List[int]
    xi: List[Matrix]
    r: Dict[int, List[Matrix]]  # k -> [matrix of xi_a restricted, per a]

    @property
    def domain_dim(self) -> int:
        return self.block_sizes[1]

    def level_matrix(self, k: int, a: int) -> Matrix:
        return self.r[k][a]

    def rtilde(self, k: int) -> Dict[Tuple[int, ...], tuple]:
        """Composite coefficients for every ordered index tuple of length k."""
        h1 = self.domain_dim
        out: Dict[Tuple[int, ...], tuple] = {(): (ONE,)}
        for level in range(1, k + 1):
            nxt = {}
            for idx, vec in out.items():
                for a in range(h1):
                    nxt[(a,) + idx] = self.r[level][a].apply(vec)
            out = nxt
        return out

    def rtilde_symmetrized(self, k: int) -> CharForm:
        """Symmetrization of the composite tensor, shaped like a CharForm."""
        h1 = self.domain_dim
        hk = self.block_sizes[k] if k <= self.weight else 0
        table = MultiIndexTable(h1, k, "sym")
        full = self.rtilde(k)
        rows = []
        for idx in table.tuples:
            perms = set(itertools.permutations(idx))
            acc = [ZERO] * hk
            for p in perms:
                v = full[p]
                for i in range(hk):
                    acc[i] += v[i]
            count = len(perms)
            rows.append([c / count for c in acc])
        return CharForm(k, h1, hk, table, Matrix(rows) if rows else Matrix.zeros(0, hk))

    def to_doc(self) -> dict:
        levels = {}
        for k, mats in self.r.items():
            entries = {}
            for a, m in enumerate(mats):
                for mu in range(m.rows):
                    for nu in range(m.cols):
                        if m[mu, nu]:
                            entries[f"{mu},{nu},{a}"] = format_rational(m[mu, nu])
            levels[str(k)] = entries
        return {"weight": self.weight, "block_sizes": self.block_sizes, "r": levels}


def model_r_coeffs(vhs: CanonicalVHS, graded: GradedEnd,
                   frame: Optional[AdaptedFrame] = None) -> ModelCoeffs:
    """Extract the model's r-tensors from the adapted frame and verify their
    joint injectivity (the solvability input of the coefficient recursion)."""
    if frame is None:
        frame = graded.frame
    if frame is not graded.frame and frame.basis_matrix != graded.frame.basis_matrix:
        raise ValueError("frame does not match the graded decomposition")
    n = vhs.weight
    xi = cy_tangent_basis(graded)
    sizes = frame.block_sizes
    starts = frame.block_starts
    r: Dict[int, List[Matrix]] = {}
    for k in range(1, n + 1):
        hk, hk1 = sizes[k], sizes[k - 1]
        sk, sk1 = starts[k], starts[k - 1]
        mats = []
        for x in xi:
            mats.append(Matrix([[x[sk + mu, sk1 + nu] for nu in range(hk1)] for mu in range(hk)]))
        r[k] = mats
        # joint injectivity: Y_mu with r^mu_(nu a) Y_mu = 0 for all (nu, a) is trivial
        rows = []
        for a, m in enumerate(mats):
            for nu in range(hk1):
                rows.append([m[mu, nu] for mu in range(hk)])
        rank = rref(Matrix(rows)).rank if rows else 0
        if rank != hk:
            raise ConstructionError(f"level-{k} model coefficients are not jointly injective")
    coeffs = ModelCoeffs(weight=n, block_sizes=sizes, xi=xi, r=r)
    # level 1 is the Kronecker delta by construction of the tangent basis
    ident = Matrix.identity(sizes[1])
    for a, m in enumerate(coeffs.r[1]):
        for i in range(sizes[1]):
            if m[i, 0] != ident[i, a]:
                raise ConstructionError("level-1 coefficients are not the identity")
    return coeffs


def invariant_dims(forms: Sequence[CharForm]) -> List[int]:
    """The integer invariants c^k = rank of each coefficient tensor."""
    return [f.rank for f in forms]


def _pullback_span(lam: Matrix, form: CharForm) -> Subspace:
    """Span of the coefficient functionals after substituting lam into each slot."""
    h = form.domain_dim
    k = form.k
    table = form.table
    cols = []
    for j in range(form.coeffs.cols):
        # F_j as a symmetric function on tuples; pull back by lam
        vals = []
        for beta in table.tuples:
            total = ZERO
            for alpha in itertools.product(range(h), repeat=k):
                c = ONE
                for a, b in zip(alpha, beta):
                    c *= lam[a, b]
                    if not c:
                        break
                if c:
                    total += c * form.coeffs[table.position[tuple(sorted(alpha))], j]
            vals.append(total)
        cols.append(vals)
    return Subspace.from_vectors(table.size, cols)


def check_isomorphism_under(lam: Matrix, forms_a: Sequence[CharForm],
                            forms_b: Sequence[CharForm]) -> bool:
    """Decide whether Sym^k(lam)* carries each span of forms_b onto forms_a.

    This is a verifier for a supplied linear map, not a search.
    """
    if lam.rows != lam.cols:
        raise ValueError("lambda must be square")
    if rref(lam).rank != lam.rows:
        raise ValueError("lambda is singular")
    if len(forms_a) != len(forms_b):
        return False
    for fa, fb in zip(forms_a, forms_b):
        if fa.k != fb.k or fa.domain_dim != fb.domain_dim or fa.domain_dim != lam.rows:
            return False
        if _pullback_span(lam, fb) != fa.row_span():
            return False
    return True
