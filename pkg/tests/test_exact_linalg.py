import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cyvhs.exact_linalg import (
    CoordSolver,
    Matrix,
    MultiIndexTable,
    Subspace,
    format_rational,
    induced_power_operator,
    parse_rational,
    rref,
    solve,
)

rationals = st.fractions(min_value=-20, max_value=20, max_denominator=8)


def rand_matrix(rng, rows, cols, lo=-4, hi=4):
    return Matrix([[rng.randint(lo, hi) for _ in range(cols)] for _ in range(rows)])


def test_rref_identity():
    r = rref(Matrix.identity(3))
    assert r.rank == 3
    assert r.kernel.dim == 0
    assert r.image == Subspace.full(3)


def test_rref_zero():
    r = rref(Matrix.zeros(2, 4))
    assert r.rank == 0
    assert r.kernel.dim == 4


def test_rref_rank_one():
    r = rref(Matrix([[1, 2], [2, 4]]))
    assert r.rank == 1
    assert r.kernel.dim == 1
    # kernel is the line through (-2, 1)
    assert r.kernel.contains_vector([-2, 1])


def test_rref_rank_nullity():
    rng = random.Random(7)
    for _ in range(25):
        m = rand_matrix(rng, rng.randint(1, 6), rng.randint(1, 6))
        r = rref(m)
        assert r.rank + r.kernel.dim == m.cols
        assert r.image.dim == r.rank
        for kv in r.kernel.basis_columns():
            assert not any(m.apply(kv))


def test_rank_of_product_bounded():
    rng = random.Random(11)
    for _ in range(25):
        n, k, m = rng.randint(1, 5), rng.randint(1, 5), rng.randint(1, 5)
        a, b = rand_matrix(rng, n, k), rand_matrix(rng, k, m)
        assert rref(a * b).rank <= min(rref(a).rank, rref(b).rank)


def test_solve_identity():
    x, ker = solve(Matrix.identity(3), [1, 2, 3])
    assert x == (1, 2, 3)
    assert ker.dim == 0


def test_solve_underdetermined():
    res = solve(Matrix([[1, 1]]), [2])
    assert res is not None
    x, ker = res
    assert sum(x) == 2
    assert ker.dim == 1
    assert ker.contains_vector([1, -1])


def test_solve_inconsistent():
    assert solve(Matrix([[1], [0]]), [0, 1]) is None


def test_solve_random_consistency():
    rng = random.Random(3)
    for _ in range(25):
        a = rand_matrix(rng, rng.randint(1, 5), rng.randint(1, 5))
        xs = [Fraction(rng.randint(-3, 3)) for _ in range(a.cols)]
        b = a.apply(xs)
        res = solve(a, b)
        assert res is not None
        x, ker = res
        assert a.apply(x) == tuple(b)
        assert ker.dim == a.cols - rref(a).rank


def test_subspace_idempotence():
    s = Subspace.from_vectors(3, [[1, 0, 2], [0, 1, 1]])
    assert s.sum(s) == s
    assert s.intersect(s) == s


def test_subspace_intersection():
    e12 = Subspace.from_vectors(3, [[1, 0, 0], [0, 1, 0]])
    e23 = Subspace.from_vectors(3, [[0, 1, 0], [0, 0, 1]])
    meet = e12.intersect(e23)
    assert meet.dim == 1
    assert meet.contains_vector([0, 1, 0])


def test_quotient_dimension():
    s = Subspace.from_vectors(3, [[1, 0, 0]])
    q = s.quotient_basis()
    assert len(q) == 2
    # classes of the quotient basis really span ambient/s
    total = Subspace.from_vectors(3, list(s.basis_columns()) + q)
    assert total == Subspace.full(3)


def test_subspace_canonical_under_change_of_basis():
    rng = random.Random(19)
    for _ in range(20):
        n, k = 5, 3
        vecs = [[rng.randint(-4, 4) for _ in range(n)] for _ in range(k)]
        s1 = Subspace.from_vectors(n, vecs)
        # random invertible recombination of the generators
        while True:
            c = [[Fraction(rng.randint(-3, 3)) for _ in range(k)] for _ in range(k)]
            if rref(Matrix(c)).rank == k:
                break
        mixed = [[sum(c[i][j] * Fraction(vecs[j][t]) for j in range(k)) for t in range(n)]
                 for i in range(k)]
        assert Subspace.from_vectors(n, mixed) == s1


def test_subspace_ambient_mismatch():
    with pytest.raises(ValueError):
        Subspace.full(2).sum(Subspace.full(3))


def test_coord_solver_roundtrip():
    rng = random.Random(23)
    vecs = [{0: Fraction(1), 2: Fraction(2)}, {1: Fraction(3)}, {2: Fraction(1), 3: Fraction(-1)}]
    cs = CoordSolver(vecs)
    for _ in range(10):
        coeffs = [Fraction(rng.randint(-3, 3)) for _ in vecs]
        v = {}
        for c, vec in zip(coeffs, vecs):
            for k, val in vec.items():
                v[k] = v.get(k, Fraction(0)) + c * val
        got = cs.solve(v)
        assert got == coeffs
    assert cs.solve({5: Fraction(1)}) is None


def test_multi_index_sizes():
    t = MultiIndexTable(4, 2, "wedge")
    assert t.size == t.expected_size() == 6
    s = MultiIndexTable(3, 3, "sym")
    assert s.size == s.expected_size() == 10


def test_induced_identity_wedge():
    op = induced_power_operator(Matrix.identity(5), 3, "wedge")
    assert op == Matrix.identity(10).scale(3)


def test_induced_zero():
    op = induced_power_operator(Matrix.zeros(4, 4), 2, "sym")
    assert op.is_zero()


def _brute_force_wedge_action(x, k, table):
    """Leibniz expansion of x on each basis wedge, reduced by hand."""
    n = x.rows
    cols = []
    for idx in table.tuples:
        acc = {}
        for slot in range(len(idx)):
            for i in range(n):
                c = x[i, idx[slot]]
                if not c:
                    continue
                new = list(idx)
                new[slot] = i
                if len(set(new)) < len(new):
                    continue
                order = sorted(range(len(new)), key=lambda t: new[t])
                sign = 1
                seen = list(new)
                # count inversions
                for a in range(len(seen)):
                    for b in range(a + 1, len(seen)):
                        if seen[a] > seen[b]:
                            sign = -sign
                key = tuple(sorted(new))
                acc[key] = acc.get(key, Fraction(0)) + sign * c
        cols.append([acc.get(t, Fraction(0)) for t in table.tuples])
    return Matrix.from_cols(cols, rows=table.size)


def test_induced_e12_against_bruteforce():
    x = Matrix([[0, 1, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]])
    table = MultiIndexTable(4, 2, "wedge")
    assert induced_power_operator(x, 2, "wedge") == _brute_force_wedge_action(x, 2, table)


def test_induced_respects_brackets():
    rng = random.Random(5)
    for kind in ("wedge", "sym"):
        for _ in range(6):
            n = rng.randint(2, 5)
            k = rng.randint(1, 3)
            if kind == "wedge" and k > n:
                continue
            x, y = rand_matrix(rng, n, n, -2, 2), rand_matrix(rng, n, n, -2, 2)
            lhs = induced_power_operator(x.bracket(y), k, kind)
            rhs = induced_power_operator(x, k, kind).bracket(induced_power_operator(y, k, kind))
            assert lhs == rhs


@given(st.lists(st.lists(rationals, min_size=3, max_size=3), min_size=2, max_size=4))
@settings(max_examples=40, deadline=None)
def test_rref_kernel_property(rows):
    m = Matrix(rows)
    r = rref(m)
    assert r.rank + r.kernel.dim == m.cols
    for kv in r.kernel.basis_columns():
        assert not any(m.apply(kv))


@given(rationals)
def test_rational_roundtrip(x):
    assert parse_rational(format_rational(x)) == x


def test_rational_formatting():
    assert format_rational(Fraction(3, 1)) == "3"
    assert format_rational(Fraction(-1, 2)) == "-1/2"
