import json

import pytest

from cyvhs.exact_linalg import Matrix, Subspace, rref
from cyvhs.hodge import (
    build_adapted_frame,
    build_family,
    dump_canonical_json,
    gperp_minus1_annihilates_line,
    grade_endomorphisms,
    verify_structure,
    vhs_from_doc,
    vhs_to_doc,
)

# derived dimension table: dim U, hodge numbers, dim g, dim End(U,Q), dim g-perp
EXPECTED = {
    ("C", 3): (14, [1, 6, 6, 1], 21, 105, 84),
    ("A", 3): (20, [1, 9, 9, 1], 35, 210, 175),
    ("A", 2): (6, [1, 4, 1], 15, 15, 0),
    ("BD", 3): (5, [1, 3, 1], 10, 10, 0),
}

_cache = {}


def family(tag, size):
    if (tag, size) not in _cache:
        vhs = build_family(tag, size)
        frame = build_adapted_frame(vhs)
        graded = grade_endomorphisms(vhs, frame)
        _cache[(tag, size)] = (vhs, frame, graded)
    return _cache[(tag, size)]


@pytest.mark.parametrize("tag,size", list(EXPECTED))
def test_dimension_table(tag, size):
    vhs, frame, graded = family(tag, size)
    dim_u, h, dim_g, dim_end, dim_perp = EXPECTED[(tag, size)]
    assert vhs.dim_u == dim_u
    assert vhs.hodge_numbers == h
    assert graded.dim_g() == dim_g
    assert graded.dim_end() == dim_end
    assert graded.dim_gperp() == dim_perp


@pytest.mark.parametrize("tag,size", list(EXPECTED))
def test_verify_structure_passes(tag, size):
    vhs, frame, graded = family(tag, size)
    report = verify_structure(vhs, graded)
    failed = [c.name for c in report.checks if not c.passed]
    assert not failed, failed


def test_build_family_rejects_bad_input():
    with pytest.raises(ValueError):
        build_family("E7", 1)
    with pytest.raises(ValueError):
        build_family("A", 0)
    with pytest.raises(ValueError):
        build_family("C", 0)


def test_weight_equals_rank():
    assert build_family("A", 2).weight == 2
    assert build_family("C", 3).weight == 3
    assert build_family("BD", 7).weight == 2


def test_g_closed_under_bracket():
    vhs, _, _ = family("C", 3)
    flat = [x.flatten() for x in vhs.g_basis]
    space = Subspace.from_vectors(len(flat[0]), flat)
    assert space.dim == len(vhs.g_basis)
    for a in vhs.g_basis[:6]:
        for b in vhs.g_basis[:6]:
            assert space.contains_vector(a.bracket(b).flatten())


def test_grading_has_integer_ad_eigenvalues():
    vhs, frame, graded = family("C", 3)
    h = frame.to_frame(vhs.grading_element)
    for deg in graded.degrees():
        for col in graded.E_pieces[deg].basis_columns():
            x = Matrix.unflatten(col, vhs.dim_u, vhs.dim_u)
            assert h.bracket(x) == x.scale(deg)


def test_e_pieces_match_setwise_definition():
    # eigenvalue-deg membership agrees with the block mapping property
    vhs, frame, graded = family("BD", 3)
    n = vhs.dim_u
    for deg in graded.degrees():
        for col in graded.E_pieces[deg].basis_columns():
            x = Matrix.unflatten(col, n, n)
            for j in range(n):
                qj = frame.block_of_position(j)
                img = x.col(j)
                for i, v in enumerate(img):
                    if v:
                        assert frame.block_of_position(i) == qj - deg


def test_adapted_frame_gram_bd3():
    vhs, frame, _ = family("BD", 3)
    gram = frame.basis_matrix.transpose() * vhs.q_form.gram * frame.basis_matrix
    d = vhs.dim_u - 1
    for i in range(vhs.dim_u):
        for j in range(vhs.dim_u):
            assert gram[i, j] == (1 if i + j == d else 0)


def test_adapted_frame_gram_c3_signed():
    vhs, frame, _ = family("C", 3)
    gram = frame.basis_matrix.transpose() * vhs.q_form.gram * frame.basis_matrix
    d = vhs.dim_u - 1
    half = (d + 1) / 2
    for i in range(vhs.dim_u):
        for j in range(vhs.dim_u):
            expect = 0
            if i + j == d:
                expect = 1 if i < half else -1
            assert gram[i, j] == expect


@pytest.mark.parametrize("tag,size", list(EXPECTED))
def test_frame_filtration_matches_hodge_sums(tag, size):
    vhs, frame, _ = family(tag, size)
    n = vhs.weight
    for p in range(n + 1):
        expected = Subspace.zero(vhs.dim_u)
        for r in range(p, n + 1):
            expected = expected.sum(vhs.hodge_pieces[(r, n - r)])
        assert frame.filtration_subspace(p) == expected
        assert frame.flag_dims[p] + 1 == expected.dim


def test_annihilation_subtlety():
    # The invariant complement does NOT kill the highest line once it is
    # nonzero in degree -1; trivial-complement families pass vacuously.
    assert gperp_minus1_annihilates_line(family("BD", 3)[2])
    assert gperp_minus1_annihilates_line(family("A", 2)[2])
    assert not gperp_minus1_annihilates_line(family("C", 3)[2])
    assert not gperp_minus1_annihilates_line(family("A", 3)[2])


def test_trace_pairing_nondegenerate_on_g():
    _, _, graded = family("C", 3)
    g = graded.g_frame
    gram = Matrix([[(a * b).trace() for b in g] for a in g])
    assert rref(gram).rank == len(g)


def test_serialization_roundtrip():
    vhs, _, _ = family("C", 3)
    doc = vhs_to_doc(vhs)
    text = dump_canonical_json(doc)
    doc2 = json.loads(text)
    vhs2 = vhs_from_doc(doc2)
    assert vhs2.dim_u == vhs.dim_u
    assert vhs2.g_basis == vhs.g_basis
    assert vhs2.q_form.gram == vhs.q_form.gram
    assert vhs2.hodge_pieces == vhs.hodge_pieces
    # byte stability
    assert dump_canonical_json(vhs_to_doc(vhs2)) == text


def test_small_families_build():
    for tag, size in [("A", 1), ("C", 1), ("BD", 1), ("BD", 2), ("BD", 4)]:
        vhs = build_family(tag, size)
        graded = grade_endomorphisms(vhs)
        report = verify_structure(vhs, graded)
        assert report.passed, [c.name for c in report.checks if not c.passed]


def test_c2_has_no_rational_adapted_frame():
    # the middle-block self-pairing of C(2) has discriminant 2, so the strict
    # anti-diagonal gram convention is not realizable over Q
    from cyvhs.hodge import ConstructionError

    vhs = build_family("C", 2)
    assert vhs.dim_u == 5 and vhs.hodge_numbers == [1, 3, 1]
    with pytest.raises(ConstructionError):
        build_adapted_frame(vhs)
