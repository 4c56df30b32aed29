import io
import json
import math

import numpy as np
import pytest
import scipy.io
from hypothesis import given, strategies as st

from bivtoda.errors import ParameterError, TruncationError
from bivtoda.jacobi import (MONIC, ORTHONORMAL, assemble, commutation_residuals,
                            corner_moment, interior_commutator, spectrum, spectrum_csv)
from bivtoda.ops import build_ops, level_offset, orthonormalize, recurrence_from_ops
from bivtoda.toda import exact_state
from bivtoda.weights import SQUARE, TRIANGLE, WeightSpec

SQ = WeightSpec(SQUARE)
TR = WeightSpec(TRIANGLE)


def _data(spec, N):
    ops = build_ops(spec, N)
    rec = recurrence_from_ops(ops)
    return ops, rec, orthonormalize(ops, rec)


def test_monic_example():
    _, rec, _ = _data(SQ, 1)
    J = assemble(rec, 1)
    assert J.kind == MONIC
    assert np.allclose(J.matrix, [[0, 1, 0], [1 / 3, 0, 0], [0, 0, 0]], atol=1e-14)


def test_orthonormal_example():
    _, _, orth = _data(SQ, 1)
    L = assemble(orth, 1)
    assert L.kind == ORTHONORMAL
    expected = np.zeros((3, 3))
    expected[0, 1] = expected[1, 0] = 1 / math.sqrt(3)
    assert np.allclose(L.matrix, expected, atol=1e-14)


@pytest.mark.parametrize("spec", [SQ.with_time(0.2), WeightSpec(TRIANGLE, {"b": 1}, 0.4)])
def test_conjugation(spec):
    ops, rec, orth = _data(spec, 4)
    N = 4
    S = np.zeros((level_offset(N + 1),) * 2)
    Si = np.zeros_like(S)
    for n in range(N + 1):
        sl = slice(level_offset(n), level_offset(n + 1))
        S[sl, sl] = orth.Hsqrt[n]
        Si[sl, sl] = orth.Hinvsqrt[n]
    for i in (1, 2):
        J = assemble(rec, i).matrix
        L = assemble(orth, i).matrix
        assert np.allclose(Si @ J @ S, L, atol=1e-11)
        assert np.allclose(L, L.T, atol=1e-12)


def test_block_sparsity():
    _, rec, _ = _data(TR, 4)
    J = assemble(rec, 2)
    for r in range(5):
        for c in range(5):
            if abs(r - c) > 1:
                assert not np.any(J.block(r, c))


def test_assemble_errors():
    _, rec, _ = _data(SQ, 2)
    with pytest.raises(ParameterError):
        assemble(rec, 1, 3)
    with pytest.raises(ParameterError):
        assemble(rec, 3)


def test_corner_examples():
    _, rec, _ = _data(SQ, 3)
    J1, J2 = assemble(rec, 1), assemble(rec, 2)
    assert corner_moment(J1, J2, 0, 0) == 1.0
    assert abs(corner_moment(J1, J2, 1, 1)) < 1e-15
    _, rec, _ = _data(TR, 2)
    J1, J2 = assemble(rec, 1), assemble(rec, 2)
    assert corner_moment(J1, J2, 1, 1) == pytest.approx(1 / 12, rel=1e-13)
    with pytest.raises(TruncationError):
        corner_moment(J1, J2, 2, 1)


def test_commutation_examples():
    assert commutation_residuals(exact_state(SQ, 0.0, 6).rec)["max"] < 1e-12
    assert commutation_residuals(exact_state(TR, 0.3, 6).rec)["max"] < 1e-11


def test_interior_commutator():
    _, rec, _ = _data(WeightSpec(TRIANGLE, {"a": 1}, 0.3), 6)
    assert interior_commutator(assemble(rec, 1), assemble(rec, 2)) < 1e-11


def test_spectrum_examples():
    _, _, orth = _data(SQ, 2)
    r3, r35 = 1 / math.sqrt(3), math.sqrt(3 / 5)
    assert np.allclose(spectrum(orth, 1, 1), [-r3, 0, r3], atol=1e-14)
    assert np.allclose(spectrum(orth, 1, 2), [-r35, -r3, 0, 0, r3, r35], atol=1e-14)


def test_monic_spectrum_matches():
    _, rec, orth = _data(WeightSpec(TRIANGLE, {"c": 1}, 0.5), 5)
    for i in (1, 2):
        monic = np.sort(np.linalg.eigvals(assemble(rec, i).matrix).real)
        assert np.allclose(monic, spectrum(orth, i), atol=1e-10)


def test_exports():
    _, _, orth = _data(SQ, 1)
    L = assemble(orth, 2)
    doc = json.loads(L.to_json())
    assert doc["N"] == 1 and doc["kind"] == ORTHONORMAL and len(doc["matrix"]) == 3
    buf = io.BytesIO()
    L.to_matrix_market(buf)
    buf.seek(0)
    back = scipy.io.mmread(buf)
    assert np.allclose(back.toarray(), L.matrix, atol=1e-16)
    text = spectrum_csv([(0.0, 1, 0, -0.5)])
    assert text.splitlines() == ["t,level,index,eigenvalue", "0.0,1,0,-0.5"]


@st.composite
def specs(draw):
    family = draw(st.sampled_from([SQUARE, TRIANGLE]))
    names = ("alpha", "beta", "gamma", "delta") if family == SQUARE else ("a", "b", "c")
    return WeightSpec(family, {n: draw(st.floats(-0.5, 2.0)) for n in names},
                      draw(st.floats(0.0, 1.0)))


@given(specs())
def test_moment_recovery_and_reality(spec):
    ops, rec, orth = _data(spec, 6)
    J1, J2 = assemble(rec, 1), assemble(rec, 2)
    for h in range(7):
        for k in range(7 - h):
            assert corner_moment(J1, J2, h, k) == pytest.approx(ops.moments[h, k], abs=1e-11)
    for i in (1, 2):
        L = assemble(orth, i).matrix
        assert np.max(np.abs(np.linalg.eigvals(L).imag)) < 1e-10
    assert commutation_residuals(rec)["max"] < 1e-11


@given(st.integers(0, 3), st.integers(0, 3))
def test_product_bandwidth(h, k):
    _, rec, _ = _data(TR, 6)
    P = np.linalg.matrix_power(assemble(rec, 1).matrix, h) @ \
        np.linalg.matrix_power(assemble(rec, 2).matrix, k)
    J = assemble(rec, 1)
    for r in range(7):
        for c in range(7):
            if abs(r - c) > h + k:
                sl = (slice(level_offset(r), level_offset(r + 1)),
                      slice(level_offset(c), level_offset(c + 1)))
                assert not np.any(P[sl])
