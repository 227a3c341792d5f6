import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qnewton.encoding import encode_problem, rescale_to_classical, spectral_prescale
from qnewton.errors import (
    DegenerateDirectionError,
    DimensionMismatchError,
    NotPositiveDefiniteError,
    OutOfRangeError,
    ZeroVectorError,
)
from qnewton.fixedpoint import FixedPointFormat
from qnewton.model import (
    count_below,
    count_by_enumeration,
    invert_by_counting,
    model_qlss_solve,
    quantize_eigenvalue,
    quantize_spectrum,
)


# fixed point ------------------------------------------------------------------


def test_format_m4():
    f = FixedPointFormat(4)
    assert (f.k, f.integer_bits, f.resolution, f.range_limit) == (2, 2, 0.25, 4.0)
    assert f.max_magnitude == 3.75
    assert f.evolution_time == pytest.approx(2 * math.pi / 4)
    assert f.error_bound == 0.25


def test_format_signed_and_odd():
    f = FixedPointFormat(5, signed=True)
    assert (f.k, f.integer_bits, f.magnitude_bits, f.range_limit) == (2, 3, 4, 4.0)
    with pytest.raises(ValueError):
        FixedPointFormat(0)
    with pytest.raises(ValueError):
        FixedPointFormat(1, signed=True)


def test_prescale_limit():
    f = FixedPointFormat(4)
    assert f.prescale_limit(None) == 3.75
    assert f.prescale_limit(2.0) == 2.0
    assert FixedPointFormat(2).prescale_limit(4.0) == 1.5


# quantization and counting ----------------------------------------------------


@pytest.mark.parametrize("lam, value, mantissa", [(2.0, 2.0, 8), (1.3, 1.25, 5), (1.125, 1.25, 5), (-1.3, 1.25, 5)])
def test_quantize_examples(lam, value, mantissa):
    q = quantize_eigenvalue(lam, FixedPointFormat(4))
    assert (q.value, q.mantissa, q.sign) == (value, mantissa, -1 if lam < 0 else 1)


def test_quantize_out_of_range_lists_values():
    with pytest.raises(OutOfRangeError) as info:
        quantize_spectrum([1.0, 4.0, -5.0], FixedPointFormat(4))
    assert info.value.values == (4.0, -5.0)
    # rounding up to 2**m is also out of range
    with pytest.raises(OutOfRangeError):
        quantize_eigenvalue(3.9, FixedPointFormat(4))


@pytest.mark.parametrize("mantissa, inverse", [(4, 1.0), (1, 4.0), (12, 0.5), (0, 4.0)])
def test_invert_examples(mantissa, inverse):
    f = FixedPointFormat(4)
    q = quantize_eigenvalue(mantissa * f.resolution, f)
    assert invert_by_counting(q, f) == inverse


def test_negative_eigenvalue_keeps_sign():
    f = FixedPointFormat(4)
    assert invert_by_counting(quantize_eigenvalue(-2.0, f), f) == -0.5


@pytest.mark.parametrize("m", range(1, 13))
def test_closed_form_count_is_exhaustively_exact(m):
    L = np.arange(2**m)
    j = np.arange(2**m)
    brute = np.sum(j[None, :] * L[:, None] < 2**m, axis=1)
    closed = count_below(L, m)
    np.testing.assert_array_equal(closed, brute)
    assert np.all(np.diff(closed) <= 0)  # non-increasing in the mantissa


@pytest.mark.parametrize("m", [1, 4, 7])
def test_enumeration_helper(m):
    for L in range(2**m):
        assert count_by_enumeration(L, m) == count_below(L, m)


@settings(max_examples=300, deadline=None)
@given(st.integers(2, 40), st.floats(0, 1, exclude_max=True))
def test_step_errors_within_bounds(m, u):
    f = FixedPointFormat(m)
    lam = f.resolution + u * (f.range_limit - 1.5 * f.resolution)
    q = quantize_eigenvalue(lam, f)
    assert abs(q.value - lam) <= 2.0 ** (-f.k - 1) + 1e-15
    assert 0 <= invert_by_counting(q, f) - 1 / q.value < 2.0 ** (f.k - m)


# encoding ---------------------------------------------------------------------


def test_encode_modes():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(4, 4))
    b = rng.normal(size=4)
    enc = encode_problem(A, b, "dilation")
    assert enc.matrix.shape == (8, 8) and enc.signed
    y = np.linalg.solve(enc.matrix, enc.rhs)
    np.testing.assert_allclose(enc.decode(y), np.linalg.solve(A, b), atol=1e-12)
    ne = encode_problem(np.eye(3), np.arange(3.0), "normal-equations")
    np.testing.assert_array_equal(ne.matrix, np.eye(3))
    np.testing.assert_array_equal(ne.rhs, np.arange(3.0))
    assert encode_problem(A + A.T + 20 * np.eye(4), b).mode == "hermitian-pd"
    assert encode_problem(A, b).mode == "dilation"
    with pytest.raises(NotPositiveDefiniteError):
        encode_problem(np.diag([1.0, -1.0]), [1.0, 1.0], "hermitian-pd")
    with pytest.raises(DimensionMismatchError):
        encode_problem(np.eye(2), [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        encode_problem(np.eye(2), [1.0, 2.0], "cholesky")


def test_spectral_prescale():
    f = FixedPointFormat(4)
    _, s = spectral_prescale(np.eye(2), f)
    assert s == 1.0
    scaled, s = spectral_prescale(np.diag([100.0, 1.0]), f, target=None)
    assert s <= 0.0375
    assert np.max(np.abs(np.linalg.eigvalsh(scaled))) <= f.max_magnitude
    scaled, s = spectral_prescale(np.diag([100.0, 1.0]), f)
    assert np.max(np.abs(scaled)) == pytest.approx(f.prescale_limit())


def test_rescale_to_classical():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(5, 5))
    x = rng.normal(size=5)
    b = A @ x
    np.testing.assert_allclose(rescale_to_classical(x / np.linalg.norm(x), A, b), x, rtol=1e-12)
    xh = np.array([0.6, 0.8])
    assert rescale_to_classical(xh, np.eye(2), [1.0, 2.0]) == pytest.approx(xh * (0.6 + 1.6))
    # perturbed direction: the closed form beats a grid scan of scalars
    d = x / np.linalg.norm(x) + 0.1 * rng.normal(size=5)
    best = rescale_to_classical(d, A, b)
    alpha = np.vdot(best, d) / np.vdot(d, d)
    scan = alpha + np.linspace(-1, 1, 2001)
    resid = [np.linalg.norm(A @ (a * d) - b) for a in scan]
    assert np.linalg.norm(A @ best - b) <= min(resid) + 1e-12
    with pytest.raises(DegenerateDirectionError):
        rescale_to_classical(np.array([1.0, -1.0]), np.ones((2, 2)), [1.0, 1.0])


# model solver -----------------------------------------------------------------


def test_model_diag_example():
    r = model_qlss_solve(np.diag([1.0, 2.0]), np.ones(2) / math.sqrt(2), 4, prescale=False)
    np.testing.assert_allclose(r.direction, np.array([1.0, 0.5]) / math.sqrt(1.25), atol=1e-12)
    np.testing.assert_allclose(r.solution, [1 / math.sqrt(2), 0.5 / math.sqrt(2)], atol=1e-12)


def test_model_identity():
    b = np.array([3.0, -1.0, 2.0])
    np.testing.assert_allclose(model_qlss_solve(np.eye(3), b, 6).solution, b, atol=1e-12)


def test_model_errors():
    with pytest.raises(ZeroVectorError):
        model_qlss_solve(np.eye(2), np.zeros(2), 4)
    with pytest.raises(OutOfRangeError):
        model_qlss_solve(np.diag([1.0, 8.0]), np.ones(2), 4, prescale=False)
    with pytest.raises(NotPositiveDefiniteError):
        model_qlss_solve(np.diag([1.0, -1.0]), np.ones(2), 4, mode="hermitian-pd")


def test_model_diagnostics_breakdown():
    r = model_qlss_solve(np.diag([1.3, 0.6, 2.0]), np.ones(3), 6, prescale=False)
    d = r.diagnostics
    np.testing.assert_allclose(d["quantized"], [0.625, 1.25, 2.0])  # ascending
    assert np.all(d["approximation_error"] <= 2.0**-4 + 1e-15)
    assert np.all(d["inversion_error"] < 2.0 ** (3 - 6))
    assert d["underflow"] == 0 and d["prescale"] == 1.0
    # exact success probability from counts: sum |beta|^2 (count / 2^m)^2
    counts = count_below(np.array([5, 10, 16]), 6)
    assert r.success_probability == pytest.approx(np.sum((counts / 64.0) ** 2) / 3)


@pytest.mark.parametrize("signed", [False, True])
def test_dilation_svd_path_matches_eigendecomposition(signed):
    rng = np.random.default_rng(4)
    A = rng.normal(size=(6, 6))
    b = rng.normal(size=6)
    for m in (4, 7, 12):
        fast = model_qlss_solve(A, b, m, "dilation", signed_clock=signed)
        full = model_qlss_solve(A, b, m, "dilation", signed_clock=signed, use_svd=False)
        np.testing.assert_allclose(fast.solution, full.solution, atol=1e-9)
        assert fast.success_probability == pytest.approx(full.success_probability, rel=1e-9)


def test_large_m_approaches_exact_solution():
    rng = np.random.default_rng(2)
    M = rng.normal(size=(8, 8))
    A = M @ M.T + 8 * np.eye(8)
    b = rng.normal(size=8)
    x = np.linalg.solve(A, b)
    errs = [np.linalg.norm(model_qlss_solve(A, b, m).solution - x) / np.linalg.norm(x) for m in (8, 16, 24, 40)]
    assert errs[-1] < 4 * 2.0**-20
    assert errs == sorted(errs, reverse=True)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(6, 20))
def test_solution_error_bound_scales_with_kappa(seed, m):
    rng = np.random.default_rng(seed)
    n = 6
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    lam = rng.uniform(1.0, 3.5, size=n)
    A = Q @ np.diag(lam) @ Q.T
    b = rng.normal(size=n)
    x = np.linalg.solve(A, b)
    r = model_qlss_solve(A, b, m, prescale=False)
    kappa = lam.max() / lam.min()
    assert np.linalg.norm(r.solution - x) / np.linalg.norm(x) <= 4 * kappa * 2.0 ** (-m / 2)
