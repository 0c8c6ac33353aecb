import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chanfuse import vsa
from chanfuse.errors import DomainError, InvalidDimensionError, ShapeError


def naive_convolve(a, b):
    d = len(a)
    out = np.zeros(d)
    for n in range(d):
        for k in range(d):
            out[n] += a[k] * b[(n - k) % d]
    return out


def test_basis_has_unit_spectrum():
    v = vsa.sample_unitary_basis(8, 0)
    np.testing.assert_allclose(np.abs(np.fft.fft(v.values)), 1.0, atol=1e-12)


def test_basis_is_deterministic():
    a = vsa.sample_unitary_basis(8, 0)
    b = vsa.sample_unitary_basis(8, 0)
    assert a.values.tobytes() == b.values.tobytes()


@pytest.mark.parametrize("dim", [2, 3, 8, 257, 1024])
def test_basis_invariants(dim):
    v = vsa.sample_unitary_basis(dim, 7)
    spec = np.fft.fft(v.values)
    np.testing.assert_allclose(np.abs(spec), 1.0, atol=1e-9)
    assert spec[0].real == pytest.approx(1.0, abs=1e-12)
    if dim % 2 == 0:
        assert spec[dim // 2].real == pytest.approx(1.0, abs=1e-12)
    # Parseval with 1/d on the inverse
    assert np.linalg.norm(v.values) == pytest.approx(1.0, abs=1e-9)


def test_basis_phases_in_principal_range():
    v = vsa.sample_unitary_basis(1024, 3)
    free = v.phases[1:-1]
    assert np.all(free > -np.pi) and np.all(free <= np.pi)
    assert v.phases[0] == 0.0 and v.phases[-1] == 0.0


def test_basis_rejects_small_dim():
    with pytest.raises(InvalidDimensionError):
        vsa.sample_unitary_basis(1, 0)


def test_convolve_identity_and_shift():
    b = np.array([0.5, -0.2, 0.1, 0.7])
    np.testing.assert_allclose(vsa.circular_convolve([1, 0, 0, 0], b), b, atol=1e-15)
    np.testing.assert_allclose(vsa.circular_convolve([0, 1, 0, 0], [1, 2, 3, 4]), [4, 1, 2, 3], atol=1e-12)


def test_convolve_length_mismatch():
    with pytest.raises(ShapeError):
        vsa.circular_convolve(np.ones(4), np.ones(5))


@pytest.mark.parametrize("d", [4, 8, 64, 257])
def test_convolve_matches_naive(d):
    rng = np.random.default_rng(d)
    for _ in range(5):
        a, b = rng.standard_normal((2, d))
        ref = naive_convolve(a, b)
        got = vsa.circular_convolve(a, b)
        assert np.max(np.abs(got - ref)) / np.max(np.abs(ref)) < 1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 96), st.integers(0, 2**32 - 1))
def test_binding_algebra(d, seed):
    rng = np.random.default_rng(seed)
    a, b, c, k = rng.standard_normal((4, d))
    delta = np.zeros(d)
    delta[0] = 1.0
    np.testing.assert_allclose(vsa.circular_convolve(a, delta), a, atol=1e-10 * np.abs(a).max())
    np.testing.assert_allclose(vsa.circular_convolve(a, b), vsa.circular_convolve(b, a), atol=1e-9)
    np.testing.assert_allclose(
        vsa.circular_convolve(vsa.circular_convolve(a, b), c),
        vsa.circular_convolve(a, vsa.circular_convolve(b, c)),
        atol=1e-9,
    )
    np.testing.assert_allclose(
        vsa.circular_convolve(a + b, k),
        vsa.circular_convolve(a, k) + vsa.circular_convolve(b, k),
        atol=1e-9,
    )


def test_correlate_inverts_unitary_binding():
    v = vsa.sample_unitary_basis(64, 1)
    x = np.random.default_rng(0).standard_normal(64)
    np.testing.assert_allclose(vsa.circular_correlate(vsa.circular_convolve(x, v.values), v.values), x, atol=1e-12)


@pytest.mark.parametrize("dim", [8, 9, 128])
def test_rot_endpoints(dim):
    v = vsa.sample_unitary_basis(dim, 11)
    delta = np.zeros(dim)
    delta[0] = 1.0
    np.testing.assert_allclose(vsa.rot(v, 0.0), delta, atol=1e-12)
    np.testing.assert_allclose(vsa.rot(v, 1.0), v.values, atol=1e-12)


def test_rot_zero_is_basis_independent():
    a = vsa.rot(vsa.sample_unitary_basis(32, 1), 0.0)
    b = vsa.rot(vsa.sample_unitary_basis(32, 2), 0.0)
    np.testing.assert_allclose(a, b, atol=1e-15)


def test_rot_half_binds_to_whole():
    v = vsa.sample_unitary_basis(128, 5)
    half = vsa.rot(v, 0.5)
    np.testing.assert_allclose(vsa.circular_convolve(half, half), v.values, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_rot_exponents_add_under_binding(r1, r2):
    v = vsa.sample_unitary_basis(64, 2)
    if r1 + r2 <= 1.0:
        bound = vsa.circular_convolve(vsa.rot(v, r1), vsa.rot(v, r2))
        np.testing.assert_allclose(bound, vsa.rot(v, r1 + r2), atol=1e-9)
    assert np.linalg.norm(vsa.rot(v, r1)) == pytest.approx(1.0, abs=1e-9)


def test_rot_accepts_vector_of_fractions():
    v = vsa.sample_unitary_basis(16, 0)
    stacked = vsa.rot(v, np.array([0.1, 0.6]))
    np.testing.assert_allclose(stacked[1], vsa.rot(v, 0.6), atol=1e-15)


@pytest.mark.parametrize("r", [-0.01, 1.01, np.nan])
def test_rot_domain(r):
    with pytest.raises(DomainError):
        vsa.rot(vsa.sample_unitary_basis(8, 0), r)


def test_key_similarity_self():
    v = vsa.sample_unitary_basis(256, 0)
    assert vsa.key_similarity(v, 0.37, 0.37) == pytest.approx(1.0, abs=1e-9)


def test_key_similarity_kernel_is_symmetric_and_decays():
    grid = np.linspace(0.0, 0.5, 11)
    sims = np.zeros((100, len(grid)))
    for s in range(100):
        v = vsa.sample_unitary_basis(1024, s)
        base = vsa.rot(v, 0.5)
        for i, dr in enumerate(grid):
            sims[s, i] = vsa.cosine_similarity(base, vsa.rot(v, 0.5 + dr))
    mean = sims.mean(axis=0)
    back = np.array([
        np.mean([vsa.key_similarity(vsa.sample_unitary_basis(1024, s), 0.5, 0.5 - dr) for s in range(100)])
        for dr in grid
    ])
    np.testing.assert_allclose(mean, back, atol=0.02)
    assert mean[0] == pytest.approx(1.0)
    assert np.all(np.diff(mean) < 0)


def test_key_similarity_first_zero_crossing_matches_brute_force():
    v = vsa.sample_unitary_basis(1024, 4)
    grid = np.linspace(0.0, 1.0, 201)
    fast = vsa.key_similarity_matrix_from_angles(v, grid)[0]
    keys = [vsa.rot(v, r) for r in grid]
    brute = np.array([sum(keys[0][n] * k[n] for n in range(1024)) for k in keys])
    i_fast = int(np.argmax(fast < 0))
    i_brute = int(np.argmax(brute < 0))
    assert i_fast > 0 and abs(i_fast - i_brute) <= 2


def test_similarity_matrix_properties():
    v = vsa.sample_unitary_basis(1024, 0)
    m = vsa.key_similarity_matrix_from_angles(v, np.linspace(0.25, 0.75, 8))
    np.testing.assert_allclose(np.diag(m), 1.0, atol=1e-9)
    np.testing.assert_array_equal(m, m.T)
    assert np.all(np.diff(m[0]) < 0)


def test_quasi_orthogonality():
    d = 1024
    hits = 0
    for i in range(1000):
        a = vsa.sample_unitary_basis(d, 2 * i)
        b = vsa.sample_unitary_basis(d, 2 * i + 1)
        hits += abs(vsa.cosine_similarity(a.values, b.values)) < 5 / np.sqrt(d)
    assert hits >= 990
