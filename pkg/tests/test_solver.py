import numpy as np
import pytest
import scipy.linalg

from trltsk.solver import (
    SolverError,
    generalized_eig_smallest,
    generalized_eig_smallest_reference,
    objective_value,
)


def spd(rng, n, shift=0.1):
    x = rng.normal(size=(n, n))
    return x @ x.T + shift * np.eye(n)


def test_diagonal_a():
    sol = generalized_eig_smallest(np.diag([1.0, 2.0]), 1, eps=0.0, b=np.eye(2))
    assert np.allclose(sol.phi, [1.0])
    assert np.allclose(sol.p[:, 0], [1.0, 0.0])


def test_diagonal_b():
    sol = generalized_eig_smallest(np.eye(2), 2, eps=0.0, b=np.diag([1.0, 2.0]))
    assert np.allclose(sol.phi, [0.5, 1.0])
    assert np.allclose(np.abs(sol.p), [[0, 1], [1 / np.sqrt(2), 0]])


def test_residual_and_agreement(rng):
    a, b = spd(rng, 12), spd(rng, 12)
    sol = generalized_eig_smallest(a, 3, b=b)
    ref = generalized_eig_smallest_reference(a, 3, b=b)
    b_reg = b + sol.eps * np.eye(12)
    for i in range(3):
        res = np.linalg.norm(a @ sol.p[:, i] - sol.phi[i] * b_reg @ sol.p[:, i])
        assert res <= 1e-8 * (np.linalg.norm(a) + abs(sol.phi[i]) * np.linalg.norm(b_reg))
    assert np.allclose(sol.phi, ref.phi, rtol=1e-10)
    assert np.allclose(sol.p, ref.p, atol=1e-8)
    assert np.allclose(sol.phi, scipy.linalg.eigh(a, b_reg, eigvals_only=True)[:3], rtol=1e-10)


def test_singular_b_is_handled(rng):
    a = spd(rng, 6)
    v = rng.normal(size=(6, 2))
    b = v @ v.T  # rank 2
    sol = generalized_eig_smallest(a, 4, b=b)
    assert np.all(np.isfinite(sol.phi)) and np.all(np.diff(sol.phi) >= 0)
    assert sol.n_degenerate == 2


def test_indefinite_a_raises():
    with pytest.raises(SolverError, match="minimum eigenvalue"):
        generalized_eig_smallest(np.diag([1.0, -1.0]), 1, b=np.eye(2))


def test_bad_m(rng):
    with pytest.raises(ValueError):
        generalized_eig_smallest(np.eye(3), 4, b=np.eye(3))


def test_sign_convention(rng):
    sol = generalized_eig_smallest(spd(rng, 5), 5, b=spd(rng, 5))
    idx = np.argmax(np.abs(sol.p), axis=0)
    assert np.all(sol.p[idx, np.arange(5)] > 0)


def test_objective_value_properties(rng):
    a, b = spd(rng, 8), spd(rng, 8)
    sol = generalized_eig_smallest(a, 1, b=b)
    assert objective_value(a, sol.p, b=b) == pytest.approx(sol.phi[0], rel=1e-10)
    p = rng.normal(size=(8, 2))
    v = objective_value(a, p, b=b)
    assert objective_value(a, -3.7 * p, b=b) == pytest.approx(v, rel=1e-10)
    probes = rng.normal(size=(1000, 8))
    probes /= np.linalg.norm(probes, axis=1, keepdims=True)
    assert min(objective_value(a, v, b=b) for v in probes) >= sol.phi[0] - 1e-12
    with pytest.raises(ZeroDivisionError):
        objective_value(a, np.zeros(8), eps=0.0, b=b)


def test_deterministic_output(rng):
    a, b = spd(rng, 9), spd(rng, 9)
    s1 = generalized_eig_smallest(a, 4, b=b)
    s2 = generalized_eig_smallest(a.copy(), 4, b=b.copy())
    assert np.array_equal(s1.p, s2.p) and np.array_equal(s1.phi, s2.phi)
