import numpy as np
import pytest

from isd import NumericalError, offdiag_cost, uwedge
from isd.simulate import random_orthogonal

from conftest import sigma_2d


def _rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def _match_rows_to_columns(v, u, tol_rad):
    """Check rows of v align with columns of u up to signed permutation;
    return the worst angle error."""
    rows = v / np.linalg.norm(v, axis=1, keepdims=True)
    dots = np.abs(rows @ u)
    matched = set()
    worst = 0.0
    for i in range(u.shape[1]):
        j = int(np.argmax(dots[i]))
        assert j not in matched, "two rows matched the same basis column"
        matched.add(j)
        worst = max(worst, float(np.arccos(min(1.0, dots[i, j]))))
    assert worst <= tol_rad, f"angle error {worst} exceeds {tol_rad}"
    return worst


class TestUwedge:
    def test_identity_family(self):
        d = uwedge([np.eye(3)])
        assert d.final_cost == 0.0
        assert np.allclose(np.abs(d.v), np.eye(3), atol=1e-12)

    def test_exact_recovery_random_family(self):
        rng = np.random.default_rng(42)
        for trial in range(3):
            p = int(rng.integers(3, 9))
            u = random_orthogonal(p, 100 + trial)
            mats = [u @ np.diag(rng.uniform(0.2, 3.0, p)) @ u.T for _ in range(5)]
            d = uwedge(mats)
            assert d.final_cost <= 1e-9
            _match_rows_to_columns(np.asarray(d.v), u, 1e-5)

    def test_two_dim_rotation_recovery(self, rot30):
        # two population covariances sharing the 30-degree rotation basis
        mats = [sigma_2d(0.9, 0.3), sigma_2d(0.2, 0.7)]
        d = uwedge(mats)
        assert d.final_cost <= 1e-12
        _match_rows_to_columns(np.asarray(d.v), rot30, 1e-8)

    def test_normalization_against_first_matrix(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=(4, 4))
        m1 = a @ a.T + 4 * np.eye(4)
        mats = [m1] + [np.diag(rng.uniform(0.5, 2.0, 4)) for _ in range(3)]
        d = uwedge(mats)
        v = np.asarray(d.v)
        assert np.allclose(np.diag(v @ m1 @ v.T), 1.0, atol=1e-8)

    def test_deterministic(self):
        rng = np.random.default_rng(8)
        base = rng.normal(size=(3, 3))
        mats = [base @ base.T + 3 * np.eye(3), np.diag([1.0, 2.0, 3.0])]
        d1 = uwedge(mats)
        d2 = uwedge(mats)
        assert np.array_equal(np.asarray(d1.v), np.asarray(d2.v))
        assert d1.iterations == d2.iterations

    def test_commuting_family_diagonalized(self):
        u = random_orthogonal(5, 9)
        rng = np.random.default_rng(10)
        mats = [u @ np.diag(rng.uniform(0.1, 4.0, 5)) @ u.T for _ in range(6)]
        d = uwedge(mats)
        t = np.einsum("ij,kjl,ml->kim", d.v, np.asarray(mats), d.v)
        off = t - np.einsum("kii,ij->kij", np.einsum("kii->ki", t), np.eye(5))
        assert np.max(np.abs(off)) <= 1e-8

    def test_nonsymmetric_rejected(self):
        with pytest.raises(NumericalError, match="symmetric"):
            uwedge([np.array([[1.0, 0.5], [0.0, 1.0]])])

    def test_first_matrix_must_be_spd(self):
        with pytest.raises(NumericalError, match="positive definite"):
            uwedge([np.diag([1.0, -1.0]), np.eye(2)])

    def test_nonconvergence_is_flagged_not_raised(self):
        rng = np.random.default_rng(3)
        mats = []
        for _ in range(6):
            a = rng.normal(size=(4, 4))
            mats.append(a @ a.T + 0.5 * np.eye(4))
        d = uwedge(mats, max_iter=1)
        assert not d.converged


class TestOffdiagCost:
    def test_diagonal_is_zero(self):
        mats = [np.diag([1.0, 2.0]), np.diag([3.0, 0.5])]
        assert offdiag_cost(np.eye(2), mats) == 0.0

    def test_unit_offdiagonals(self):
        assert offdiag_cost(np.eye(2), [np.ones((2, 2))]) == pytest.approx(2.0)

    def test_rotation_grid_oracle(self):
        # family diagonalized by a rotation: brute-force search over the
        # rotation angle must reproduce the iterative minimum
        r = _rotation(0.61)
        mats = [r @ np.diag([2.0, 0.5]) @ r.T, r @ np.diag([0.3, 1.4]) @ r.T]
        grid = np.linspace(0.0, np.pi, 20001)
        best = min(offdiag_cost(_rotation(th).T, mats) for th in grid)
        d = uwedge(mats)
        assert abs(best - d.final_cost) <= 1e-4

    def test_signed_permutation_invariance(self):
        rng = np.random.default_rng(12)
        v = rng.normal(size=(4, 4))
        mats = [np.diag([1.0, 2, 3, 4]), rng.normal(size=(4, 4))]
        mats[1] = mats[1] + mats[1].T + 8 * np.eye(4)
        base = offdiag_cost(v, mats)
        perm = np.eye(4)[[2, 0, 3, 1]] * np.array([[1], [-1], [1], [-1]])
        assert offdiag_cost(perm @ v, mats) == pytest.approx(base, rel=1e-12)
