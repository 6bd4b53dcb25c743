import numpy as np
import pytest

from isd import (
    BlockDecomposition,
    NumericalError,
    blocks_at_threshold,
    gen_main,
    is_decorrelating,
    make_windows,
    residual_profile,
    select_blocks,
    uwedge,
    window_moments,
)
from isd.ajd import Diagonalizer, offdiag_cost
from isd.jbd import ResidualProfile
from isd.simulate import random_orthogonal

from conftest import sigma_2d


def _diag(v):
    v = np.asarray(v, float)
    return Diagonalizer(v=v, iterations=0, converged=True, final_cost=0.0)


def _rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def _components_oracle(sigma_max, tau):
    """Independent BFS connected-components oracle."""
    p = sigma_max.shape[0]
    seen = [False] * p
    comps = []
    for start in range(p):
        if seen[start]:
            continue
        stack, comp = [start], []
        seen[start] = True
        while stack:
            i = stack.pop()
            comp.append(i)
            for j in range(p):
                if j != i and not seen[j] and sigma_max[i, j] >= tau:
                    seen[j] = True
                    stack.append(j)
        comps.append(sorted(comp))
    return sorted(comps, key=lambda c: c[0])


def _principal_angles(a, b):
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    sv = np.linalg.svd(qa.T @ qb, compute_uv=False)
    return np.arccos(np.clip(sv, -1.0, 1.0))


class TestResidualProfile:
    def test_diagonal_transform(self):
        mats = [np.diag([1.0, 2.0, 0.5]), np.diag([3.0, 0.2, 1.0])]
        prof = residual_profile(_diag(np.eye(3)), mats)
        off = prof.sigma_max - np.diag(np.diag(prof.sigma_max))
        assert np.max(np.abs(off)) == 0.0

    def test_single_matrix(self):
        m = np.array([[2.0, 0.3], [0.3, 1.0]])
        prof = residual_profile(_diag(np.eye(2)), [m])
        assert np.allclose(prof.sigma_max, m)

    def test_entrywise_max(self):
        m1 = np.array([[1.0, 0.1], [0.1, 1.0]])
        m2 = np.array([[1.0, 0.4], [0.4, 1.0]])
        prof = residual_profile(_diag(np.eye(2)), [m1, m2])
        assert prof.sigma_max[0, 1] == pytest.approx(0.4)


class TestBlocksAtThreshold:
    def test_tau_above_max_gives_singletons(self):
        prof = ResidualProfile(sigma_max=np.eye(4) + 0.01)
        assert blocks_at_threshold(prof, 0.5) == [[0], [1], [2], [3]]

    def test_tau_zero_gives_single_block(self):
        prof = ResidualProfile(sigma_max=np.eye(4))
        assert blocks_at_threshold(prof, 0.0) == [[0, 1, 2, 3]]

    def test_planted_pairs(self):
        sm = np.eye(4)
        sm[0, 1] = sm[1, 0] = 0.5
        sm[2, 3] = sm[3, 2] = 0.5
        sm[0, 2] = sm[2, 0] = sm[1, 3] = sm[3, 1] = 0.01
        prof = ResidualProfile(sigma_max=sm)
        assert blocks_at_threshold(prof, 0.1) == [[0, 1], [2, 3]]

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_bfs_oracle(self, seed):
        rng = np.random.default_rng(seed)
        sm = rng.uniform(0, 1, size=(6, 6))
        sm = 0.5 * (sm + sm.T)
        prof = ResidualProfile(sigma_max=sm)
        for tau in [0.0, 0.2, 0.5, 0.8, 1.1]:
            assert blocks_at_threshold(prof, tau) == _components_oracle(sm, tau)


class TestSelectBlocks:
    def _block_family(self, seed, n_mats=8):
        """Exactly block-diagonal 3x3 family with an irreducible 2x2 block."""
        rng = np.random.default_rng(seed)
        mats = []
        for k in range(n_mats):
            r = _rotation(rng.uniform(0, np.pi))
            block = r @ np.diag(rng.uniform(0.3, 2.0, 2)) @ r.T
            m = np.zeros((3, 3))
            m[:2, :2] = block
            m[2, 2] = rng.uniform(0.3, 2.0)
            mats.append(m)
        return mats

    def test_exact_block_structure(self):
        mats = self._block_family(0)
        d = uwedge(mats)
        bd = select_blocks(d, mats)
        assert sorted(len(b) for b in bd.blocks) == [1, 2]

    @pytest.mark.parametrize("seed", range(20))
    def test_planted_structure_recovery(self, seed):
        # strong in-block entries ~1.0, cross-block noise ~1e-3
        rng = np.random.default_rng(seed)
        pattern = [(0, 1), (2, 3)]
        mats = []
        for _ in range(5):
            m = np.eye(5) * 2.0
            for i, j in pattern:
                m[i, j] = m[j, i] = 1.0
            noise = rng.normal(scale=1e-3, size=(5, 5))
            mats.append(m + 0.5 * (noise + noise.T))
        bd = select_blocks(_diag(np.eye(5)), mats)
        assert sorted(tuple(b) for b in bd.blocks) == [(0, 1), (2, 3), (4,)]

    def test_columns_grouped_contiguously(self):
        mats = self._block_family(3)
        bd = select_blocks(uwedge(mats), mats)
        offset = 0
        for block in bd.blocks:
            assert block == tuple(range(offset, offset + len(block)))
            offset += len(block)

    def test_order_invariance(self):
        mats = self._block_family(5)
        d = uwedge(mats)
        bd1 = select_blocks(d, mats)
        bd2 = select_blocks(d, mats[::-1])
        assert bd1.dims == bd2.dims
        assert bd1.tau_star == bd2.tau_star

    def test_non_pd_input_rejected(self):
        mats = [np.diag([1.0, 0.0])]
        with pytest.raises(NumericalError, match="positive definite"):
            select_blocks(_diag(np.eye(2)), mats)

    def test_partition_property_each_candidate(self):
        mats = self._block_family(7)
        prof = residual_profile(uwedge(mats), mats)
        off = prof.sigma_max[np.triu_indices(3, k=1)]
        for tau in np.concatenate([[0.0], np.unique(off), [off.max() * 2]]):
            blocks = blocks_at_threshold(prof, float(tau))
            flat = sorted(i for b in blocks for i in b)
            assert flat == [0, 1, 2]

    def test_exact_jbd_span_recovery(self):
        # known rotation, two blocks; recovered spans match to 1e-6 rad
        u = random_orthogonal(4, 17)
        rng = np.random.default_rng(18)
        mats = []
        for _ in range(6):
            r = _rotation(rng.uniform(0, np.pi))
            tilde = np.zeros((4, 4))
            tilde[:2, :2] = r @ np.diag(rng.uniform(0.3, 2.0, 2)) @ r.T
            tilde[2:, 2:] = np.diag(rng.uniform(0.3, 2.0, 2))
            mats.append(u @ tilde @ u.T)
        bd = select_blocks(uwedge(mats), mats)
        spans = {}
        for block in bd.blocks:
            cols = bd.u_hat[:, list(block)]
            if len(block) == 2:
                spans[2] = cols
        angles = _principal_angles(spans[2], u[:, :2])
        assert np.max(angles) <= 1e-6

    def test_main_generator_recovery_sample(self):
        # statistical 20-seed bar lives in the acceptance suite
        ts, gt = gen_main(6000, 0)
        plan = make_windows(ts.n, 25, w=ts.n // 8, scheme="equally_spaced")
        sigmas = [m.sigma_hat for m in window_moments(ts, plan)]
        d = uwedge([np.mean(sigmas, axis=0)] + sigmas)
        bd = select_blocks(d, sigmas)
        assert sorted(bd.dims) == [1, 2, 3, 4]

    def test_json_roundtrip(self):
        mats = self._block_family(9)
        bd = select_blocks(uwedge(mats), mats)
        back = BlockDecomposition.from_json(bd.to_json())
        assert back.blocks == bd.blocks
        assert np.allclose(back.u_hat, bd.u_hat)


class TestIsDecorrelating:
    def test_diagonal_singletons(self):
        mats = [np.diag([1.0, 2.0]), np.diag([0.3, 0.9])]
        assert is_decorrelating([(0,), (1,)], np.eye(2), mats, tol=1e-12)

    def test_two_dim_rotation_blocks(self, rot30):
        mats = [sigma_2d(0.9, 0.3), sigma_2d(0.2, 0.7), sigma_2d(0.55, 0.1)]
        assert is_decorrelating([(0,), (1,)], rot30, mats, tol=1e-10)

    def test_random_dense_split_fails(self):
        rng = np.random.default_rng(23)
        a = rng.normal(size=(4, 4))
        mats = [a @ a.T + np.eye(4)]
        assert not is_decorrelating([(0, 1), (2, 3)], np.eye(4), mats, tol=1e-6)
