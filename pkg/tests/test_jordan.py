"""Jordan block decomposition: pinned small cases and randomized residual checks."""

import numpy as np
import pytest

from cvqc_lab import config
from cvqc_lab.jordan import (
    DegenerateNumerics,
    JordanBlock1D,
    JordanDecomposition,
    eigenphases,
    jordan_decompose,
    random_projector,
    reconstruct_check,
    reflect,
)
from cvqc_lab.qsim import DimensionMismatch, NotAProjector

KET0 = np.array([[1.0, 0.0], [0.0, 0.0]])
PLUS = np.full((2, 2), 0.5)


def _eig_oracle(p0, p1):
    """Independent eigenphase computation straight from a dense eigensolve."""
    dim = p0.shape[0]
    q = (2 * p1 - np.eye(dim)) @ (2 * p0 - np.eye(dim))
    ph = np.angle(np.linalg.eigvals(q))
    ph[ph < -np.pi + 1e-9] = np.pi  # canonicalize the branch cut at -pi
    return np.sort(ph)


def test_reflect_trivial_cases():
    assert np.allclose(reflect(np.zeros((2, 2))).mat, -np.eye(2))
    assert np.allclose(reflect(np.eye(3)).mat, np.eye(3))
    assert np.allclose(reflect(KET0).mat, np.diag([1.0, -1.0]))
    with pytest.raises(NotAProjector):
        reflect(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_symmetric_two_dim_block():
    # overlap 1/2 forces a single rotation block with theta = pi/2
    dec = jordan_decompose(KET0, PLUS)
    assert len(dec.blocks2d) == 1 and not dec.blocks1d
    blk = dec.blocks2d[0]
    assert blk.theta == pytest.approx(np.pi / 2, abs=1e-12)
    assert blk.p == pytest.approx(0.5, abs=1e-12)
    ov = np.vdot(blk.alpha, blk.beta)
    assert ov.real > 0 and abs(ov.imag) <= 1e-9
    res = reconstruct_check(dec, KET0, PLUS)
    assert res.max_q <= 1e-10
    q = (2 * PLUS - np.eye(2)) @ (2 * KET0 - np.eye(2))
    assert np.allclose(q, [[0.0, -1.0], [1.0, 0.0]])


def test_identical_projectors_only_1d():
    dec = jordan_decompose(KET0, KET0)
    assert not dec.blocks2d
    types = sorted((blk.b, blk.c) for blk in dec.blocks1d)
    assert types == [(0, 0), (1, 1)]


def test_complement_projectors_only_flip_types():
    rng = np.random.default_rng(8)
    p0 = random_projector(rng, 5, 2)
    dec = jordan_decompose(p0, np.eye(5) - p0)
    assert not dec.blocks2d
    types = sorted((blk.b, blk.c) for blk in dec.blocks1d)
    assert types == [(0, 1), (0, 1), (0, 1), (1, 0), (1, 0)]


def test_zero_projector_edge():
    rng = np.random.default_rng(9)
    p1 = random_projector(rng, 4, 2)
    dec = jordan_decompose(np.zeros((4, 4)), p1)
    types = sorted((blk.b, blk.c) for blk in dec.blocks1d)
    assert types == [(0, 0), (0, 0), (0, 1), (0, 1)]


def test_random_rank2_dim6_residuals():
    rng = np.random.default_rng(2)
    p0 = random_projector(rng, 6, 2)
    p1 = random_projector(rng, 6, 2)
    dec = jordan_decompose(p0, p1)
    res = reconstruct_check(dec, p0, p1)
    assert max(res.max_p0, res.max_p1, res.max_q, res.gram) <= 1e-8


def test_block_invariants_random_sweep():
    rng = np.random.default_rng(31)
    for _ in range(40):
        dim = int(rng.integers(2, 13))
        p0 = random_projector(rng, dim, int(rng.integers(0, dim + 1)))
        p1 = random_projector(rng, dim, int(rng.integers(0, dim + 1)))
        dec = jordan_decompose(p0, p1)
        assert 2 * len(dec.blocks2d) + len(dec.blocks1d) == dim
        q = (2 * p1 - np.eye(dim)) @ (2 * p0 - np.eye(dim))
        prev = -1.0
        for blk in dec.blocks2d:
            assert 0.0 < blk.theta < np.pi
            assert blk.theta >= prev  # ascending order
            prev = blk.theta
            ov = np.vdot(blk.alpha, blk.beta)
            assert ov.real > 0 and abs(ov.imag) <= 1e-9
            assert abs(blk.p - abs(ov) ** 2) <= 1e-9
            # theta = 2 arccos sqrt(<alpha|P1|alpha>)
            overlap = np.vdot(blk.alpha, p1 @ blk.alpha).real
            assert abs(blk.theta - 2 * np.arccos(np.sqrt(np.clip(overlap, 0, 1)))) <= 1e-8
            # projectors act rank-one inside the block
            for s in (blk.alpha, blk.alpha_perp, blk.beta, blk.beta_perp):
                assert np.linalg.norm(p0 @ s - np.vdot(blk.alpha, s) * blk.alpha) <= 1e-8
                assert np.linalg.norm(p1 @ s - np.vdot(blk.beta, s) * blk.beta) <= 1e-8
            fp, fm = blk.phi_plus, blk.phi_minus
            assert np.linalg.norm(q @ fp - np.exp(1j * blk.theta) * fp) <= 1e-8
            assert np.linalg.norm(q @ fm - np.exp(-1j * blk.theta) * fm) <= 1e-8
        for blk in dec.blocks1d:
            assert np.linalg.norm(p0 @ blk.vector - blk.b * blk.vector) <= 1e-8
            assert np.linalg.norm(p1 @ blk.vector - blk.c * blk.vector) <= 1e-8
        basis = dec.basis()
        assert np.max(np.abs(basis.conj().T @ basis - np.eye(dim))) <= 1e-8


def test_eigenphase_cross_check():
    rng = np.random.default_rng(77)
    for _ in range(25):
        dim = int(rng.integers(2, 13))
        p0 = random_projector(rng, dim, int(rng.integers(1, dim)))
        p1 = random_projector(rng, dim, int(rng.integers(1, dim)))
        dec = jordan_decompose(p0, p1)
        got = eigenphases(dec)
        want = _eig_oracle(p0, p1)
        assert np.max(np.abs(got - want)) <= config.EIGPHASE_TOL


def test_degenerate_theta_direct_sum():
    # two copies of the same 2x2 pair share one rotation angle
    t = 0.7
    u = np.array([np.cos(t), np.sin(t)])
    small1 = np.outer(u, u)
    p0 = np.kron(np.eye(2), KET0)
    p1 = np.kron(np.eye(2), small1)
    dec = jordan_decompose(p0, p1)
    assert len(dec.blocks2d) == 2 and not dec.blocks1d
    assert dec.blocks2d[0].theta == pytest.approx(dec.blocks2d[1].theta, abs=1e-10)
    assert dec.blocks2d[0].theta == pytest.approx(2 * t, abs=1e-10)
    res = reconstruct_check(dec, p0, p1)
    assert max(res.max_p0, res.max_p1, res.max_q, res.gram) <= 1e-8


def test_reconstruct_negative_control():
    rng = np.random.default_rng(4)
    p0 = random_projector(rng, 6, 3)
    p1 = random_projector(rng, 6, 2)
    dec = jordan_decompose(p0, p1)
    blk = dec.blocks2d[0]
    bad = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    bad /= np.linalg.norm(bad)
    corrupted = JordanDecomposition(
        (type(blk)(blk.theta, blk.p, bad, blk.alpha_perp, blk.beta, blk.beta_perp),)
        + dec.blocks2d[1:],
        dec.blocks1d,
        dec.dim,
    )
    res = reconstruct_check(corrupted, p0, p1)
    assert max(res.max_p0, res.max_p1, res.max_q, res.gram) > 1e-3


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        jordan_decompose(KET0, np.eye(4))


def test_json_dump_shape():
    dec = jordan_decompose(KET0, PLUS)
    d = dec.to_json_dict()
    assert d["dim"] == 2
    assert len(d["blocks2d"]) == 1 and d["blocks1d"] == []
    assert len(d["blocks2d"][0]["alpha"]) == 2
