import numpy as np
import pytest
import scipy.sparse as sp

from viscobeam.assembly import (
    assemble, build_mixed, build_primal, dump_matrix_market, inf_sup_constant, make_spaces,
)
from viscobeam.beam import BeamConfig
from viscobeam.fe import C0, DISCONTINUOUS, FeSpace, gauss_rule
from viscobeam.material import sls_material
from viscobeam.mesh import uniform_partition
from viscobeam.norms import elastic_midspan_deflection
from viscobeam.stepper import solve_primal


def _free_element(cfg):
    m = uniform_partition(cfg.L, 1)
    return FeSpace(m, 1, C0), FeSpace(m, 1, C0), FeSpace(m, 0, DISCONTINUOUS)


def test_single_element_blocks():
    cfg = BeamConfig(L=1.0)
    ops = assemble(cfg, *_free_element(cfg))
    A = ops.A.toarray()
    np.testing.assert_allclose(A[2:, 2:] / cfg.I_hat, [[1, -1], [-1, 1]], atol=1e-14)
    np.testing.assert_allclose(A[:2], 0.0)
    # (psi, eta) - (psi, v') for psi = 1; ordering w1, w2, theta1, theta2
    np.testing.assert_allclose(ops.B.toarray(), [[1.0, -1.0, 0.5, 0.5]], atol=1e-14)
    assert ops.C.toarray()[0, 0] == pytest.approx(cfg.lam / cfg.A_hat)


def test_guards():
    cfg = BeamConfig()
    Vw, Vth, Q = make_spaces(cfg, uniform_partition(4.0, 4), 2)
    with pytest.raises(ValueError):
        assemble(cfg, Vw, Vth, Q, quad=gauss_rule(1))
    with pytest.raises(ValueError):
        assemble(cfg, Vw, Vth, Vw)
    with pytest.raises(ValueError):
        build_primal(cfg, 4, 1, "sloppy")


@pytest.mark.parametrize("r", [1, 2])
@pytest.mark.parametrize("bc", ["clamped", "simply_supported"])
def test_block_properties(r, bc):
    ops = build_mixed(BeamConfig(bc=bc, d=1e-3), 6, r)
    A, C = ops.A.toarray(), ops.C.toarray()
    np.testing.assert_allclose(A, A.T, atol=1e-14 * np.abs(A).max())
    assert np.linalg.eigvalsh(A).min() > -1e-12 * np.abs(A).max()
    assert np.linalg.eigvalsh(C).min() > 0
    B = ops.B.toarray()
    assert np.linalg.matrix_rank(B) == B.shape[0]
    S = ops.saddle().toarray()
    assert np.linalg.matrix_rank(S) == S.shape[0]


def test_bending_block_definite_when_clamped():
    ops = build_mixed(BeamConfig(), 5, 1)
    n_w = ops.layout.n_w
    Ath = ops.A.toarray()[n_w:, n_w:]
    assert np.linalg.eigvalsh(Ath).min() > 0


def test_kernel_ellipticity_simply_supported():
    ops = build_mixed(BeamConfig(bc="simply_supported"), 8, 1)
    from viscobeam.linalg import null_space

    Z = null_space(ops.B.toarray())
    assert np.linalg.eigvalsh(Z.T @ ops.A.toarray() @ Z).min() > 0


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("bc", ["clamped", "simply_supported"])
def test_reduced_integration_is_schur_complement(n, bc):
    cfg = BeamConfig(bc=bc, d=0.05)
    mixed = build_mixed(cfg, n, 1)
    primal = build_primal(cfg, n, 1, "reduced")
    A, B, C = (M.toarray() for M in (mixed.A, mixed.B, mixed.C))
    schur = A + B.T @ np.linalg.solve(C, B)
    K = primal.K.toarray()
    assert np.abs(K - schur).max() <= 1e-12 * np.abs(schur).max()


def test_doubling_I_hat_doubles_bending():
    a = build_mixed(BeamConfig(b=0.08), 4, 1).A.toarray()
    b = build_mixed(BeamConfig(b=0.16), 4, 1).A.toarray()
    np.testing.assert_allclose(b, 2 * a, rtol=1e-14)


def test_exact_integration_locks():
    cfg = BeamConfig(d=1e-3, material=sls_material().as_elastic(), T=0.01, dt=0.01)
    h = solve_primal(build_primal(cfg, 10, 1, "exact"))
    ratio = h.midspan_deflection()[0] / elastic_midspan_deflection(cfg)
    assert ratio < 0.01


def test_inf_sup_trivial():
    assert inf_sup_constant(np.eye(3), np.eye(3), np.eye(3)) == pytest.approx(1.0)
    assert inf_sup_constant(np.diag([2.0, 1.0, 0.0]), np.eye(3), np.eye(3)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        inf_sup_constant(np.zeros((2, 2)), np.eye(2), np.eye(2))


def test_inf_sup_plateau():
    betas = []
    for n in (4, 8, 16, 32):
        ops = build_mixed(BeamConfig(), n, 1)
        betas.append(inf_sup_constant(ops.B, ops.norm_V, ops.norm_Q))
    assert min(betas) > 0.1
    assert betas[-1] / betas[-2] > 0.95


def test_matrix_market(tmp_path):
    from scipy.io import mmread

    ops = build_mixed(BeamConfig(), 4, 1)
    paths = dump_matrix_market(ops, tmp_path)
    assert len(paths) == 3
    np.testing.assert_allclose(mmread(paths[1]).toarray(), ops.B.toarray())
    assert len(dump_matrix_market(build_primal(BeamConfig(), 4, 1), tmp_path / "p")) == 1
