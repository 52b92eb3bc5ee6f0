import numpy as np
import pytest
from hypothesis import given, strategies as st

from viscobeam.beam import (
    CLAMPED, SIMPLY_SUPPORTED, BeamConfig, Load, boundary_constraints, scaled_load,
)
from viscobeam.fe import C0, FeSpace
from viscobeam.mesh import uniform_partition


@given(st.floats(1e-4, 0.5), st.floats(0.5, 20.0))
def test_eps_identity(d, L):
    c = BeamConfig(d=d, L=L)
    assert c.eps2 == pytest.approx(d**2 / (12 * L**2), rel=1e-14)
    assert c.eps2 == pytest.approx(c.I / (c.A * L**2), rel=1e-12)
    assert c.lam > 0 and c.I_hat > 0 and c.A_hat > 0


def test_rescaled_coefficients_independent_of_d():
    a, b = BeamConfig(d=0.1), BeamConfig(d=1e-3)
    assert a.I_hat == pytest.approx(b.I_hat, rel=1e-12)
    assert a.A_hat == pytest.approx(b.A_hat, rel=1e-12)


def test_lambda_sweep():
    lams = [BeamConfig(d=d).lam for d in (1e-1, 1e-2, 1e-3)]
    assert lams[0] > lams[1] > lams[2]
    for d, lam in zip((1e-1, 1e-2, 1e-3), lams):
        assert lam == pytest.approx(2 * 1.35 * d**2 / 192, rel=1e-13)


def test_physical_load():
    cfg = BeamConfig(d=0.1, L=4.0, load=Load(amplitude=8.0, convention="physical"))
    eps3 = (0.1 / (4 * np.sqrt(12))) ** 3
    assert scaled_load(cfg, 1.0, 0.5) == pytest.approx(8 / (eps3 * 9.8e7), rel=1e-13)
    assert scaled_load(cfg, 1.0, -0.5) == 0.0


def test_scaled_load_independent_of_d():
    assert scaled_load(BeamConfig(d=0.1), 2.0, 1.0) == scaled_load(BeamConfig(d=1e-3), 2.0, 1.0) == 8 / 9.8e7


def test_ramp_load():
    cfg = BeamConfig(load=Load(type="ramp", ramp_time=2.0))
    assert scaled_load(cfg, 1.0, 1.0) == pytest.approx(0.5 * 8 / 9.8e7)


@pytest.mark.parametrize("bc, r, nw, nth", [(CLAMPED, 1, 2, 2), (SIMPLY_SUPPORTED, 2, 2, 0)])
def test_constraints(bc, r, nw, nth):
    cfg = BeamConfig(bc=bc)
    V = FeSpace(uniform_partition(4.0, 20), r, C0)
    bw, bth = boundary_constraints(cfg, V, V)
    assert (len(bw), len(bth)) == (nw, nth)


def test_dof_bookkeeping():
    cfg = BeamConfig()
    V = FeSpace(uniform_partition(4.0, 20), 1, C0)
    bw, bth = boundary_constraints(cfg, V, V)
    assert 2 * V.n_dofs == 42
    assert (V.n_dofs - len(bw)) + (V.n_dofs - len(bth)) == 38


@pytest.mark.parametrize("kw", [dict(d=0.0), dict(bc="free"), dict(T=1.0, dt=0.3), dict(dt=-1.0)])
def test_invalid_config(kw):
    with pytest.raises(ValueError):
        BeamConfig(**kw)


def test_config_roundtrip():
    cfg = BeamConfig(d=0.01, bc="ss", load=Load(type="ramp", ramp_time=3.0), T=2.0, dt=0.01)
    assert BeamConfig.from_dict(cfg.to_dict()) == cfg
