import pytest

import oracles


def test_keller_osserman_constants():
    assert oracles.keller_osserman_power(0.7) == pytest.approx(oracles.KO_07, rel=1e-14)
    assert oracles.keller_osserman_power(0.5) == pytest.approx(oracles.KO_05, rel=1e-14)


@pytest.mark.parametrize("gamma", [0.3, 0.5, 0.7])
def test_transform_constant(gamma):
    assert oracles.transform_constant(gamma) == pytest.approx(oracles.TRANSFORM_C[gamma], rel=1e-14)


def test_local_model_residual_vanishes():
    res, K = oracles.local_model_residual(1, 1)
    assert res == 0 and K == 2.0
    res, K = oracles.local_model_residual(0.5, 1)
    assert res == 0 and K == pytest.approx(oracles.K_05_1, rel=1e-14)


def test_disc_eigenvalue():
    assert oracles.disc_lambda1() == pytest.approx(oracles.DISC_LAMBDA1, rel=1e-13)
