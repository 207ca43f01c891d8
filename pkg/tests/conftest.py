from __future__ import annotations

import numpy as np
import pytest

from fhnlab import bloch, waves
from fhnlab.config import load_config


@pytest.fixture(scope="session")
def config(tmp_path_factory):
    return load_config(output_dir=tmp_path_factory.mktemp("cfg-out"))


@pytest.fixture(scope="session")
def wave(config):
    c = config.section("wave")
    g = config.section("grid")
    return waves.find_wave(config.params, g["period"], g["n"], t_end=c["seed_time"], dt=c["seed_dt"],
                           seed=c["seed"], tol=c["tol"])


@pytest.fixture(scope="session")
def translational(wave):
    return bloch.translational_pair(wave, 64)


@pytest.fixture(scope="session")
def family(wave, translational):
    adj = translational[2].on_grid(wave.n)
    return waves.continue_family(wave, r0=0.05, n_k=5, adjoint=adj)


@pytest.fixture(scope="session")
def curve(wave):
    return bloch.critical_curve(wave, None, 41, 64)


@pytest.fixture(scope="session")
def coeffs(curve, family):
    return bloch.dispersion_coefficients(curve, family)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
