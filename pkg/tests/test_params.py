import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from polybump.params import (Config, ConfigError, PotentialSpec, RunConfig, SystemParams, config_from_dict,
                             config_to_dict, dump_config, load_config, save_config, sphere_area, validate)

finite = st.floats(min_value=-5, max_value=5, allow_nan=False)
positive = st.floats(min_value=0.1, max_value=5)

V1 = PotentialSpec()


@given(mu1=positive, mu2=positive, beta=finite, k=st.sampled_from([2, 4, 6]), eps=positive,
       h=st.floats(min_value=0.01, max_value=0.5), n=st.integers(2, 128))
def test_config_roundtrip(tmp_path_factory, mu1, mu2, beta, k, eps, h, n):
    cfg = Config(SystemParams(mu1=mu1, mu2=mu2, beta=beta, k=k, epsilon=eps),
                 PotentialSpec("gaussian-bump", (2.0, -0.5, 1.5), floor=1.0), V1,
                 RunConfig(h=h, n_theta=n))
    path = tmp_path_factory.mktemp("cfg") / "c.toml"
    save_config(cfg, path)
    assert load_config(path) == cfg
    assert config_from_dict(config_to_dict(cfg)) == cfg


def test_dump_is_stable():
    assert dump_config(Config()) == dump_config(Config())


@pytest.mark.parametrize("data", [
    {"system": {"gamma": 1.0}},
    {"bogus": {}},
    {"potential": {"X": {}}},
    {"run": {"h": -1.0}},
    {"run": {"epsilon_sweep": [0.1, 0.2]}},
    {"potential": {"V": {"kind": "cubic"}}},
    {"potential": {"V": {"kind": "gaussian-bump", "parameters": [1.0, 2.0]}}},
    {"potential": {"V": {"kind": "tabulated-radial", "parameters": [1.0, 1.0, 2.0, 1.0, 3.0, 1.0]}}},
])
def test_bad_config_rejected(data):
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.toml")


@pytest.mark.parametrize("changes", [
    {"k": 3}, {"k": 0}, {"m": 0}, {"m": 1, "alpha": 0.5}, {"m": 2, "alpha": 0.0}, {"mu1": 0.0},
    {"dim": 4}, {"epsilon": 0.0},
])
def test_validate_structural(changes):
    with pytest.raises(ConfigError):
        validate(SystemParams().with_(**changes), V1, V1)


def test_validate_overrides_and_construction():
    rep = validate(SystemParams(m=2, alpha=0.0, allow_alpha_zero=True), V1, V1)
    assert rep.passed
    assert rep["Y.nondegenerate"].passed is None
    assert not validate(SystemParams(beta=0.5), V1, V1)["beta.negative"].passed
    with pytest.raises(ConfigError):
        validate(SystemParams(beta=0.5), V1, V1, construction=True)
    low = PotentialSpec("gaussian-bump", (1.0, -0.5, 1.0), floor=1.0)
    assert not validate(SystemParams(), low, V1).passed


def _fd_second(spec, h=1e-3):
    r = np.array([0.0, h, 2 * h])
    v = spec(r)
    # even function: f''(0) from the five-point stencil with f(-x) = f(x)
    return (-2 * v[2] + 32 * v[1] - 30 * v[0]) / (12 * h * h)


@given(base=positive, amp=finite, width=positive)
def test_gaussian_curvature(base, amp, width):
    s = PotentialSpec("gaussian-bump", (base, amp, width), floor=1e-3)
    assert s.second_derivative_at_zero() == pytest.approx(_fd_second(s), rel=1e-5, abs=1e-6)


@given(c=st.lists(finite, min_size=1, max_size=4))
def test_polynomial_curvature(c):
    s = PotentialSpec("polynomial-radial", tuple(c), floor=1e-3)
    assert s.second_derivative_at_zero() == pytest.approx(_fd_second(s), rel=1e-5, abs=1e-5)
    assert s.laplacian_at_zero(3) == pytest.approx(3 * s.second_derivative_at_zero())


def test_tabulated():
    s = PotentialSpec("tabulated-radial", (0.0, 2.0, 1.0, 1.5, 2.0, 1.0, 3.0, 1.0))
    np.testing.assert_allclose(s(np.array([0.0, 1.0, 2.0, 3.0, 10.0])), [2.0, 1.5, 1.0, 1.0, 1.0], atol=1e-14)
    assert s.second_derivative_at_zero() == pytest.approx(_fd_second(s), rel=1e-4)


def test_constant():
    s = PotentialSpec("constant", (2.5,), floor=2.0)
    assert s.is_constant and s.second_derivative_at_zero() == 0.0
    np.testing.assert_array_equal(s(np.linspace(0, 3, 4)), 2.5)


def test_sphere_area():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)
