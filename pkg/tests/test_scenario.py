import math

import numpy as np
import pytest

from feedback_market.errors import ScenarioError
from feedback_market.scenario import make_profile, parse_scenario_string

BASE = """\
[model]
r = 3
rate = constant
rate_matrix = -0.5 0.25 0.25 ; 0.25 -0.5 0.25 ; 0.25 0.25 -0.5
mechanism = lux3

[population]
n_values = 10 100
initial_law = deterministic
initial_point = 0.6 0.2 0.2
q0 = 1.0

[run]
T = 1.0
h = 0.01
seed = 3
replicas = 2

[lux3]
alpha = 1.0 1.0 1.0
beta = -1.0 -0.5 -0.5
delta = 0.5 0.5 0.5
logF = 0.0
"""


def test_profiles():
    assert make_profile("2.5")(3.0) == 2.5
    assert make_profile("const:2.5")(9.0) == 2.5
    lin = make_profile("linear:1,0.5")
    assert lin(2.0) == 2.0
    sin = make_profile("sin:1,0.2,2")
    assert sin(0.25) == pytest.approx(1 + 0.2 * math.sin(0.5), abs=1e-15)
    with pytest.raises(ScenarioError):
        make_profile("exp:1,2")
    with pytest.raises(ScenarioError):
        make_profile("abc")


def test_base_scenario_parses():
    s = parse_scenario_string(BASE)
    assert s.r == 3 and s.n_values == (10, 100)
    assert s.mech_kind == "lux3"
    assert s.rate.kernel_spec is not None
    assert np.allclose(s.initial.point, [0.6, 0.2, 0.2])


def test_time_profiles_in_lux3():
    text = BASE.replace("alpha = 1.0 1.0 1.0", "alpha = sin:1.0,0.2,2.0 const:1.0 1.0")
    s = parse_scenario_string(text)
    assert s.lux_params.alpha[0](0.0) == pytest.approx(1.0)
    assert s.lux_params.alpha[0](math.pi / 4) == pytest.approx(1.2, abs=1e-12)


def test_affine_scenario():
    text = BASE.replace("mechanism = lux3", "mechanism = affine\nphi = -1.0\npsi = linear:0,0.5")
    text = text[: text.index("[lux3]")]
    s = parse_scenario_string(text)
    assert s.mech_kind == "affine"
    assert s.affine_psi(2.0) == 1.0


def test_logistic_rate_spec():
    text = BASE.replace(
        "rate = constant\nrate_matrix = -0.5 0.25 0.25 ; 0.25 -0.5 0.25 ; 0.25 0.25 -0.5",
        "rate = logistic\n"
        "rate_matrix0 = -0.5 0.25 0.25 ; 0.25 -0.5 0.25 ; 0.25 0.25 -0.5\n"
        "rate_matrix1 = -0.2 0.1 0.1 ; 0.1 -0.2 0.1 ; 0.1 0.1 -0.2\n"
        "rate_qmid = 0.5\n"
        "rate_qscale = 2.0")
    s = parse_scenario_string(text)
    a_mid = s.rate.eval(0.0, np.array([1 / 3, 1 / 3, 1 / 3]), 0.5).entries
    assert a_mid[0, 1] == pytest.approx(0.175, abs=1e-12)  # halfway blend


def test_positive_beta_rejected():
    with pytest.raises((ScenarioError, ValueError)):
        parse_scenario_string(BASE.replace("beta = -1.0 -0.5 -0.5", "beta = 0.5 -0.5 -0.5"))


def test_vanishing_denominator_rejected():
    from feedback_market.errors import DegenerateDenominator
    with pytest.raises(DegenerateDenominator):
        parse_scenario_string(BASE.replace("beta = -1.0 -0.5 -0.5", "beta = -1.0 -1.0 -1.0"))


def test_non_increasing_n_rejected():
    with pytest.raises(ScenarioError):
        parse_scenario_string(BASE.replace("n_values = 10 100", "n_values = 100 10"))


def test_wrong_matrix_shape():
    with pytest.raises(ScenarioError):
        parse_scenario_string(BASE.replace(
            "rate_matrix = -0.5 0.25 0.25 ; 0.25 -0.5 0.25 ; 0.25 0.25 -0.5",
            "rate_matrix = -0.5 0.5 ; 0.5 -0.5"))


def test_type_mismatch():
    with pytest.raises(ScenarioError):
        parse_scenario_string(BASE.replace("replicas = 2", "replicas = two"))
