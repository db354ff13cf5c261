import itertools

import numpy as np
import pytest
import scipy.special

import pencilab.errors
import pencilab.fields
import pencilab.special

UnivariateFunction = pencilab.fields.UnivariateFunction
ReductionType = pencilab.special.ReductionType

SAMPLES = list(itertools.product(np.linspace(1.0, 2.0, 5), np.linspace(1.0, 2.0, 5)))
OFF_AXIS = [(t, r) for t, r in itertools.product(np.linspace(-1.0, 1.0, 5), (0.25, 0.7, 1.3))]


def squares():
    return UnivariateFunction(lambda x: x * x, lambda x: 2 * x, lambda x: 2 + 0j, name="t^2")


def parabola():
    return UnivariateFunction(lambda x: (x - 1.5) ** 2, name="parabola")


@pytest.mark.parametrize(
    ("f_i", "f_j", "expected"),
    [
        pytest.param(
            UnivariateFunction.identity(), UnivariateFunction.identity(), ReductionType.F1, id="both_monotone"
        ),
        pytest.param(
            UnivariateFunction.constant(3), UnivariateFunction.identity(), ReductionType.F2, id="constant_first"
        ),
        pytest.param(
            UnivariateFunction.linear(-2, 1), UnivariateFunction.constant(3), ReductionType.F2, id="constant_second"
        ),
        pytest.param(
            UnivariateFunction.constant(3), UnivariateFunction.constant(1), ReductionType.F3, id="distinct_constants"
        ),
    ],
)
def test_classify_pair(f_i, f_j, expected):
    assert pencilab.special.classify_pair(f_i, f_j) is expected


def test_classify_pair_rejects():
    with pytest.raises(pencilab.errors.SingularPairError):
        pencilab.special.classify_pair(UnivariateFunction.constant(3), UnivariateFunction.constant(3))
    with pytest.raises(pencilab.errors.InvalidConstantsError, match="monotone"):
        pencilab.special.classify_pair(parabola(), UnivariateFunction.identity())


def test_general_solution_f2():
    F = pencilab.special.general_solution_f2(UnivariateFunction.identity(), squares())
    np.testing.assert_allclose(F(2.0, 4.0), 1.0 + 16.0)
    report = pencilab.special.residual_f2(F, SAMPLES)
    assert report.passed, report.as_json()


def test_residual_f2_detects_wrong_exponent():
    wrong = pencilab.special.Bivariate(func=lambda a, b: a / b, name="a/b")
    report = pencilab.special.residual_f2(wrong, SAMPLES, tolerance=1e-6)
    assert not report.passed
    assert report.failures() == ["f2"]


def test_general_solution_f3():
    F = pencilab.special.general_solution_f3(squares(), UnivariateFunction.linear(2, 1))
    assert pencilab.special.residual_f3(F, SAMPLES).passed
    fd = pencilab.special.Bivariate(func=F.func)
    assert pencilab.special.residual_f3(fd, SAMPLES, tolerance=1e-6).passed


def test_mean_value_quadratic():
    for t, r in OFF_AXIS:
        value = pencilab.special.darboux_mean_value(squares(), t, r)
        np.testing.assert_allclose(value, t * t + r * r / 2, atol=1e-12)
        solution = pencilab.special.mean_value_solution(squares())
        np.testing.assert_allclose(solution(t, r), t * t + r * r / 2, atol=1e-12)


def test_mean_value_quadrature_error():
    kink = UnivariateFunction(lambda x: abs(x.real), name="abs")
    with pytest.raises(pencilab.errors.QuadratureError):
        pencilab.special.darboux_mean_value(kink, 0.0, 1.0, nodes=16)


@pytest.mark.parametrize(
    ("psi",),
    [
        pytest.param(squares(), id="quadratic"),
        pytest.param(UnivariateFunction(np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x), name="cos"), id="cos"),
        pytest.param(UnivariateFunction(np.exp, np.exp, np.exp, name="exp"), id="exp"),
    ],
)
def test_mean_value_family(psi):
    solution = pencilab.special.mean_value_solution(psi)
    assert pencilab.special.residual_darboux(solution.field, OFF_AXIS, tolerance=1e-9).passed
    report = pencilab.special.darboux_initial_conditions(solution, psi, np.linspace(-1, 1, 7))
    assert report.passed, report.as_json()
    assert solution.as_json() == {"family": "mean-value", "parameters": {"psi": psi.name, "nodes": 64}}


def test_change_of_variables():
    G = pencilab.special.mean_value_solution(squares()).field
    F = pencilab.special.change_variables_f4_to_f1(G)
    assert pencilab.special.residual_f1(F, SAMPLES, tolerance=1e-9).passed
    back = pencilab.special.change_variables_f1_to_f4(F)
    for t, r in OFF_AXIS:
        np.testing.assert_allclose(back(t, r), G(t, r), atol=1e-12)
        np.testing.assert_allclose(back.p12(t, r), G.p12(t, r), atol=1e-10)


def test_residual_f1_regular_on_diagonal():
    F = pencilab.special.change_variables_f4_to_f1(pencilab.special.mean_value_solution(squares()).field)
    report = pencilab.special.residual_f1(F, [(1.5, 1.5), (2.0, 2.0)], tolerance=1e-9)
    assert report.passed


@pytest.mark.parametrize(
    ("a", "branch", "bessel"),
    [
        pytest.param(-4.0, "regular", lambda r: scipy.special.j0(2 * r), id="regular"),
        pytest.param(-0.25, "regular", lambda r: scipy.special.j0(0.5 * r), id="regular_slow"),
        pytest.param(1.0, "modified", scipy.special.i0, id="modified"),
    ],
)
def test_separated_profile(a, branch, bessel):
    solution = pencilab.special.darboux_separated(a, branch)
    k = np.sqrt(complex(a))
    for r in (0.0, 0.3, 0.5, 1.0, 2.5):
        np.testing.assert_allclose(solution(0.0, r), bessel(r), atol=1e-9)
        np.testing.assert_allclose(solution(0.4, r), np.cosh(k * 0.4).real * bessel(r), atol=1e-9)
    assert pencilab.special.residual_darboux(solution.field, OFF_AXIS, tolerance=1e-8).passed
    report = pencilab.special.separated_ode_residuals(a, [0.2, 0.5, 0.9, 1.7], tolerance=1e-6)
    assert report.passed, report.as_json()


def test_separated_residual_rejects_non_solution(monkeypatch):
    def wrong_profile(self, r):
        r = abs(float(r))
        value, deriv = r ** 3 + 7, 11 * r
        return complex(value), complex(deriv), complex(self.a * value - (deriv / r if r else 0))

    monkeypatch.setattr(pencilab.special.RadialProfile, "values", wrong_profile)
    solution = pencilab.special.darboux_separated(-1.0, "regular")
    report = pencilab.special.residual_darboux(solution.field, [(0.3, 0.9), (1.2, 0.4)], tolerance=1e-9)
    assert not report.passed


def test_separated_second_difference():
    profile = pencilab.special.RadialProfile(-4.0)
    for r in (0.004, 0.3, 0.5, 1.2):
        _, _, second = profile.values(r)
        assert profile.second_difference(r) == pytest.approx(second, abs=1e-8)


def test_separated_profile_derivative():
    profile = pencilab.special.RadialProfile(-4.0)
    for r in (0.2, 0.8, 1.9):
        value, deriv, _ = profile.values(r)
        np.testing.assert_allclose(value, scipy.special.j0(2 * r), atol=1e-9)
        np.testing.assert_allclose(deriv, -2 * scipy.special.j1(2 * r), atol=1e-9)
    assert profile.values(0.0) == (1, 0, -2)


def test_separated_zero_rate():
    solution = pencilab.special.darboux_separated(0.0, "regular", c1=1.0, c2=2.0)
    np.testing.assert_allclose(solution(1.5, 0.7), 4.0)
    assert solution.as_json()["parameters"]["branch"] == "regular"


@pytest.mark.parametrize(
    ("a", "branch"),
    [pytest.param(1.0, "regular", id="regular_positive"), pytest.param(-1.0, "modified", id="modified_negative")],
)
def test_separated_wrong_branch(a, branch):
    with pytest.raises(pencilab.errors.InvalidConstantsError, match="branch"):
        pencilab.special.darboux_separated(a, branch)


def test_chebyshev_nodes():
    nodes = pencilab.special.chebyshev_nodes(8)
    assert len(nodes) == 8
    np.testing.assert_allclose(np.sort(nodes), -np.sort(nodes)[::-1])
    assert pencilab.special.chebyshev_nodes(8) is nodes
