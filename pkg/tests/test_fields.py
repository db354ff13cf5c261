import math

import numpy as np
import pytest

import pencilab
import pencilab.errors
import pencilab.fields


def test_settings_from_env():
    settings = pencilab.Settings.from_env(
        {
            "PENCILAB_FD_STEP": "1e-3",
            "PENCILAB_THREADS": "4",
            "PENCILAB_REAL_MODE": "on",
        }
    )
    assert settings.fd_step == 1e-3
    assert settings.threads == 4
    assert settings.real_mode
    assert settings.degeneracy == 1e-12
    assert settings.cond_limit == 1e12


def test_get_settings_cached(monkeypatch):
    monkeypatch.setenv("PENCILAB_FD_STEP", "2e-4")
    assert pencilab.get_settings().fd_step == 2e-4
    monkeypatch.setenv("PENCILAB_FD_STEP", "3e-4")
    assert pencilab.get_settings().fd_step == 2e-4
    pencilab.get_settings.cache_clear()
    assert pencilab.get_settings().fd_step == 3e-4


@pytest.mark.parametrize(
    ("threads",),
    [
        pytest.param(1, id="serial"),
        pytest.param(3, id="pool"),
    ],
)
def test_parallel_map_keeps_order(threads):
    assert pencilab.parallel_map(lambda v: v * v, range(10), threads) == [
        v * v for v in range(10)
    ]


@pytest.mark.parametrize(
    ("z", "real", "expected"),
    [
        pytest.param(4, False, 2, id="positive"),
        pytest.param(-4, False, 2j, id="negative_complex"),
        pytest.param(4, True, 2, id="positive_real"),
    ],
)
def test_principal_sqrt(z, real, expected):
    assert pencilab.fields.principal_sqrt(z, real=real) == pytest.approx(expected)


def test_principal_sqrt_real_mode_rejects(monkeypatch):
    monkeypatch.setenv("PENCILAB_REAL_MODE", "on")
    pencilab.get_settings.cache_clear()
    with pytest.raises(pencilab.errors.BranchError):
        pencilab.fields.principal_sqrt(-1.0, what="radicand")


def test_scalar_field_partials_fall_back_to_differences():
    field = pencilab.fields.ScalarField(
        func=lambda u: np.sin(u[0]) * u[1] ** 2, name="sin*sq"
    )
    u = (0.3, 1.5)
    assert field(u) == pytest.approx(math.sin(0.3) * 2.25)
    assert field.d(u, 0) == pytest.approx(math.cos(0.3) * 2.25, rel=1e-7)
    assert field.d(u, 1) == pytest.approx(math.sin(0.3) * 3.0, rel=1e-7)
    assert field.d2(u, 0, 0) == pytest.approx(-math.sin(0.3) * 2.25, rel=1e-5)
    assert field.d2(u, 0, 1) == pytest.approx(math.cos(0.3) * 3.0, rel=1e-5)


def test_scalar_field_prefers_analytic_partials():
    field = pencilab.fields.ScalarField(
        func=lambda u: u[0] * u[1],
        partials={0: lambda u: 42.0},
        second_partials={(0, 1): lambda u: -1.0},
    )
    assert field.d((1, 2), 0) == 42.0
    assert field.d2((1, 2), 1, 0) == -1.0
    assert field.d((1, 2), 1) == pytest.approx(1.0)


def test_scalar_field_non_finite():
    field = pencilab.fields.ScalarField(func=lambda u: 1 / u[0] if u[0] else np.inf, name="pole")
    with pytest.raises(pencilab.errors.NonFiniteError, match="non-finite pole"):
        field((0.0, 1.0))


def test_univariate_constructors():
    const = pencilab.fields.UnivariateFunction.constant(3)
    assert const.is_constant
    assert const(10) == 3
    assert const.d(1) == 0

    ident = pencilab.fields.UnivariateFunction.identity()
    assert not ident.is_constant
    assert ident(2.5) == 2.5
    assert ident.d(2.5) == 1

    assert pencilab.fields.UnivariateFunction.linear(0, 5).is_constant
    line = pencilab.fields.UnivariateFunction.linear(2, 1)
    assert line(3) == 7
    assert line.d2(3) == 0


def test_univariate_constant_flag_ignores_name():
    flat = pencilab.fields.UnivariateFunction(lambda x: 2 + 0j, name="two", known_constant=True)
    assert flat.is_constant
    misleading = pencilab.fields.UnivariateFunction(lambda x: x, name="constant-ish")
    assert not misleading.is_constant


def test_univariate_differences():
    f = pencilab.fields.UnivariateFunction(lambda x: np.exp(x), name="exp")
    assert f.d(0.5) == pytest.approx(math.exp(0.5), rel=1e-7)
    assert f.d2(0.5) == pytest.approx(math.exp(0.5), rel=1e-5)


def test_grid_box():
    grid = pencilab.fields.Grid.box([0, 1], [1, 3], [3, 5])
    assert grid.dimension == 2
    assert grid.shape == (3, 5)
    assert len(grid) == 15
    assert len(list(grid.points())) == 15
    assert grid.lower == [0.0, 1.0]
    assert grid.upper == [1.0, 3.0]
    assert grid.describe() == "[0,1] x [1,3] @ 3x5"
    assert grid.as_json() == {"box": [[0.0, 1.0], [1.0, 3.0]], "resolution": [3, 5]}


def test_grid_around():
    grid = pencilab.fields.Grid.around([1.0, 2.0, 3.0], 0.5, 2)
    assert grid.lower == [0.5, 1.5, 2.5]
    assert grid.upper == [1.5, 2.5, 3.5]


def test_grid_dimension_mismatch():
    with pytest.raises(pencilab.errors.DimensionMismatchError, match="grid box"):
        pencilab.fields.Grid.box([0, 0], [1, 1, 1])
    with pytest.raises(pencilab.errors.DimensionMismatchError, match="grid resolution"):
        pencilab.fields.Grid.box([0, 0], [1, 1], [3])
