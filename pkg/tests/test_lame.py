import math

import numpy as np
import pytest

import pencilab.errors
import pencilab.families
import pencilab.fields
import pencilab.lame
import pencilab.metric
import pencilab.pencil

Grid = pencilab.fields.Grid
UnivariateFunction = pencilab.fields.UnivariateFunction


def constants(*values, K1=0.0, K2=0.0):
    return pencilab.pencil.PencilSpec(
        f=[UnivariateFunction.constant(v) for v in values], K1=K1, K2=K2
    )


@pytest.fixture
def sphere():
    frame = pencilab.families.sphere_frame()
    return frame, pencilab.lame.rotation_from_frame(frame)


@pytest.fixture
def grid():
    return Grid.box([0.5, 0.0], [1.2, 1.0], 5)


def test_rotation_from_sphere_frame(sphere):
    _, beta = sphere
    for u1 in (0.3, 0.9, 1.4):
        u = (u1, 0.2)
        assert beta(u, 0, 1) == pytest.approx(math.cos(u1))
        assert beta(u, 1, 0) == pytest.approx(0.0)
        assert beta.d(u, 0, 1, 0) == pytest.approx(-math.sin(u1))
    np.testing.assert_allclose(
        beta.matrix((0.9, 0.2)), [[0, math.cos(0.9)], [0, 0]], atol=1e-12
    )


def test_rotation_index_checked():
    with pytest.raises(pencilab.errors.DimensionMismatchError):
        pencilab.lame.RotationCoefficients(
            beta={(0, 0): pencilab.fields.ScalarField.constant(0.0)}, dimension=2
        )


def test_sphere_lam2_and_frame(sphere, grid):
    frame, beta = sphere
    lam1 = pencilab.lame.residual_lam1(beta, grid, 1e-6)
    assert lam1.passed
    assert lam1["lam1"].note == "vacuous for N=2"
    assert lam1["lam1"].samples == 0
    assert pencilab.lame.residual_lam2(beta, frame, 1.0, grid, 1e-6).passed
    assert pencilab.lame.residual_frame(beta, frame, grid, 1e-6).passed
    assert not pencilab.lame.residual_lam2(beta, frame, 0.0, grid, 1e-6).passed


def test_spherical3_suite():
    frame = pencilab.families.spherical3_frame()
    beta = pencilab.lame.rotation_from_frame(frame)
    grid = Grid.box([1.0, 0.5, 0.0], [2.0, 1.2, 1.0], 5)
    for report in (
        pencilab.lame.residual_lam1(beta, grid, 1e-6),
        pencilab.lame.residual_lam2(beta, frame, 0.0, grid, 1e-6),
        pencilab.lame.residual_frame(beta, frame, grid, 1e-6),
    ):
        assert report.passed, (report.title, report.max_norm)
    assert pencilab.lame.residual_lam1(beta, grid)["lam1"].samples == 6 * len(grid)


def test_perturbed_beta_is_detected(sphere, grid):
    frame, beta = sphere
    perturbed = beta.perturbed(0, 1, 0.01)
    report = pencilab.lame.residual_frame(perturbed, frame, grid, 1e-6)
    assert report.max_norm == pytest.approx(0.01)
    assert report.max_norm > 1e-3
    assert perturbed.d((0.7, 0.1), 0, 1, 0) == pytest.approx(beta.d((0.7, 0.1), 0, 1, 0))


def test_sphere_singular_pencil_suite(sphere, grid):
    frame, beta = sphere
    instance = pencilab.lame.SystemInstance(
        beta=beta, frame=frame, pencil=constants(1.0, 1.0, K1=1.0, K2=1.0)
    )
    report = pencilab.lame.residual_suite(instance, grid, 1e-6)
    assert report.passed
    assert instance.nonsingular is False
    assert "alt-form" not in report
    assert any("singular" in note for note in report.notes)


def test_example_constant_suite():
    frame = pencilab.families.example_constant_frame(a=0.5, b=-0.25)
    beta = pencilab.lame.rotation_from_frame(frame)
    assert beta((0.1, 0.2), 0, 1) == pytest.approx(0.5)
    assert beta((0.1, 0.2), 1, 0) == pytest.approx(-0.25)
    grid = Grid.box([0.0, 0.0], [1.0, 1.0], 4)
    instance = pencilab.lame.SystemInstance(beta=beta, frame=frame, pencil=constants(1.0, 2.0))
    report = pencilab.lame.residual_suite(instance, grid, 1e-6)
    assert report.passed, report.failures()
    assert instance.nonsingular is True
    assert "alt-form" in report


def test_constant_f_residual():
    frame = pencilab.families.example_constant_frame()
    beta = pencilab.lame.rotation_from_frame(frame)
    grid = Grid.box([0.0, 0.0], [0.5, 0.5], 3)
    report = pencilab.lame.constant_f_residual(beta, frame, [1, 2], 0, 0, grid, 1e-6)
    assert report.passed
    assert "lam2co" in report
    wrong = pencilab.lame.constant_f_residual(beta, frame, [1, 2], 1.0, 0, grid, 1e-6)
    assert wrong.failures() == ["lam2co"]


@pytest.mark.parametrize(
    ("c", "match"),
    [
        pytest.param([1, 1], "pairwise distinct", id="repeated"),
        pytest.param([0, 1], "nonzero", id="zero"),
    ],
)
def test_constant_f_invalid_constants(c, match):
    frame = pencilab.families.example_constant_frame()
    beta = pencilab.lame.rotation_from_frame(frame)
    with pytest.raises(pencilab.errors.InvalidConstantsError, match=match):
        pencilab.lame.constant_f_residual(beta, frame, c, 0, 0, Grid.box([0, 0], [1, 1], 2))


def test_alt_form_collision():
    frame = pencilab.families.example_constant_frame()
    beta = pencilab.lame.rotation_from_frame(frame)
    with pytest.raises(pencilab.errors.EigenvalueCollisionError):
        pencilab.lame.residual_alt_form(beta, frame, constants(2.0, 2.0), Grid.box([0, 0], [1, 1], 2))


def test_system_instance_dimension_checked(sphere):
    frame, beta = sphere
    with pytest.raises(pencilab.errors.DimensionMismatchError):
        pencilab.lame.SystemInstance(beta=beta, frame=frame, pencil=constants(1.0, 2.0, 3.0))


def test_scale_frame():
    frame = pencilab.families.example_constant_frame(a=0.5, b=0.25)
    scaled = pencilab.lame.scale_frame(frame, constants(1.0, 4.0))
    u = (0.3, 0.1)
    H = frame.values(u)
    np.testing.assert_allclose(scaled.H_tilde.values(u), [H[0], H[1] / 2])
    assert scaled.beta_tilde(u, 0, 1) == pytest.approx(0.25)
    assert scaled.beta_tilde(u, 1, 0) == pytest.approx(0.5)
    assert scaled.H_tilde.epsilon == [1, 1]

    flipped = pencilab.lame.scale_frame(frame, constants(-1.0, 4.0), eps_hat=[-1, 1])
    assert flipped.H_tilde.epsilon == [-1, 1]
    assert flipped.H_tilde.H[0](u) == pytest.approx(H[0])


def test_frame_from_rotation_sphere(sphere):
    _, beta = sphere
    grid = Grid.box([0.5, 0.0], [1.2, 1.0], 5)
    low = math.sin(0.5)
    rec = pencilab.lame.frame_from_rotation(
        beta, grid, line_data=[lambda x: 1.0, lambda x: low], substeps=4
    )
    assert rec.path_residual == 0.0
    assert rec.richardson_estimate < 1e-4
    expected = np.sin(rec.axes[0])[:, None] * np.ones(len(rec.axes[1]))
    np.testing.assert_allclose(rec.values[..., 1].real, expected, atol=1e-6)
    np.testing.assert_allclose(rec.values[..., 0].real, 1.0, atol=1e-12)
    assert rec.frame.H[1]((0.85, 0.5)) == pytest.approx(math.sin(0.85), abs=1e-5)
    assert rec.as_json()["path_residual"] == 0.0


def test_frame_from_rotation_spherical3_path_independent():
    frame = pencilab.families.spherical3_frame()
    beta = pencilab.lame.rotation_from_frame(frame)
    grid = Grid.box([1.0, 0.5, 0.0], [1.5, 1.0, 0.5], 3)
    rec = pencilab.lame.frame_from_rotation(
        beta,
        grid,
        line_data=[lambda x: 1.0, lambda x: 1.0, lambda x: math.sin(0.5)],
        substeps=2,
    )
    assert rec.path_residual < 1e-5
    assert rec.values[-1, -1, -1, 2].real == pytest.approx(1.5 * math.sin(1.0), abs=1e-5)


def test_frame_from_rotation_rejects_bad_input(sphere):
    _, beta = sphere
    with pytest.raises(pencilab.errors.DimensionMismatchError):
        pencilab.lame.frame_from_rotation(beta, Grid.box([0, 0], [1, 1], 3), line_data=[lambda x: 1.0])
    with pytest.raises(pencilab.errors.InvalidConstantsError):
        pencilab.lame.frame_from_rotation(beta, Grid.box([0, 0], [1, 1], 3), substeps=0)


def relabeled(frame, order):
    """The same frame in coordinates v with v_k = u_order[k]."""
    n = frame.dimension

    def back(v):
        u = [0j] * n
        for k, s in enumerate(order):
            u[s] = v[k]
        return tuple(u)

    def component(i):
        h = frame.H[order[i]]
        return pencilab.fields.ScalarField(
            func=lambda v: h(back(v)),
            partials={k: (lambda v, k=k: h.d(back(v), order[k])) for k in range(n)},
            second_partials={
                (j, k): (lambda v, j=j, k=k: h.d2(back(v), order[j], order[k]))
                for j in range(n)
                for k in range(j, n)
            },
            name=h.name,
        )

    return pencilab.metric.LameFrame(
        H=[component(i) for i in range(n)], epsilon=[frame.epsilon[s] for s in order]
    )


@pytest.mark.parametrize(
    ("order",),
    [
        pytest.param((1, 0, 2), id="swap_first_two"),
        pytest.param((0, 2, 1), id="swap_last_two"),
        pytest.param((2, 0, 1), id="cycle"),
    ],
)
def test_residuals_invariant_under_relabeling(order):
    frame = pencilab.families.spherical3_frame()
    pencil = pencilab.pencil.PencilSpec(
        f=[UnivariateFunction.identity(), UnivariateFunction.constant(5.0), UnivariateFunction.constant(-1.0)],
        K1=0.3,
        K2=0.0,
    )
    lower, upper = [1.0, 0.5, 0.1], [2.0, 1.2, 0.9]
    moved = relabeled(frame, order)
    moved_pencil = pencilab.pencil.PencilSpec(f=[pencil.f[s] for s in order], K1=0.3, K2=0.0)

    u = (1.3, 0.7, 0.4)
    v = tuple(u[s] for s in order)
    metric, moved_metric = pencilab.metric.frame_to_metric(frame), pencilab.metric.frame_to_metric(moved)
    gamma = pencilab.metric.christoffel(metric, u)
    np.testing.assert_allclose(
        pencilab.metric.christoffel(moved_metric, v), gamma[np.ix_(order, order, order)], rtol=1e-12, atol=1e-14
    )
    comps = pencilab.metric.riemann_components(metric, u)
    moved_comps = pencilab.metric.riemann_components(moved_metric, v)
    for i, j, l in moved_comps.keys():
        assert moved_comps[(i, j, l)] == pytest.approx(comps[(order[i], order[j], order[l])], rel=1e-9, abs=1e-12)

    report = pencilab.lame.residual_suite(
        pencilab.lame.SystemInstance(pencilab.lame.rotation_from_frame(frame), frame, pencil),
        Grid.box(lower, upper, 3),
        1e-6,
    )
    moved_report = pencilab.lame.residual_suite(
        pencilab.lame.SystemInstance(pencilab.lame.rotation_from_frame(moved), moved, moved_pencil),
        Grid.box([lower[s] for s in order], [upper[s] for s in order], 3),
        1e-6,
    )
    assert sorted(moved_report.equations) == sorted(report.equations)
    assert report["lam3"].max_norm > 1e-3
    for name, eq in report.equations.items():
        assert moved_report[name].samples == eq.samples
        assert moved_report[name].max_norm == pytest.approx(eq.max_norm, rel=1e-9, abs=1e-12)
        assert moved_report[name].l2 == pytest.approx(eq.l2, rel=1e-9, abs=1e-12)


def test_frame_from_rotation_reports_vanishing_point():
    with pytest.raises(pencilab.errors.ZeroLameCoefficientError, match="H_2") as exc:
        pencilab.lame.frame_from_rotation(
            pencilab.lame.RotationCoefficients.zero(2),
            Grid.box([0.0, 0.0], [1.0, 1.0], 3),
            line_data=[lambda x: 1.0, lambda x: x - 0.5],
            substeps=1,
        )
    assert exc.value.index == 1
    assert [complex(v).real for v in exc.value.point] == [0.0, 0.5]
