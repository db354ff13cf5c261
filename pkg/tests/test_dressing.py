import math

import numpy as np
import pytest

import pencilab.dressing
import pencilab.errors
import pencilab.families
import pencilab.fields
import pencilab.pencil

Grid = pencilab.fields.Grid
UnivariateFunction = pencilab.fields.UnivariateFunction
Potentials = pencilab.dressing.Potentials


def pencil_of(*fs):
    return pencilab.pencil.PencilSpec(f=list(fs))


def identity():
    return UnivariateFunction.identity()


def const(c):
    return UnivariateFunction.constant(c)


@pytest.fixture
def disc():
    return pencilab.dressing.composite_gauss_legendre(0.0, 12.0, 96, 16)


def test_composite_gauss_legendre(disc):
    assert disc.size == 96
    assert disc.length == pytest.approx(12.0)
    assert np.all(np.diff(disc.nodes) > 0)
    assert np.all(disc.weights > 0)
    assert np.sum(disc.weights * np.exp(-disc.nodes)) == pytest.approx(1 - math.exp(-12), rel=1e-13)
    with pytest.raises(pencilab.errors.InvalidConstantsError):
        pencilab.dressing.composite_gauss_legendre(0.0, 1.0, 20, 16)
    with pytest.raises(pencilab.errors.InvalidConstantsError):
        pencilab.dressing.composite_gauss_legendre(1.0, 1.0)


def test_potential_difference_fallback():
    analytic = pencilab.families.gaussian_potential(a=0.5, width=1.5)
    bare = pencilab.dressing.Potential(func=analytic.func)
    x, y = np.array([0.2, -0.4]), np.array([0.7, 0.1])
    np.testing.assert_allclose(bare.d_x(x, y), analytic.d_x(x, y), rtol=1e-7)
    np.testing.assert_allclose(bare.d_y(x, y), analytic.d_y(x, y), rtol=1e-7)
    np.testing.assert_allclose(bare.d_xy(x, y), analytic.d_xy(x, y), rtol=1e-4)


def test_potentials_index_checked():
    with pytest.raises(pencilab.errors.DimensionMismatchError):
        Potentials(phi={(1, 0): pencilab.families.gaussian_potential()}, dimension=2)
    with pytest.raises(pencilab.errors.DimensionMismatchError):
        Potentials(phi={(0, 2): pencilab.families.gaussian_potential()}, dimension=2)


def test_skew_residual():
    samples = [(0.1, 0.5), (1.0, -0.3), (2.0, 2.0)]
    skew = Potentials(phi={(0, 0): pencilab.families.skew_gaussian_potential()}, dimension=1)
    assert skew.skew_residual(samples) == pytest.approx(0.0, abs=1e-15)
    plain = Potentials(phi={(0, 0): pencilab.families.gaussian_potential()}, dimension=1)
    assert plain.skew_residual(samples) > 0


def test_assemble_zero():
    kernel = pencilab.dressing.assemble_F(Potentials.zero(2), (0.1, 0.2))
    np.testing.assert_array_equal(kernel.at(0.3, 0.4), np.zeros((2, 2)))
    assert kernel.u == (0.1, 0.2)


def test_assemble_exponential():
    a, u = 0.3, (0.1, 0.2)
    potentials = Potentials(phi={(0, 1): pencilab.families.exponential_potential(a, 1.0)}, dimension=2)
    kernel = pencilab.dressing.assemble_F(potentials, u)
    s, t = 0.5, 1.25
    F = kernel.at(s, t)
    assert F[0, 1] == pytest.approx(-a * math.exp(-(s - u[0]) - (t - u[1])))
    assert F[1, 0] == pytest.approx(a * math.exp(-(t - u[0]) - (s - u[1])))
    assert F[0, 0] == 0
    with pytest.raises(pencilab.errors.DimensionMismatchError):
        pencilab.dressing.assemble_F(potentials, (0.1,))


def test_zakharov_relation():
    samples = [(0.2, 0.4), (1.0, 2.0), (0.5, 0.5)]
    potentials = Potentials(
        phi={
            (0, 1): pencilab.families.gaussian_potential(0.2),
            (0, 0): pencilab.families.skew_gaussian_potential(0.1),
        },
        dimension=2,
    )
    assembled = pencilab.dressing.assemble_F(potentials, (0.1, -0.2))
    assert pencilab.dressing.zakharov_relation_residual(assembled, samples, 1e-6).passed

    loose = pencilab.dressing.Kernel(entries={(0, 1): lambda s, t: np.exp(-s - t)}, dimension=2)
    report = pencilab.dressing.zakharov_relation_residual(loose, samples, 1e-6)
    assert not report.passed
    assert report.max_norm == pytest.approx(math.exp(-0.6), rel=1e-6)


def test_reduction_trivial_for_equal_constants():
    potentials = Potentials(phi={(0, 1): pencilab.families.gaussian_potential(1.0)}, dimension=2)
    report = pencilab.dressing.reduction_pde_residual(
        potentials, pencil_of(const(2), const(2)), [(0.1, 0.3), (1, 2)], 1e-10
    )
    assert report.passed


@pytest.mark.parametrize(
    ("potential", "pencil", "expected"),
    [
        pytest.param(
            pencilab.families.f2_closed_potential(a=0.5, b=0.5, c=1.5),
            pencil_of(identity(), const(1.5)),
            True,
            id="f2_first",
        ),
        pytest.param(
            pencilab.families.f2_closed_potential(a=0.5, b=0.5, c=1.5, monotone="second"),
            pencil_of(const(1.5), identity()),
            True,
            id="f2_second",
        ),
        pytest.param(
            pencilab.families.f3_exponential_potential(0.5, 0.2),
            pencil_of(const(1), const(2)),
            True,
            id="f3",
        ),
        pytest.param(
            pencilab.families.f1_mean_value_potential(amplitude=0.5),
            pencil_of(identity(), identity()),
            True,
            id="f1_mean_value",
        ),
        pytest.param(
            pencilab.families.gaussian_potential(0.5),
            pencil_of(identity(), identity()),
            False,
            id="gaussian_negative",
        ),
    ],
)
def test_reduction_pde_residual(potential, pencil, expected):
    samples = [(0.1, 0.2), (0.5, 1.0), (1.5, 0.3), (2.0, 2.5)]
    potentials = Potentials(phi={(0, 1): potential}, dimension=2)
    report = pencilab.dressing.reduction_pde_residual(potentials, pencil, samples, 1e-8)
    assert report.passed is expected, report.max_norm
    assert "reduction 12" in report


def test_solve_zero_kernel(disc):
    kernel = pencilab.dressing.assemble_F(Potentials.zero(2), (0.0, 0.0))
    K = pencilab.dressing.solve_marchenko(kernel, 0.0, disc)
    np.testing.assert_array_equal(K.X, 0)
    np.testing.assert_array_equal(pencilab.dressing.beta_from_kernel(K), 0)
    assert K.cond == pytest.approx(1.0)


def test_rank_one_resolvent(disc):
    def phi(s):
        return np.exp(-s)

    def psi(s):
        return 0.5 * np.exp(-2 * s)

    kernel = pencilab.dressing.separable_kernel(phi, psi)
    K = pencilab.dressing.solve_marchenko(kernel, 0.0, disc)
    t = np.array([0.0, 0.3, 1.7, 5.0])
    expected = pencilab.dressing.rank_one_resolvent(phi, psi, 0.0, t, disc)
    np.testing.assert_allclose(K.at(0, 0, t), expected, rtol=1e-8, atol=1e-12)
    exact = phi(0.0) * psi(t) / (1 - 0.5 / 3)
    np.testing.assert_allclose(expected, exact, rtol=1e-8)


def test_rank_one_node_doubling():
    def phi(s):
        return np.exp(-s)

    def psi(s):
        return 0.5 * np.exp(-2 * s)

    kernel = pencilab.dressing.separable_kernel(phi, psi)
    t = np.array([0.0, 0.5, 1.5])
    exact = phi(0.0) * psi(t) / (1 - (1 - math.exp(-6.0)) / 6)
    errors = []
    for nodes in (8, 16):
        disc = pencilab.dressing.composite_gauss_legendre(0.0, 2.0, nodes, 2)
        K = pencilab.dressing.solve_marchenko(kernel, 0.0, disc)
        errors.append(np.max(np.abs(K.at(0, 0, t) - exact)))
    assert errors[1] * 8 <= errors[0]


def test_neumann_series_second_born_term(disc):
    potentials = Potentials(phi={(0, 1): pencilab.families.gaussian_potential(1e-3)}, dimension=2)
    kernel = pencilab.dressing.assemble_F(potentials, (0.2, 0.4))
    K = pencilab.dressing.solve_marchenko(kernel, 0.0, disc)
    first, second, third = pencilab.dressing.neumann_series(kernel, 0.0, disc, terms=3)
    assert np.max(np.abs(K.X - first - second)) <= 10 * np.max(np.abs(third)) + 1e-15
    assert np.max(np.abs(third)) < 1e-8


def test_beta_first_born(disc):
    a = 0.01
    potentials = Potentials(phi={(0, 1): pencilab.families.gaussian_potential(a)}, dimension=2)
    kernel = pencilab.dressing.assemble_F(potentials, (0.2, 0.4))
    beta = pencilab.dressing.beta_from_kernel(pencilab.dressing.solve_marchenko(kernel, 0.0, disc))
    born = kernel.at(0.0, 0.0).T
    np.fill_diagonal(born, 0)
    assert np.max(np.abs(beta - born)) <= 10 * a * a
    assert beta[0, 0] == 0


def test_ill_conditioned(disc):
    kernel = pencilab.dressing.separable_kernel(lambda s: np.exp(-s), lambda s: np.exp(-s))
    with pytest.raises(pencilab.errors.IllConditionedError, match="cond="):
        pencilab.dressing.solve_marchenko(kernel, 0.0, disc, cond_limit=1.0)


def test_decay_check(disc):
    potentials = Potentials(phi={(0, 1): pencilab.families.exponential_potential(1.0, 0.1)}, dimension=2)
    kernel = pencilab.dressing.assemble_F(potentials, (0.0, 0.0))
    with pytest.raises(pencilab.errors.DecayBoundError, match="s_max=12"):
        pencilab.dressing.decay_check(kernel, disc, 1e-8)
    bound = pencilab.dressing.decay_check(kernel, disc, 1.0)
    assert 0 < bound.observed < 1.0


def test_born_norm(disc):
    kernel = pencilab.dressing.separable_kernel(lambda s: 0 * s + 0.5, lambda s: 0 * s + 1.0)
    assert pencilab.dressing.born_norm(kernel, disc) == pytest.approx(6.0)


@pytest.mark.parametrize(
    ("pencil",),
    [
        pytest.param(pencil_of(const(1), const(1)), id="unit"),
        pytest.param(pencil_of(const(2), const(3)), id="constants"),
        pytest.param(pencil_of(UnivariateFunction.linear(-1, 20), const(3)), id="linear_positive"),
    ],
)
def test_tilde_scaling_check(pencil):
    potentials = Potentials(phi={(0, 1): pencilab.families.gaussian_potential(0.05)}, dimension=2)
    config = pencilab.dressing.QuadratureConfig(nodes=64, panel_nodes=16, span=10.0)
    report = pencilab.dressing.tilde_scaling_check(potentials, pencil, 0.0, (0.2, 0.4), config, 1e-8)
    assert report.passed, report.max_norm


def test_tilde_scaling_branch_crossing():
    potentials = Potentials(phi={(0, 1): pencilab.families.gaussian_potential(0.05)}, dimension=2)
    config = pencilab.dressing.QuadratureConfig(nodes=32, panel_nodes=16, span=4.0)
    with pytest.raises(pencilab.errors.BranchError, match="f1"):
        pencilab.dressing.tilde_scaling_check(
            potentials, pencil_of(identity(), const(3)), 0.0, (1.0, 0.4), config
        )


@pytest.mark.parametrize(
    ("offset", "crosses"),
    [
        pytest.param(1.0, True, id="imaginary_part_changes_sign"),
        pytest.param(5.0, False, id="stays_above_cut"),
    ],
)
def test_scaled_kernel_negative_axis_crossing(offset, crosses):
    potentials = Potentials(phi={(0, 1): pencilab.families.gaussian_potential(0.05)}, dimension=2)
    kernel = pencilab.dressing.assemble_F(potentials, (1.0, 0.4))
    skew = UnivariateFunction(lambda x: -1 + 1j * (x + offset), lambda x: 1j, name="skew")
    disc = pencilab.dressing.composite_gauss_legendre(0.0, 4.0, 32, 16)
    if crosses:
        with pytest.raises(pencilab.errors.BranchError, match="f1"):
            pencilab.dressing.scaled_kernel(kernel, pencil_of(skew, const(3)), disc)
    else:
        scaled = pencilab.dressing.scaled_kernel(kernel, pencil_of(skew, const(3)), disc)
        assert scaled.dimension == 2


def test_dressed_beta_caches_solves():
    potentials = Potentials(phi={(0, 1): pencilab.families.gaussian_potential(0.01)}, dimension=2)
    dressed = pencilab.dressing.DressedBeta(potentials, 0.0, pencilab.dressing.QuadratureConfig(nodes=32))
    first = dressed.matrix((0.1, 0.2))
    second = dressed.matrix((0.1, 0.2))
    assert first is second
    assert dressed.solves == 1
    beta = dressed.coefficients()
    assert beta((0.1, 0.2), 0, 1) == first[0, 1]


def test_dressed_beta_cache_is_bounded():
    potentials = Potentials(phi={(0, 1): pencilab.families.gaussian_potential(0.01)}, dimension=2)
    dressed = pencilab.dressing.DressedBeta(
        potentials, 0.0, pencilab.dressing.QuadratureConfig(nodes=32), cache_size=2
    )
    for u in [(0.1, 0.2), (0.3, 0.2), (0.5, 0.2), (0.1, 0.2)]:
        dressed.matrix(u)
    assert dressed.solves == 4
    assert dressed._solve.cache_info().currsize == 2


def test_dress_zero_potentials():
    grid = Grid.box([0.0, 0.0], [0.5, 0.5], 3)
    result = pencilab.dressing.dress(
        Potentials.zero(2),
        pencil_of(identity(), const(2)),
        0.0,
        grid,
        pencilab.dressing.QuadratureConfig(nodes=32),
        1e-8,
    )
    assert result.report.passed, result.report.failures()
    assert result.path_residual == 0.0
    np.testing.assert_allclose(result.instance.frame.values((0.2, 0.3)), [1, 1])
    assert result.instance.pencil.K1 == 0
    assert result.instance.nonsingular is True


def test_dress_f2_closed_form():
    grid = Grid.box([0.0, 0.0], [0.5, 0.5], 3)
    potentials = Potentials(
        phi={(0, 1): pencilab.families.f2_closed_potential(a=1e-4, b=1e-4, c=1.0)}, dimension=2
    )
    config = pencilab.dressing.QuadratureConfig(nodes=96, panel_nodes=16, span=40.0, trunc_tol=1e-3)
    result = pencilab.dressing.dress(
        potentials, pencil_of(identity(), const(1.0)), 0.0, grid, config, 1e-5, substeps=2
    )
    assert result.report.passed, result.report.failures()
    assert "reduction 12" in result.report
    assert "lam2" in result.report
    assert result.report["frame"].tolerance == 1e-4
    assert abs(result.instance.beta((0.25, 0.25), 0, 1)) > 0


def test_dress_dimension_mismatch():
    with pytest.raises(pencilab.errors.DimensionMismatchError):
        pencilab.dressing.dress(
            Potentials.zero(2),
            pencil_of(identity(), const(2), const(3)),
            0.0,
            Grid.box([0, 0], [1, 1], 2),
            pencilab.dressing.QuadratureConfig(nodes=32),
        )
