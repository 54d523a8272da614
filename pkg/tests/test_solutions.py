import numpy as np
import pytest

from sgefem.solutions import lame, make_case

CASES = [1, 2, 3, 4]


def interior_points(rng, count, away_from_origin=0.0):
    pts = rng.uniform(0.02, 0.98, size=(4 * count, 2))
    pts = pts[np.linalg.norm(pts, axis=1) > away_from_origin]
    return pts[:count]


def central(f, x, d, step):
    e = np.zeros(2)
    e[d] = step
    return (f(x + e) - f(x - e)) / (2 * step)


def richardson(f, x, d, step):
    """Fourth-order central difference."""
    return (4 * central(f, x, d, step / 2) - central(f, x, d, step)) / 3


def elasticity_operator(case, x):
    H = case.hess(x)
    lap = H[..., 0, 0] + H[..., 1, 1]
    graddiv = H[..., 0, 0, :] + H[..., 1, 1, :]
    return case.mu * lap + (case.lam + case.mu) * graddiv


def test_lame_parameters():
    lam, mu = lame(0.3)
    assert lam == pytest.approx(0.3 / (1.3 * 0.4))
    assert mu == pytest.approx(1 / 2.6)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        make_case(5, 0.3, 1.0)
    with pytest.raises(ValueError):
        make_case(1, 0.5, 1.0)


def test_case1_divergence_free(rng):
    case = make_case(1, 0.3, 1.0)
    assert np.abs(case.divergence(interior_points(rng, 100))).max() <= 1e-12


def test_case4_divergence_free(rng):
    case = make_case(4, 0.4999, 1e-4)
    assert np.abs(case.divergence(interior_points(rng, 100))).max() <= 1e-12
    assert np.abs(case.pressure(interior_points(rng, 100))).max() <= 1e-9


def test_case3_divergence_closed_form(rng):
    case = make_case(3, 0.3, 1.0)
    x = interior_points(rng, 100, 0.05)
    rho = np.linalg.norm(x, axis=1)
    theta = np.arctan2(x[:, 1], x[:, 0])
    expected = -3 * (1 + np.sqrt(2)) / (case.lam + case.mu) * np.sqrt(rho) * np.cos(theta / 2)
    assert np.abs(case.divergence(x) - expected).max() <= 1e-10


def test_case2_incompressible_limit(rng):
    x = interior_points(rng, 20)
    case = make_case(2, 0.5 - 1e-9, 1.0)
    target = np.sin(2 * np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]) ** 4
    assert np.allclose(case.value(x)[:, 1], target, atol=1e-6)


def test_case3_load_vanishes(rng):
    case = make_case(3, 0.3, 1.0)
    x = interior_points(rng, 100, 0.05)
    scale = np.abs(case.mu * case.hess(x)).max()
    assert np.abs(case.load_low(x)).max() <= 1e-8 * scale
    assert np.abs(case.load_high(x)).max() <= 1e-8 * scale
    assert case.load_vanishes


def test_case3_rejects_origin():
    case = make_case(3, 0.3, 1.0)
    with pytest.raises(ValueError):
        case.eval_f(np.zeros((1, 2)))
    with pytest.raises(ValueError):
        case.boundary_traction(np.zeros((1, 2)), np.array([0.0, -1.0]))
    # the displacement and pressure have the limit 0 there
    assert not case.value(np.zeros((1, 2))).any()
    assert case.pressure(np.zeros(2)) == 0.0


def test_case1_load_without_iota_is_minus_mu_laplacian(rng):
    case = make_case(1, 0.3, 1.0)
    x = interior_points(rng, 50)
    H = case.hess(x)
    assert np.allclose(case.eval_f(x, iota=0.0), -case.mu * (H[..., 0, 0] + H[..., 1, 1]), atol=1e-10)


def test_case4_load_ignores_iota(rng):
    case = make_case(4, 0.3, 1e-4)
    x = interior_points(rng, 30)
    assert np.array_equal(case.eval_f(x, iota=1.0), case.eval_f(x, iota=1e-6))
    Lu = elasticity_operator(case, x)
    assert np.allclose(case.eval_f(x), -Lu, atol=1e-10)


@pytest.mark.parametrize("cid", CASES)
def test_fourth_order_load_against_finite_differences(cid, rng):
    case = make_case(cid, 0.3, 1.0)
    x = interior_points(rng, 20, 0.2)
    step = 1e-3
    lap = 0.0
    for d in range(2):
        e = np.zeros(2)
        e[d] = step

        def second(s):
            ed = e * s / step
            return (elasticity_operator(case, x + ed) - 2 * elasticity_operator(case, x) + elasticity_operator(case, x - ed)) / s**2

        lap = lap + (4 * second(step / 2) - second(step)) / 3
    if cid == 4:
        return  # the case-4 load has no fourth-order part
    # for case 3 the operator vanishes identically; the Hessian sets the scale of the rounding noise
    scale = np.abs(lap).max() + case.mu * np.abs(case.hess(x)).max()
    assert np.abs(case.load_high(x) - lap).max() <= 1e-5 * scale
    assert np.allclose(case.load_low(x), -elasticity_operator(case, x), atol=1e-10 * scale)


@pytest.mark.parametrize("cid", CASES)
def test_derivative_stack(cid, rng):
    case = make_case(cid, 0.3, 1.0)
    x = interior_points(rng, 50, 0.1 if cid == 3 else 0.0)
    step = 1e-3
    g = case.grad(x)
    H = case.hess(x)
    tol_h = 1e-5 if cid == 3 else 1e-6
    for d in range(2):
        fd_g = richardson(case.value, x, d, step)
        assert np.abs(fd_g - g[..., d]).max() <= 1e-7 * max(1.0, np.abs(g).max())
        fd_h = richardson(case.grad, x, d, step)
        assert np.abs(fd_h - H[..., d]).max() <= tol_h * max(1.0, np.abs(H).max())


@pytest.mark.parametrize("cid", CASES)
def test_pressure_is_lambda_divergence(cid, rng):
    case = make_case(cid, 0.4999, 1.0)
    x = interior_points(rng, 1000, 0.05)
    p = case.pressure(x)
    scale = max(1.0, np.abs(p).max())
    assert np.abs(p - case.lam * case.divergence(x)).max() <= 1e-9 * scale
    H = case.hess(x)
    gdiv = H[..., 0, 0, :] + H[..., 1, 1, :]
    gp = case.pressure_grad(x)
    assert np.abs(gp - case.lam * gdiv).max() <= 1e-9 * max(1.0, np.abs(gp).max())


def boundary_samples(rng, count):
    t = rng.uniform(0.05, 0.95, size=count)
    side = np.arange(count) % 4
    pts = np.stack(
        [np.where(side == 0, t, np.where(side == 1, 1.0, np.where(side == 2, t, 0.0))),
         np.where(side == 0, 0.0, np.where(side == 1, t, np.where(side == 2, 1.0, t)))],
        axis=1,
    )
    normals = np.array([[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])[side]
    return pts, normals


@pytest.mark.parametrize("cid", [1, 2])
def test_homogeneous_double_traction(cid, rng):
    case = make_case(cid, 0.3, 1.0)
    x, n = boundary_samples(rng, 40)
    assert np.abs(case.boundary_traction(x, n)).max() <= 1e-10
    assert np.abs(case.value(x)).max() <= 1e-12


def test_case3_double_traction_against_finite_differences(rng):
    case = make_case(3, 0.3, 1.0)
    x, n = boundary_samples(rng, 20)

    def stress(y):
        g = case.grad(y)
        eps = 0.5 * (g + np.swapaxes(g, -1, -2))
        div = g[..., 0, 0] + g[..., 1, 1]
        return 2 * case.mu * eps + case.lam * div[..., None, None] * np.eye(2)

    step = 1e-3
    dsig = [(4 * (stress(x + step / 2 * n) - stress(x - step / 2 * n)) / step
             - (stress(x + step * n) - stress(x - step * n)) / (2 * step)) / 3]
    fd = np.einsum("pij,pj->pi", dsig[0], n)
    exact = case.boundary_traction(x, n)
    assert np.abs(fd - exact).max() <= 1e-5 * np.abs(exact).max()
    assert case.has_boundary_traction and not case.zero_mean_pressure
