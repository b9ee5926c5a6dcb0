"""Energy/mass functionals, inequality checks, and the inverse-power route."""

import math

import numpy as np
import pytest

from cmaeig.dirichlet import solve_frozen
from cmaeig.domain import Ball, GaussianBump, build_grid, eval_density
from cmaeig.eigenpath import INVERSE_POWER, verify_eigenpair
from cmaeig.errors import (
    DegenerateIterate,
    NotConverged,
    NotPSH,
    PreconditionViolated,
    ZeroMass,
)
from cmaeig.hessian import ScalarField, random_psh_field
from cmaeig.variational import (
    FunctionalValue,
    check_blocki,
    check_sobolev,
    energy,
    functionals,
    inverse_power,
    mass,
    omega_weight,
    rayleigh,
    sobolev_constant,
)

from oracles import (
    DISC_ENERGY_QUAD,
    DISC_MASS_QUAD,
    DISC_RAYLEIGH_QUAD,
    LAMBDA1_UNIT_DISC,
    disc_eigenmode,
)

BALL4_ENERGY_QUAD = 4.0 * math.pi ** 2 / 9.0
BALL4_MASS_QUAD = 2.0 * math.pi ** 2 / 15.0


@pytest.fixture(scope="module")
def disc32():
    return build_grid(Ball(1, 1.0), 1.0 / 32)


@pytest.fixture(scope="module")
def ball4():
    return build_grid(Ball(2, 1.0), 0.25)


def quad_field(grid):
    r2 = np.sum(grid.interior_coords ** 2, axis=1)
    return ScalarField.from_interior(grid, r2 - grid.spec.radius ** 2)


# ----------------------------------------------------------------- functionals


def test_omega_weight_values():
    assert omega_weight(1) == 2.0
    assert omega_weight(2) == 8.0
    assert omega_weight(3) == 48.0


def test_disc_quadratic_spot_values(disc32):
    phi = quad_field(disc32)
    assert energy(phi) == pytest.approx(DISC_ENERGY_QUAD, rel=5e-3)
    assert mass(phi) == pytest.approx(DISC_MASS_QUAD, rel=5e-3)
    assert rayleigh(phi) == pytest.approx(DISC_RAYLEIGH_QUAD, rel=5e-3)
    rec = functionals(phi)
    assert rec.energy == pytest.approx(energy(phi))
    assert rec.mass == pytest.approx(mass(phi))
    assert rec.rayleigh == pytest.approx(rec.energy / rec.mass)


def test_four_ball_quadratic_spot_values(ball4):
    phi = quad_field(ball4)
    assert energy(phi) == pytest.approx(BALL4_ENERGY_QUAD, rel=8e-2)
    assert mass(phi) == pytest.approx(BALL4_MASS_QUAD, rel=5e-2)
    assert rayleigh(phi) == pytest.approx(
        BALL4_ENERGY_QUAD / BALL4_MASS_QUAD, rel=5e-2
    )


@pytest.mark.parametrize("theta", [0.5, 2.0, 10.0])
def test_functionals_are_homogeneous(disc32, theta):
    phi = quad_field(disc32)
    scaled = ScalarField.from_interior(disc32, theta * phi.interior)
    p = disc32.n + 1
    assert energy(scaled) == pytest.approx(theta ** p * energy(phi), rel=1e-12)
    assert mass(scaled) == pytest.approx(theta ** p * mass(phi), rel=1e-12)
    assert rayleigh(scaled) == pytest.approx(rayleigh(phi), rel=1e-12)


def test_zero_field_functionals(disc32):
    zero = ScalarField.from_interior(disc32, np.zeros(disc32.num_interior))
    assert energy(zero) == 0.0
    assert mass(zero) == 0.0
    assert functionals(zero).rayleigh is None
    with pytest.raises(ZeroMass):
        rayleigh(zero)


def test_rejects_positive_trial(disc32):
    r2 = np.sum(disc32.interior_coords ** 2, axis=1)
    up = ScalarField.from_interior(disc32, 1.0 - r2)
    with pytest.raises(PreconditionViolated, match="<= 0"):
        energy(up)


def test_rejects_non_psh_trial(disc32):
    r2 = np.sum(disc32.interior_coords ** 2, axis=1)
    bad = ScalarField.from_interior(disc32, -((1.0 - r2) ** 2))
    with pytest.raises(NotPSH):
        energy(bad)
    with pytest.raises(NotPSH):
        mass(bad)


def test_mass_accepts_density_array(disc32):
    phi = quad_field(disc32)
    ones = np.ones(disc32.num_interior)
    assert mass(phi, ones) == pytest.approx(mass(phi), rel=1e-14)
    with pytest.raises(ValueError, match="per interior node"):
        mass(phi, np.ones(3))


def test_functional_value_invariants():
    with pytest.raises(ValueError):
        FunctionalValue(energy=-1.0, mass=1.0, rayleigh=-1.0)
    with pytest.raises(ValueError):
        FunctionalValue(energy=1.0, mass=1.0, rayleigh=None)
    with pytest.raises(ValueError):
        FunctionalValue(energy=1.0, mass=0.0, rayleigh=2.0)


def test_energy_is_dirichlet_energy_for_one_variable(disc32):
    # For one complex variable E(phi) = 1/4 * integral |grad phi|^2, so a raw
    # finite-difference gradient quadrature must agree up to the O(h)
    # boundary band.
    def grad_quad(v):
        vals = v.values.reshape(disc32.shape)
        total = 0.0
        for ax in range(vals.ndim):
            d = np.diff(vals, axis=ax) / disc32.h
            total += float(np.sum(d * d))
        return 0.25 * total * disc32.h ** vals.ndim

    fields = [quad_field(disc32)]
    for center in ((0.0, 0.0), (0.3, -0.2), (-0.4, 0.1)):
        dens = GaussianBump(center=center, amplitude=2.0, width=0.5)
        u, _ = solve_frozen(
            eval_density(dens, disc32.interior_coords), disc32, 1e-10
        )
        fields.append(u)
    for f in fields:
        assert grad_quad(f) == pytest.approx(energy(f), rel=5e-2)


# ----------------------------------------------------------------- inequalities


def test_sobolev_constant_disc(disc32):
    assert sobolev_constant(grid=disc32) == pytest.approx(4.0, abs=1e-6)


def test_sobolev_disc_example(disc32):
    # (n+1) * mass = 2pi/3 against A * energy = 2pi for the defining quadratic.
    phi = quad_field(disc32)
    assert 2.0 * mass(phi) == pytest.approx(2.0 * math.pi / 3.0, rel=5e-3)
    assert 4.0 * energy(phi) == pytest.approx(2.0 * math.pi, rel=5e-3)
    assert check_sobolev(phi, grid=disc32)


def test_sobolev_random_fields(disc32):
    rng = np.random.default_rng(7)
    A = sobolev_constant(grid=disc32)
    for _ in range(50):
        phi = random_psh_field(disc32, rng)
        assert check_sobolev(phi, A=A, grid=disc32)


def test_sobolev_four_ball(ball4):
    assert check_sobolev(quad_field(ball4), grid=ball4)
    u0, _ = solve_frozen(2.0 * np.ones(ball4.num_interior), ball4, 1e-8)
    assert check_sobolev(u0, grid=ball4)


def test_blocki_disc_example(disc32):
    phi = quad_field(disc32)
    assert check_blocki(phi, phi, grid=disc32)


def test_blocki_zero_fields(disc32):
    zero = ScalarField.from_interior(disc32, np.zeros(disc32.num_interior))
    phi = quad_field(disc32)
    assert check_blocki(zero, phi, grid=disc32)
    assert check_blocki(phi, zero, grid=disc32)


def test_blocki_random_pairs(disc32):
    rng = np.random.default_rng(11)
    for _ in range(50):
        u = random_psh_field(disc32, rng)
        v = random_psh_field(disc32, rng)
        assert check_blocki(u, v, grid=disc32)


def test_blocki_four_ball(ball4):
    phi = quad_field(ball4)
    u0, _ = solve_frozen(np.ones(ball4.num_interior), ball4, 1e-8)
    assert check_blocki(phi, u0, grid=ball4)
    assert check_blocki(u0, phi, grid=ball4)


def test_blocki_rejects_positive_field(disc32):
    phi = quad_field(disc32)
    up = ScalarField.from_interior(disc32, -phi.interior)
    with pytest.raises(PreconditionViolated):
        check_blocki(phi, up, grid=disc32)


def test_rayleigh_bounds_ground_value_from_above(disc32):
    # The quotient estimates lambda1^n from above; allow a 5% discretization
    # slack below the analytic value, never more.
    rng = np.random.default_rng(42)
    floor = 0.95 * LAMBDA1_UNIT_DISC
    values = [rayleigh(random_psh_field(disc32, rng)) for _ in range(100)]
    assert min(values) >= floor


# ---------------------------------------------------------------- inverse_power


@pytest.fixture(scope="module")
def disc_ip(disc32):
    return inverse_power(grid=disc32, tol=1e-8)


def test_inverse_power_disc_eigenvalue(disc_ip):
    rel = abs(disc_ip.lambda1 - LAMBDA1_UNIT_DISC) / LAMBDA1_UNIT_DISC
    assert rel < 2e-2
    assert disc_ip.method == INVERSE_POWER
    assert disc_ip.residual <= disc_ip.residual_tol
    assert disc_ip.rayleigh_value == pytest.approx(
        disc_ip.lambda1 ** disc_ip.eigenfunction.grid.n, rel=1e-12
    )


def test_inverse_power_eigenfunction(disc_ip, disc32):
    v = disc_ip.eigenfunction
    assert v.sup_norm() == pytest.approx(1.0, abs=1e-12)
    r = np.sqrt(np.sum(disc32.interior_coords ** 2, axis=1))
    mode = np.array([disc_eigenmode(x) for x in r])
    assert np.max(np.abs(v.interior - mode)) < 1e-2
    ver = verify_eigenpair(disc_ip, grid=disc32)
    assert ver.ok, [row for row in ver.rows if not row[3]]


def test_inverse_power_rayleigh_is_nonincreasing(disc_ip):
    etas = [p.lam for p in disc_ip.branch]
    assert len(etas) >= 3
    assert all(b <= a + 1e-7 for a, b in zip(etas, etas[1:]))
    assert etas[-1] < etas[0]


def test_inverse_power_warm_start_converges_faster(disc32, disc_ip):
    r = np.sqrt(np.sum(disc32.interior_coords ** 2, axis=1))
    mode = np.array([disc_eigenmode(x) for x in r])
    warm = inverse_power(grid=disc32, tol=1e-8,
                         w0=ScalarField.from_interior(disc32, mode))
    assert len(warm.branch) < len(disc_ip.branch)
    assert warm.lambda1 == pytest.approx(disc_ip.lambda1, abs=1e-9)


def test_inverse_power_radius_two():
    g = build_grid(Ball(1, 2.0), 1.0 / 16)
    res = inverse_power(grid=g, tol=1e-8)
    target = LAMBDA1_UNIT_DISC / 4.0
    assert abs(res.lambda1 - target) / target < 2e-2


def test_inverse_power_four_ball(ball4):
    res = inverse_power(grid=ball4, tol=1e-6)
    assert abs(res.lambda1 - 1.686593625402) / 1.686593625402 < 5e-2


def test_inverse_power_degenerate_start(disc32):
    zero = ScalarField.from_interior(disc32, np.zeros(disc32.num_interior))
    with pytest.raises(DegenerateIterate):
        inverse_power(grid=disc32, w0=zero)


def test_inverse_power_iteration_budget(disc32):
    with pytest.raises(NotConverged):
        inverse_power(grid=disc32, tol=1e-12, max_iters=2)
