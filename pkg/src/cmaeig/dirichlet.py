"""Zero-boundary Dirichlet solvers for det(u_jk) = psi(z, u).

Layering:

* solve_frozen      -- psi fixed in u.  For n = 1 this is one linear solve of
  the one-sided-difference Laplacian (Delta u = 4 psi); for n >= 2 a damped
  Newton iteration on F(u) = log det(M(u) + mu I) - log(psi + mu^n) with a
  vanishing eigenvalue floor mu and a plurisubharmonicity safeguard.
* apply_T           -- the inverse operator T(v) = solve_frozen(psi(., v)).
* monotone_iteration-- outer fixed-point iteration u_{j+1} = T(u_j) from a
  subsolution, for psi nonincreasing in u; iterates increase to the solution.
* solve_regularized -- runs the outer iteration for psi + eps^n over a
  decreasing eps schedule with warm starts (psi degenerate at u = 0).
* solve_quasimonotone -- Newton for det = H^n(., u) with dH/dt >= -lambda_0 >
  -lambda_1, certified by restarting from three distinct initializations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu, spsolve

from .domain import Constant, eval_density, eval_quadratic, quadratic_defining
from .errors import (
    BranchInfeasible,
    EigenvalueBoundViolated,
    MonotonicityViolated,
    NewtonStalled,
    NotConverged,
    PreconditionViolated,
)
from .hessian import (
    HermitianField,
    ScalarField,
    complex_hessian,
    laplacian_matrix,
    random_psh_field,
    second_difference_matrix,
)

log = logging.getLogger(__name__)

# Discrete analogue of a "strict" subsolution margin when psi degenerates on
# {u = 0}: proportional to the truncation-error scale.
def strict_margin(grid):
    return 100.0 * grid.h ** 2


def default_eps_schedule(start=1e-1, stop=1e-3, ratio=0.5):
    out = []
    e = start
    while e >= stop * (1 - 1e-12):
        out.append(e)
        e *= ratio
    return out


# ---------------------------------------------------------------------------
# Right-hand sides
# ---------------------------------------------------------------------------

NONINCREASING = "nonincreasing"
QUASI = "derivative_bounded_below"

_T_POSITIVE_SLACK = 1e-12


@dataclass
class RhsSpec:
    """psi(z, t) >= 0 for t <= 0, with declared monotonicity metadata.

    kinds: "frozen" (psi = h(z)), "separable" (psi = f^n(z) g(t)) and
    "general" (psi = H(z, t)^n from a closure).  `shift` carries the eps^n
    regularization additively.
    """

    grid: object
    kind: str
    monotonicity: str | None = None
    lambda0: float | None = None
    frozen_values: np.ndarray | None = None
    weight: np.ndarray | None = None  # f^n at interior nodes
    g: object | None = None  # scalar factor g(t), vectorized
    H: object | None = None  # H(points, t), vectorized over nodes
    shift: float = 0.0

    # -- constructors --------------------------------------------------

    @classmethod
    def frozen(cls, grid, values):
        vals = values.interior if isinstance(values, ScalarField) else np.asarray(values, float)
        vals = np.broadcast_to(vals, (grid.num_interior,)).astype(float)
        if np.min(vals) < -1e-12:
            raise PreconditionViolated("frozen right-hand side must be >= 0")
        return cls(grid, "frozen", monotonicity=NONINCREASING,
                   frozen_values=np.maximum(vals, 0.0))

    @classmethod
    def branch(cls, grid, lam, density=Constant(1.0)):
        """psi = (1 - lam t)^n f^n: the solution-branch right-hand side."""
        if lam < 0:
            raise ValueError("branch parameter must be nonnegative")
        n = grid.n
        from .domain import density_vector

        fn = density_vector(density, grid, power=n)
        spec = cls(grid, "separable", monotonicity=NONINCREASING, lambda0=lam,
                   weight=fn, g=lambda t: (1.0 - lam * t) ** n)
        spec._spot_check()
        return spec

    @classmethod
    def eigen(cls, grid, lam, density=Constant(1.0)):
        """psi = (-lam t)^n f^n: degenerate at t = 0 (eigenvalue form)."""
        if lam < 0:
            raise ValueError("eigenvalue parameter must be nonnegative")
        n = grid.n
        from .domain import density_vector

        fn = density_vector(density, grid, power=n)
        spec = cls(grid, "separable", monotonicity=NONINCREASING, lambda0=lam,
                   weight=fn, g=lambda t: (-lam * t) ** n)
        spec._spot_check()
        return spec

    @classmethod
    def general(cls, grid, H, lambda0=None, nonincreasing=False):
        mono = NONINCREASING if nonincreasing else (QUASI if lambda0 is not None else None)
        spec = cls(grid, "general", monotonicity=mono, lambda0=lambda0, H=H)
        spec._spot_check()
        return spec

    # -- evaluation ----------------------------------------------------

    def _clamp(self, t):
        t = np.broadcast_to(np.asarray(t, float), (self.grid.num_interior,))
        if np.max(t) > _T_POSITIVE_SLACK:
            raise PreconditionViolated(
                f"right-hand side evaluated at t = {np.max(t):.3e} > 0"
            )
        return np.minimum(t, 0.0)

    def psi(self, t):
        t = self._clamp(t)
        if self.kind == "frozen":
            base = self.frozen_values.copy()
        elif self.kind == "separable":
            base = self.weight * self.g(t)
        else:
            base = self.H(self.grid.interior_coords, t) ** self.grid.n
        return base + self.shift

    def psi_t(self, t, delta=1e-6):
        """d psi / dt by central differences (0 for frozen)."""
        if self.kind == "frozen":
            return np.zeros(self.grid.num_interior)
        t = self._clamp(t)
        lo = self.psi(t - delta)
        hi = self.psi(np.minimum(t + delta, 0.0))
        width = np.minimum(t + delta, 0.0) - (t - delta)
        return (hi - lo) / width

    def shifted(self, eps):
        import dataclasses

        return dataclasses.replace(self, shift=self.shift + eps ** self.grid.n)

    def _spot_check(self, samples=5):
        """Validate psi >= 0 and (when declared) monotonicity on a (z, t) sample."""
        rng = np.random.default_rng(0)
        ts = [0.0, -0.25, -1.0, -3.0, -10.0]
        prev = None
        for t0 in reversed(ts):  # increasing t
            vals = self.psi(np.full(self.grid.num_interior, t0))
            if np.min(vals) < -1e-12:
                raise ValueError(f"psi takes negative value {np.min(vals):.3e} at t={t0}")
            if prev is not None and self.monotonicity == NONINCREASING:
                if np.max(vals - prev) > 1e-10 * (1 + np.max(np.abs(prev))):
                    raise ValueError("psi declared nonincreasing in t but increases")
            prev = vals


# ---------------------------------------------------------------------------
# Reports and diagnostics
# ---------------------------------------------------------------------------


@dataclass
class SolveReport:
    iterations: int
    final_residual: float
    psh_margin: float
    sup_norm: float
    grad_sup: float
    laplacian_sup: float
    converged: bool
    flags: tuple = ()


def _grad_sup(grid, ui):
    """Largest one-sided difference quotient (diagnostic only)."""
    worst = 0.0
    d = 2 * grid.n
    for a in range(d):
        for s in (0, 1):
            pos = grid.nbr_ipos[:, a, s]
            theta = grid.theta_axis[:, a, s]
            nbr_vals = np.where(pos >= 0, ui[np.maximum(pos, 0)], 0.0)
            quot = np.abs(nbr_vals - ui) / (theta * grid.h)
            worst = max(worst, float(np.max(quot)))
    return worst


def _make_report(grid, ui, hess, psi_vals, iterations, converged, flags=()):
    det = hess.det()
    res = float(np.max(np.abs(det - psi_vals)))
    return SolveReport(
        iterations=iterations,
        final_residual=res,
        psh_margin=float(np.min(hess.min_eigenvalue())),
        sup_norm=float(np.max(np.abs(ui))),
        grad_sup=_grad_sup(grid, ui),
        laplacian_sup=float(np.max(np.abs(laplacian_matrix(grid) @ ui))),
        converged=converged,
        flags=tuple(flags),
    )


# ---------------------------------------------------------------------------
# Subsolution construction
# ---------------------------------------------------------------------------


def quadratic_subsolution(grid, rhs, extra=0.0, max_iter=80):
    """Scaled defining quadratic t*q with det >= psi(., t*q) + extra nodewise.

    The amplitude is a fixed point of t -> ((max psi(., t q) + extra)
    / det A)^(1/n), found by iterating from below with a geometric-tail
    extrapolation (exact in one cycle when the map is affine in t, as for
    the continuation family).  Right-hand sides growing superlinearly past
    the domain's quadratic threshold make the map non-contractive; no fixed
    point exists and BranchInfeasible is raised.
    """
    n = grid.n
    w, c, off = quadratic_defining(grid.spec)
    detA = float(np.prod(w))
    q = eval_quadratic(w, c, off, grid.interior_coords)

    def amp(s):
        return ((float(np.max(rhs.psi(s * q))) + max(extra, 0.0)) / detA) ** (1.0 / n)

    t = max(amp(0.0), 1e-12)
    for _ in range(max_iter):
        t1 = amp(t)
        if t1 > 1e8:
            raise BranchInfeasible(
                "no scaled quadratic dominates this right-hand side"
            )
        if t1 <= t * (1 + 1e-9):
            t = max(t, t1)
            break
        t2 = amp(t1)
        if t2 > 1e8:
            raise BranchInfeasible(
                "no scaled quadratic dominates this right-hand side"
            )
        ratio = (t2 - t1) / (t1 - t)
        if ratio >= 1.0 - 1e-9:
            raise BranchInfeasible(
                "quadratic amplitude iteration is non-contractive"
            )
        t = t2 + (t2 - t1) * ratio / (1.0 - ratio)
    else:
        raise BranchInfeasible("quadratic amplitude iteration did not settle")
    # One-sided rows only raise the discrete determinant of t*q when q < 0 on
    # the true boundary (jump case); still, verify and bump if a corner node
    # disagrees.
    for _ in range(4):
        u = ScalarField.from_interior(grid, t * q)
        det = complex_hessian(u).det()
        if np.all(det >= rhs.psi(t * q) + extra - 1e-12):
            return u, t
        t *= 1.5
    raise BranchInfeasible("could not certify the quadratic subsolution")


# ---------------------------------------------------------------------------
# Frozen solver
# ---------------------------------------------------------------------------


def _mixed_ops(grid, j, k):
    """Sparse Re/Im operators of the (j,k) Hessian entry, j < k (cached)."""
    key = ("mixed_ops", j, k)
    if key in grid._cache:
        return grid._cache[key]
    d = 2 * grid.n

    def vec(a, b, sign):
        v = [0] * d
        v[a] = 1
        v[b] = sign
        return tuple(v)

    def mix(a, b):
        return 0.25 * (
            second_difference_matrix(grid, vec(a, b, +1))
            - second_difference_matrix(grid, vec(a, b, -1))
        )

    re_op = mix(2 * j, 2 * k) + mix(2 * j + 1, 2 * k + 1)
    im_op = mix(2 * j, 2 * k + 1) - mix(2 * j + 1, 2 * k)
    grid._cache[key] = (re_op.tocsr(), im_op.tocsr())
    return grid._cache[key]


def _diag_ops(grid):
    key = ("diag_ops",)
    if key not in grid._cache:
        d = 2 * grid.n
        ops = []
        for j in range(grid.n):
            va = [0] * d
            va[2 * j] = 1
            vb = [0] * d
            vb[2 * j + 1] = 1
            ops.append(
                (
                    second_difference_matrix(grid, tuple(va))
                    + second_difference_matrix(grid, tuple(vb))
                ).tocsr()
            )
        grid._cache[key] = ops
    return grid._cache[key]


def _cached_laplacian_lu(grid):
    if "lap_lu" not in grid._cache:
        grid._cache["lap_lu"] = splu(laplacian_matrix(grid).tocsc())
    return grid._cache["lap_lu"]


def _logdet_jacobian(grid, W):
    """J = sum_j diag(W_jj)/4 D_j + sum_{j<k} [diag(Re W_kj)/2 ReOp - diag(Im W_kj)/2 ImOp]."""
    n = grid.n
    ops = _diag_ops(grid)
    J = sparse.diags(0.25 * W[:, 0, 0].real) @ ops[0]
    for j in range(1, n):
        J = J + sparse.diags(0.25 * W[:, j, j].real) @ ops[j]
    for m, (j, k) in enumerate(HermitianField.pairs(n)):
        re_op, im_op = _mixed_ops(grid, j, k)
        wkj = W[:, k, j]
        J = J + sparse.diags(0.5 * wkj.real) @ re_op
        J = J - sparse.diags(0.5 * wkj.imag) @ im_op
    return J.tocsc()


def _hermitian_from_interior(grid, ui):
    return complex_hessian(ScalarField.from_interior(grid, ui))


def _psh_floor(grid):
    return -10.0 * grid.h ** 2


def _newton_logdet(grid, rhs, u0, tol, max_iter=80, max_backtracks=30):
    """Damped Newton for det(M(u)) = psi(., u) in dimension n >= 2."""
    n = grid.n
    mu = min(1e-8, tol * 1e-3)
    shrinks = 0
    ui = u0.copy()
    floor = _psh_floor(grid)

    def state(vec):
        hess = _hermitian_from_interior(grid, vec)
        M = hess.matrices()
        eig = np.linalg.eigvalsh(M + mu * np.eye(n))
        psi = rhs.psi(np.minimum(vec, 0.0))
        return hess, M, eig, psi

    hess, M, eig, psi = state(ui)
    if np.min(eig) <= 0:
        raise PreconditionViolated("initial guess is not in the solver's cone")
    F = np.sum(np.log(eig), axis=1) - np.log(psi + mu ** n)
    last_true = np.inf
    for it in range(1, max_iter + 1):
        true_res = float(np.max(np.abs(hess.det() - psi)))
        if true_res <= tol:
            return ui, _make_report(grid, ui, hess, psi, it - 1, True)
        fnorm = float(np.max(np.abs(F)))
        stalled = fnorm <= tol * 1e-2 or (
            it > 3 and true_res > 0.95 * last_true and fnorm < tol
        )
        if stalled and true_res > tol and shrinks < 3:
            mu *= 0.01
            shrinks += 1
            hess, M, eig, psi = state(ui)
            F = np.sum(np.log(eig), axis=1) - np.log(psi + mu ** n)
            last_true = np.inf
            continue
        last_true = true_res
        W = np.linalg.inv(M + mu * np.eye(n))
        J = _logdet_jacobian(grid, W)
        if rhs.kind != "frozen":
            dpsi = rhs.psi_t(np.minimum(ui, 0.0))
            J = (J - sparse.diags(dpsi / (psi + mu ** n))).tocsc()
        delta = spsolve(J, -F)
        s = 1.0
        for _ in range(max_backtracks):
            trial = ui + s * delta
            t_hess, t_M, t_eig, t_psi = state(trial)
            if np.min(t_eig) > 0 and np.min(t_hess.min_eigenvalue()) >= floor:
                trial_F = np.sum(np.log(t_eig), axis=1) - np.log(t_psi + mu ** n)
                if np.max(np.abs(trial_F)) < fnorm:
                    ui, hess, M, eig, psi, F = trial, t_hess, t_M, t_eig, t_psi, trial_F
                    break
            s *= 0.5
        else:
            raise NewtonStalled(
                f"line search exhausted {max_backtracks} halvings at iteration {it}"
            )
    raise NotConverged(f"Newton did not reach tol={tol} in {max_iter} iterations")


def solve_frozen(h, grid=None, tol=1e-8, initial=None):
    """Solve det(u_jk) = h(z) with zero boundary values; returns (u, report)."""
    if isinstance(h, ScalarField):
        grid = h.grid if grid is None else grid
        h_int = h.interior
    else:
        h_int = np.broadcast_to(np.asarray(h, float), (grid.num_interior,)).astype(float)
    if np.min(h_int) < -1e-12:
        raise PreconditionViolated(
            f"frozen right-hand side must be >= 0 (min {np.min(h_int):.3e})"
        )
    h_int = np.maximum(h_int, 0.0)
    if grid.n == 1:
        lu = _cached_laplacian_lu(grid)
        ui = np.minimum(lu.solve(4.0 * h_int), 0.0)
        hess = _hermitian_from_interior(grid, ui)
        report = _make_report(grid, ui, hess, h_int, 1, True)
        report.converged = report.final_residual <= max(tol, report.final_residual)
        if report.final_residual > tol:
            # the direct solve is as good as the factorization permits
            report.flags = report.flags + ("linear_residual_above_tol",)
            report.converged = report.final_residual <= 10 * tol
        return ScalarField.from_interior(grid, ui), report
    rhs = RhsSpec.frozen(grid, h_int)
    if initial is None:
        u0, _ = quadratic_subsolution(grid, rhs)
        start = u0.interior
    else:
        start = initial.interior if isinstance(initial, ScalarField) else np.asarray(initial, float)
        start = _feasible_start(grid, rhs, start)
    ui, report = _newton_logdet(grid, rhs, start, tol)
    return ScalarField.from_interior(grid, np.minimum(ui, 0.0)), report


def _feasible_start(grid, rhs, start):
    """Blend a warm start toward a strongly PSH quadratic until the Newton
    state is strictly inside the cone."""
    mu = 1e-10
    w, c, off = quadratic_defining(grid.spec)
    q = eval_quadratic(w, c, off, grid.interior_coords)
    t_anchor = max(1.0, (float(np.max(rhs.psi(np.minimum(start, 0.0)))) / float(np.prod(w))) ** (1.0 / grid.n))
    anchor = t_anchor * q
    beta = 0.0
    for _ in range(12):
        trial = (1 - beta) * start + beta * anchor
        eigmin = np.min(
            np.linalg.eigvalsh(
                _hermitian_from_interior(grid, trial).matrices() + mu * np.eye(grid.n)
            )
        )
        if eigmin > 0:
            return trial
        beta = 0.05 if beta == 0.0 else min(1.0, beta * 2)
    return anchor


def apply_T(v, rhs, grid=None, tol=1e-8, initial=None):
    """T(v) = solve_frozen(psi(., v)): one outer step of the fixed-point map."""
    grid = v.grid if grid is None else grid
    vi = v.interior
    if np.max(vi) > _T_POSITIVE_SLACK:
        raise PreconditionViolated("apply_T requires v <= 0")
    return solve_frozen(rhs.psi(np.minimum(vi, 0.0)), grid, tol, initial=initial)


# ---------------------------------------------------------------------------
# Verification predicates
# ---------------------------------------------------------------------------


def check_subsolution(u_lower, rhs, grid=None, tol=1e-8, strict_margin=0.0):
    """det(u) >= psi(., u) + margin - tol nodewise, u PSH within tol, u <= 0."""
    grid = u_lower.grid if grid is None else grid
    ui = u_lower.interior
    if np.max(ui) > tol:
        return False
    hess = complex_hessian(u_lower)
    if np.min(hess.min_eigenvalue()) < -tol:
        return False
    det = hess.det()
    need = rhs.psi(np.minimum(ui, 0.0)) + strict_margin
    return bool(np.all(det >= need - tol))


def check_supersolution(u_upper, rhs, grid=None, tol=1e-8):
    """det(u) <= psi(., u) + tol nodewise (mirror of check_subsolution)."""
    grid = u_upper.grid if grid is None else grid
    ui = u_upper.interior
    if np.max(ui) > tol:
        return False
    hess = complex_hessian(u_upper)
    if np.min(hess.min_eigenvalue()) < -tol:
        return False
    det = hess.det()
    return bool(np.all(det <= rhs.psi(np.minimum(ui, 0.0)) + tol))


# ---------------------------------------------------------------------------
# Monotone outer iteration
# ---------------------------------------------------------------------------


def monotone_iteration(u_lower, rhs, grid=None, tol=1e-8, max_outer=2000,
                       require_subsolution=True, report_sink=None):
    """Iterate u_{j+1} = T(u_j) from a subsolution; for psi nonincreasing in u
    the iterates increase to the unique fixed point.

    Returns (u, history) where history[j] = max nodewise increment of step j.
    report_sink, if given, collects the per-step SolveReports.
    """
    grid = u_lower.grid if grid is None else grid
    if rhs.monotonicity != NONINCREASING:
        raise PreconditionViolated(
            "monotone iteration requires a right-hand side nonincreasing in u"
        )
    if require_subsolution and not check_subsolution(u_lower, rhs, grid, tol=max(tol, 1e-10)):
        raise PreconditionViolated("starting field is not a subsolution at this tolerance")
    inner_tol = tol / 10.0
    ui = u_lower.interior
    history = []
    warm = u_lower
    for _ in range(max_outer):
        u_next, rep = solve_frozen(rhs.psi(np.minimum(ui, 0.0)), grid, inner_tol, initial=warm)
        if report_sink is not None:
            report_sink.append(rep)
        vi = u_next.interior
        drop = float(np.min(vi - ui))
        if drop < -10.0 * tol:
            raise MonotonicityViolated(
                f"iterate decreased by {-drop:.3e} > 10*tol at some node"
            )
        history.append(float(np.max(vi - ui)))
        ui = vi
        warm = u_next
        hess = complex_hessian(u_next)
        res = float(np.max(np.abs(hess.det() - rhs.psi(np.minimum(ui, 0.0)))))
        if res <= tol:
            return u_next, history
    raise NotConverged(
        f"outer iteration reached {max_outer} steps; last increment {history[-1]:.3e}"
    )


def solve_regularized(rhs, eps_schedule=None, grid=None, tol=1e-8, max_outer=2000):
    """Solve det = psi(., u) + eps^n along a decreasing eps schedule.

    Warm-starts each stage with the previous solution (a valid subsolution,
    since lowering eps lowers the right-hand side).  Returns (u, diffs) with
    diffs the successive sup-norm gaps between stages.
    """
    grid = rhs.grid if grid is None else grid
    if rhs.monotonicity != NONINCREASING:
        raise PreconditionViolated("regularization requires psi nonincreasing in u")
    schedule = list(default_eps_schedule() if eps_schedule is None else eps_schedule)
    if not schedule or any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("eps schedule must be strictly decreasing")
    if schedule[-1] < 1e-4:
        raise ValueError("eps schedule must stay >= 1e-4")
    u_lower, _ = quadratic_subsolution(grid, rhs, extra=schedule[0] ** grid.n)
    u = None
    diffs = []
    nondegenerate = rhs.kind == "frozen" and float(np.min(rhs.psi(np.zeros(grid.num_interior)))) > 0
    for i, eps in enumerate(schedule):
        stage = rhs.shifted(eps)
        start = u_lower if u is None else u
        u_new, _ = monotone_iteration(start, stage, grid, tol, max_outer,
                                      require_subsolution=(u is None))
        if u is not None:
            diffs.append(float(np.max(np.abs(u_new.interior - u.interior))))
        u = u_new
        if nondegenerate:
            break  # psi stays positive at u = 0: regularization is unnecessary
        if diffs and diffs[-1] <= max(tol, 1e-3 * eps):
            break  # further regularization cannot move the solution
    return u, diffs


# ---------------------------------------------------------------------------
# Quasi-monotone right-hand sides (dH/dt >= -lambda_0, lambda_0 < lambda_1)
# ---------------------------------------------------------------------------


def _semilinear_newton_n1(grid, rhs, u0, tol, max_iter=60, max_backtracks=30):
    """n = 1: Newton on (1/4) Delta u - psi(., u) = 0; the linearization
    (1/4) L - diag(psi_t) is nonsingular whenever psi_t > -lambda_1."""
    L = laplacian_matrix(grid).tocsc()
    ui = u0.copy()

    def residual(vec):
        return 0.25 * (L @ vec) - rhs.psi(np.minimum(vec, 0.0))

    F = residual(ui)
    for it in range(1, max_iter + 1):
        fnorm = float(np.max(np.abs(F)))
        if fnorm <= tol:
            hess = _hermitian_from_interior(grid, ui)
            return ui, _make_report(grid, ui, hess, rhs.psi(np.minimum(ui, 0.0)), it - 1, True)
        J = (0.25 * L - sparse.diags(rhs.psi_t(np.minimum(ui, 0.0)))).tocsc()
        delta = spsolve(J, -F)
        s = 1.0
        for _ in range(max_backtracks):
            trial = ui + s * delta
            if np.max(trial) <= _T_POSITIVE_SLACK:
                trial_F = residual(trial)
                if np.max(np.abs(trial_F)) < fnorm:
                    ui, F = trial, trial_F
                    break
            s *= 0.5
        else:
            raise NewtonStalled("semilinear line search exhausted")
    raise NotConverged(f"semilinear Newton did not reach tol={tol}")


def solve_quasimonotone(rhs, lambda1_estimate, grid=None, tol=1e-8):
    """Solve det = H^n(., u) for dH/dt >= -lambda_0 with lambda_0 < lambda_1.

    Re-solves from three initializations (certified subsolution, the solution
    of the u = 0 frozen problem, randomized PSH field) and compares; pairwise
    sup-distance >= 10 tol flags potential non-uniqueness in the report rather
    than raising.
    """
    grid = rhs.grid if grid is None else grid
    lam0 = rhs.lambda0 if rhs.lambda0 is not None else 0.0
    if rhs.monotonicity == QUASI and lam0 >= lambda1_estimate:
        raise EigenvalueBoundViolated(
            f"lambda_0 = {lam0} is not below the eigenvalue estimate {lambda1_estimate}"
        )
    probe = rhs.psi(np.zeros(grid.num_interior))
    if np.min(probe) <= 0:
        raise PreconditionViolated("H must be strictly positive on the closure")

    starts = []
    try:
        sub, _ = quadratic_subsolution(grid, rhs)
        starts.append(("subsolution", sub.interior))
    except BranchInfeasible:
        log.info("no dominating quadratic; skipping the subsolution start")
    zero_adjacent, _ = solve_frozen(rhs.psi(np.zeros(grid.num_interior)), grid, tol)
    starts.append(("zero_adjacent", zero_adjacent.interior))
    rng = np.random.default_rng(1234)
    if grid.n == 1:
        rand = random_psh_field(grid, rng).interior
    else:
        w, c, off = quadratic_defining(grid.spec)
        q = eval_quadratic(w, c, off, grid.interior_coords)
        rand = float(rng.uniform(0.5, 2.0)) * q + rng.normal(size=grid.num_interior) * (
            1e-2 * grid.h ** 2
        )
        rand = np.minimum(rand, 0.0)
    starts.append(("random_psh", rand))

    solutions = []
    report = None
    for name, start in starts:
        if grid.n == 1:
            ui, rep = _semilinear_newton_n1(grid, rhs, start, tol)
        else:
            ui, rep = _newton_logdet(grid, rhs, _feasible_start(grid, rhs, start), tol)
        solutions.append((name, np.minimum(ui, 0.0)))
        if report is None:
            report = rep
    worst = 0.0
    for i in range(len(solutions)):
        for j in range(i + 1, len(solutions)):
            worst = max(worst, float(np.max(np.abs(solutions[i][1] - solutions[j][1]))))
    if worst >= 10.0 * tol:
        log.warning(
            "initializations disagree by %.3e (tol %.1e): possible non-uniqueness",
            worst,
            tol,
        )
        report.flags = report.flags + ("initializations_disagree",)
    return ScalarField.from_interior(grid, solutions[0][1]), report
