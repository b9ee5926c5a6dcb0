"""Discrete complex Hessians and pointwise Monge-Ampere quantities.

The complex Hessian u_{jk} = d^2u / dz_j dz_k-bar is built from real second
differences through

    u_{jk} = 1/4 [ (u_{x_j x_k} + u_{y_j y_k}) + i (u_{x_j y_k} - u_{y_j x_k}) ],

with every second derivative realized as a three-point difference along a
lattice direction: pure derivatives along the axes, mixed derivatives through
the diagonal identity u_ab = 1/4 (D^2_{a+b} - D^2_{a-b}), where D^2_v is the
second difference along the direction e_a +- e_b.  All of these are exact on
quadratics.

Two differencing modes, selected by ScalarField.zero_boundary:

* zero_boundary=True  -- the field represents a candidate solution vanishing
  on the curved boundary; one-sided Shortley-Weller differences place the
  value 0 at the exact crossing of {rho = 0} (fractions from the grid).
* zero_boundary=False -- the field is a sample of an ambient function; plain
  centered differences use the stored values at all lattice neighbours.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .domain import GridDomain, _crossing_fraction
from .errors import NotPositiveSemiDefinite, NotPSH, PreconditionViolated


def default_psh_tol(grid):
    """Tolerance matched to the truncation-error scale of the stencils."""
    return 10.0 * grid.h ** 2


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------


@dataclass
class ScalarField:
    """Real-valued lattice function; values are stored on the full lattice in
    C-order, with Boundary/Exterior nodes holding the Dirichlet value."""

    grid: GridDomain
    values: np.ndarray
    zero_boundary: bool = True

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (int(np.prod(self.grid.shape)),):
            raise ValueError("values must cover the full lattice (flat, C-order)")
        if self.zero_boundary:
            nz = self.values[self.grid.classification != 2]
            if nz.size and np.any(nz != 0.0):
                raise ValueError("zero-boundary fields must vanish off the interior")

    @classmethod
    def from_interior(cls, grid, interior_values):
        vals = np.zeros(int(np.prod(grid.shape)))
        vals[grid.interior_flat] = interior_values
        return cls(grid, vals, zero_boundary=True)

    @classmethod
    def sample(cls, grid, fn):
        """Sample an ambient function on every lattice node (plain differencing)."""
        pts = grid.node_coords(np.arange(int(np.prod(grid.shape))))
        return cls(grid, np.asarray(fn(pts), dtype=float), zero_boundary=False)

    @classmethod
    def zeros(cls, grid):
        return cls.from_interior(grid, np.zeros(grid.num_interior))

    @property
    def interior(self):
        return self.values[self.grid.interior_flat]

    def sup_norm(self):
        return float(np.max(np.abs(self.values)))

    def with_interior(self, interior_values):
        return ScalarField.from_interior(self.grid, interior_values)


@dataclass
class HermitianField:
    """Per-interior-node Hermitian n x n matrix, stored as a real diagonal and
    the strict upper triangle (pairs (j,k) with j < k in lexicographic order),
    so no representable value can break M = M*."""

    grid: GridDomain
    diag: np.ndarray  # (N, n) real
    tri: np.ndarray  # (N, n(n-1)/2) complex, entry m holds M_{j k}, j < k

    def __post_init__(self):
        n = self.grid.n
        N = self.grid.num_interior
        self.diag = np.asarray(self.diag, dtype=float).reshape(N, n)
        self.tri = np.asarray(self.tri, dtype=complex).reshape(N, n * (n - 1) // 2)

    @staticmethod
    def pairs(n):
        return [(j, k) for j in range(n) for k in range(j + 1, n)]

    def matrices(self):
        n = self.grid.n
        N = self.grid.num_interior
        M = np.zeros((N, n, n), dtype=complex)
        for j in range(n):
            M[:, j, j] = self.diag[:, j]
        for m, (j, k) in enumerate(self.pairs(n)):
            M[:, j, k] = self.tri[:, m]
            M[:, k, j] = np.conj(self.tri[:, m])
        return M

    def det(self):
        n = self.grid.n
        if n == 1:
            return self.diag[:, 0].copy()
        if n == 2:
            return self.diag[:, 0] * self.diag[:, 1] - np.abs(self.tri[:, 0]) ** 2
        return np.linalg.det(self.matrices()).real

    def eigenvalues(self):
        """(N, n) real eigenvalues in ascending order."""
        n = self.grid.n
        if n == 1:
            return self.diag.copy()
        if n == 2:
            mean = 0.5 * (self.diag[:, 0] + self.diag[:, 1])
            rad = np.sqrt(
                0.25 * (self.diag[:, 0] - self.diag[:, 1]) ** 2
                + np.abs(self.tri[:, 0]) ** 2
            )
            return np.stack([mean - rad, mean + rad], axis=1)
        return np.linalg.eigvalsh(self.matrices())

    def min_eigenvalue(self):
        return self.eigenvalues()[:, 0]


@dataclass
class DualMatrixSet:
    """Hermitian positive matrices with det >= 1, always containing the identity."""

    matrices: list = field(default_factory=list)

    def __post_init__(self):
        n = None
        cleaned = []
        for a in self.matrices:
            a = np.asarray(a, dtype=complex)
            n = a.shape[0] if n is None else n
            if a.shape != (n, n) or not np.allclose(a, a.conj().T, atol=1e-12):
                raise ValueError("dual matrices must be square Hermitian of equal size")
            w = np.linalg.eigvalsh(a)
            if w[0] <= 0:
                raise ValueError("dual matrices must be positive definite")
            if np.prod(w) < 1.0 - 1e-12:
                raise ValueError("dual matrices must have det >= 1")
            cleaned.append(a)
        if n is None:
            raise ValueError("empty dual set; use DualMatrixSet.sample or pass matrices")
        if not any(np.array_equal(a, np.eye(n)) for a in cleaned):
            cleaned.insert(0, np.eye(n, dtype=complex))
        self.matrices = cleaned

    @property
    def n(self):
        return self.matrices[0].shape[0]

    @classmethod
    def sample(cls, n, count=64, seed=0, spread=1.0):
        """count random unit-determinant Hermitian PD matrices Q diag(d) Q*."""
        rng = np.random.default_rng(seed)
        mats = [np.eye(n, dtype=complex)]
        for _ in range(count):
            z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            q, _ = np.linalg.qr(z)
            d = np.exp(rng.uniform(-spread, spread, size=n))
            d /= np.prod(d) ** (1.0 / n)
            mats.append((q * d) @ q.conj().T)
        return cls(mats)


# ---------------------------------------------------------------------------
# Second-difference operators
# ---------------------------------------------------------------------------


def _direction_thetas(grid, v):
    """(N, 2) crossing fractions along +-v for zero-boundary differencing."""
    key = ("theta", tuple(v))
    if key in grid._cache:
        return grid._cache[key]
    d = 2 * grid.n
    dv = int(np.dot(v, [int(np.prod(grid.shape[a + 1 :])) for a in range(d)]))
    N = grid.num_interior
    theta = np.ones((N, 2))
    vv = np.asarray(v, dtype=float)
    for s, sgn in ((0, 1), (1, -1)):
        nbr = grid.interior_flat + sgn * dv
        cut = np.flatnonzero(grid.interior_pos[nbr] < 0)
        for i in cut:
            theta[i, s] = _crossing_fraction(
                grid.spec, grid.interior_coords[i], sgn * vv, grid.h
            )
    grid._cache[key] = theta
    return theta


def second_difference_matrix(grid, v):
    """Sparse operator for u -> D^2_v u on zero-boundary fields (interior -> interior).

    Rows approximate v^T (D^2 u) v; one-sided fractions place the value 0 at
    the curved boundary, keeping the stencil exact on quadratics vanishing
    there.
    """
    key = ("sw", tuple(v))
    if key in grid._cache:
        return grid._cache[key]
    d = 2 * grid.n
    strides = [int(np.prod(grid.shape[a + 1 :])) for a in range(d)]
    dv = int(np.dot(v, strides))
    N = grid.num_interior
    if all(abs(c) in (0, 1) for c in v) and sum(abs(c) for c in v) == 1:
        a = int(np.flatnonzero(v)[0])
        theta = grid.theta_axis[:, a, :] if v[a] > 0 else grid.theta_axis[:, a, ::-1]
    else:
        theta = _direction_thetas(grid, v)
    tp, tm = theta[:, 0], theta[:, 1]
    pos_p = grid.interior_pos[grid.interior_flat + dv]
    pos_m = grid.interior_pos[grid.interior_flat - dv]
    inv_h2 = 1.0 / grid.h ** 2
    rows = [np.arange(N)]
    cols = [np.arange(N)]
    data = [-2.0 * inv_h2 / (tp * tm)]
    keep_p = pos_p >= 0
    rows.append(np.flatnonzero(keep_p))
    cols.append(pos_p[keep_p])
    data.append((2.0 * inv_h2 / (tp * (tp + tm)))[keep_p])
    keep_m = pos_m >= 0
    rows.append(np.flatnonzero(keep_m))
    cols.append(pos_m[keep_m])
    data.append((2.0 * inv_h2 / (tm * (tp + tm)))[keep_m])
    mat = sparse.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(N, N),
    )
    grid._cache[key] = mat
    return mat


def _second_difference_values(u, v):
    """D^2_v u at interior nodes for either differencing mode."""
    grid = u.grid
    if u.zero_boundary:
        return second_difference_matrix(grid, v) @ u.values[grid.interior_flat]
    d = 2 * grid.n
    strides = [int(np.prod(grid.shape[a + 1 :])) for a in range(d)]
    dv = int(np.dot(v, strides))
    f = u.values
    i = grid.interior_flat
    return (f[i + dv] - 2.0 * f[i] + f[i - dv]) / grid.h ** 2


def _axis_vec(d, a, b=None, sign=1):
    v = [0] * d
    v[a] = 1
    if b is not None:
        v[b] = sign
    return tuple(v)


def laplacian_matrix(grid):
    """Sum of the axis second-difference operators (zero-boundary mode)."""
    key = ("laplacian",)
    if key not in grid._cache:
        d = 2 * grid.n
        L = second_difference_matrix(grid, _axis_vec(d, 0))
        for a in range(1, d):
            L = L + second_difference_matrix(grid, _axis_vec(d, a))
        grid._cache[key] = L.tocsr()
    return grid._cache[key]


# ---------------------------------------------------------------------------
# Complex Hessian and derived quantities
# ---------------------------------------------------------------------------


def complex_hessian(u):
    grid = u.grid
    n = grid.n
    d = 2 * n
    diag = np.empty((grid.num_interior, n))
    pure = [_second_difference_values(u, _axis_vec(d, a)) for a in range(d)]
    for j in range(n):
        diag[:, j] = 0.25 * (pure[2 * j] + pure[2 * j + 1])
    pairs = HermitianField.pairs(n)
    tri = np.zeros((grid.num_interior, len(pairs)), dtype=complex)

    def mixed(a, b):
        plus = _second_difference_values(u, _axis_vec(d, a, b, +1))
        minus = _second_difference_values(u, _axis_vec(d, a, b, -1))
        return 0.25 * (plus - minus)

    for m, (j, k) in enumerate(pairs):
        re = mixed(2 * j, 2 * k) + mixed(2 * j + 1, 2 * k + 1)
        im = mixed(2 * j, 2 * k + 1) - mixed(2 * j + 1, 2 * k)
        tri[:, m] = 0.25 * (re + 1j * im)
    return HermitianField(grid, diag, tri)


def ma_det(u):
    """Pointwise determinant of the complex Hessian (1/4 Laplacian when n=1)."""
    return ScalarField.from_interior(u.grid, complex_hessian(u).det())


@dataclass
class PshReport:
    ok: bool
    min_eigenvalue: float
    node_flat: int
    coords: tuple


def is_psh(u, tol=None):
    """Whether the smallest Hessian eigenvalue is >= -tol everywhere."""
    if tol is None:
        tol = default_psh_tol(u.grid)
    lam = complex_hessian(u).min_eigenvalue()
    worst = int(np.argmin(lam))
    flat = int(u.grid.interior_flat[worst])
    report = PshReport(
        ok=bool(lam[worst] >= -tol),
        min_eigenvalue=float(lam[worst]),
        node_flat=flat,
        coords=tuple(u.grid.interior_coords[worst]),
    )
    return report.ok, report


def require_psh(u, tol=None, name="field"):
    """Raise NotPSH unless u is PSH within tol; returns the PshReport."""
    ok, report = is_psh(u, tol)
    if not ok:
        raise NotPSH(
            f"{name} is not PSH: smallest Hessian eigenvalue "
            f"{report.min_eigenvalue:.3e} at node {report.coords}"
        )
    return report


def gaveau_value(M, duals, tol=1e-10):
    """min over the dual set of (1/n) tr(a M); >= det(M)^{1/n} for PSD M.

    The analytic minimizer det(M)^{1/n} M^{-1} is appended automatically when
    M is nonsingular, which makes the bound an equality.
    """
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    w = np.linalg.eigvalsh(0.5 * (M + M.conj().T))
    if w[0] < -tol:
        raise NotPositiveSemiDefinite(
            f"matrix has eigenvalue {w[0]:.3e} < -{tol:.1e}"
        )
    candidates = list(duals.matrices)
    scale = max(1.0, float(w[-1]))
    if w[0] > 1e-13 * scale:
        det_root = float(np.prod(np.maximum(w, 0.0))) ** (1.0 / n)
        candidates.append(det_root * np.linalg.inv(M))
    return min(float(np.trace(a @ M).real) / n for a in candidates)


def apply_La(a, u):
    """(1/n) sum_jk a_jk u_jk: the linear operator of the dual representation
    (1/4 Laplacian when a = I and n = 1)."""
    a = np.asarray(a, dtype=complex)
    M = complex_hessian(u).matrices()
    vals = np.einsum("jk,xkj->x", a, M).real / u.grid.n
    return ScalarField.from_interior(u.grid, vals)


def check_comparison(u, v, tol):
    """Discrete comparison predicate: with ma_det(u) <= ma_det(v) and u >= v on
    the boundary layer (both PSH), test u >= v - tol (1 + ||v||) inside."""
    for name, w in (("u", u), ("v", v)):
        ok, rep = is_psh(w, tol)
        if not ok:
            raise PreconditionViolated(
                f"{name} is not PSH within {tol}: eigenvalue {rep.min_eigenvalue:.3e} "
                f"at node {rep.coords}"
            )
    du = complex_hessian(u).det()
    dv = complex_hessian(v).det()
    gap = du - dv
    worst = int(np.argmax(gap))
    if gap[worst] > tol:
        raise PreconditionViolated(
            f"ma_det(u) exceeds ma_det(v) by {gap[worst]:.3e} at node "
            f"{tuple(u.grid.interior_coords[worst])}"
        )
    layer = u.grid.boundary_flat
    bgap = v.values[layer] - u.values[layer]
    if bgap.size and np.max(bgap) > tol:
        worst_b = int(np.argmax(bgap))
        raise PreconditionViolated(
            f"u < v - {tol} on the boundary layer at node "
            f"{u.grid.unravel(layer[worst_b])}"
        )
    slack = tol * (1.0 + v.sup_norm())
    ui = u.values[u.grid.interior_flat]
    vi = v.values[v.grid.interior_flat]
    return bool(np.all(ui >= vi - slack))


# ---------------------------------------------------------------------------
# Random PSH test fields (n = 1)
# ---------------------------------------------------------------------------


def random_psh_field(grid, rng, scale=1.0):
    """Random discretely-PSH zero-boundary field on a one-dimensional domain.

    Takes the max of a scaled copy of the domain's defining quadratic with a
    few random PSH quadratics, each shifted to lie strictly below that copy on
    the cut layer.  Because every one-sided row then sees the defining
    quadratic (which vanishes at the crossings) and max preserves discrete
    subharmonicity at rows with nonnegative off-center coefficients, the
    result is PSH at tolerance 0.
    """
    if grid.n != 1:
        raise ValueError("random quadratic-max fields are one-dimensional only")
    from .domain import quadratic_defining, eval_quadratic

    w0, c0, off0 = quadratic_defining(grid.spec)
    base = float(rng.uniform(0.5, 2.0)) * scale * eval_quadratic(
        w0, c0, off0, grid.interior_coords
    )
    layer = np.flatnonzero((grid.nbr_ipos < 0).any(axis=(1, 2)))
    fields = [base]
    for _ in range(int(rng.integers(2, 5))):
        p = rng.uniform(-0.4, 0.4, size=2)
        wq = float(rng.uniform(0.0, 2.0)) * scale
        alpha = rng.normal(scale=0.3 * scale) + 1j * rng.normal(scale=0.3 * scale)
        x = grid.interior_coords[:, 0] - p[0]
        y = grid.interior_coords[:, 1] - p[1]
        z2 = (x + 1j * y) ** 2
        q = wq * (x ** 2 + y ** 2) + (alpha * z2).real + rng.normal(scale=0.2) * x
        shift = np.max(q[layer] - base[layer]) if layer.size else np.max(q)
        q -= shift + 1e-3 * scale
        fields.append(q)
    return ScalarField.from_interior(grid, np.max(np.stack(fields), axis=0))
