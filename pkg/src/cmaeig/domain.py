"""Domains, densities, and uniform Cartesian grids over R^{2n}.

A bounded strongly pseudoconvex domain Omega in C^n is represented by a
defining function rho (rho < 0 inside, 0 on the boundary).  A grid couples a
uniform lattice of spacing h to the domain: nodes are classified Interior
(rho < 0), Boundary (non-interior but face-adjacent to an interior node) or
Exterior, and every interior node stores, along each axis and direction, the
fractional distance theta in (0, 1] to the zero set of rho whenever the
neighbouring lattice node is not interior.  Those fractions feed the one-sided
(Shortley-Weller style) second differences used near the curved boundary.

Real coordinates are ordered (x_1, y_1, ..., x_n, y_n): axis 2j is Re z_j and
axis 2j+1 is Im z_j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import ndimage
from scipy.optimize import brentq

from .errors import EmptyInterior, NonPositiveDensity, ResolutionTooCoarse

EXTERIOR, BOUNDARY, INTERIOR = 0, 1, 2

# Fractions closer to the node than this are clamped: the Shortley-Weller
# coefficients scale like 1/theta and would otherwise overflow when a node
# sits within rounding distance of the zero set.
_THETA_FLOOR = 1e-9

_MC_SAMPLES = 256
_MC_SEED = 0


# ---------------------------------------------------------------------------
# Domain specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ball:
    """Euclidean ball: rho(z) = |z - center|^2 - radius^2 (so dd^c rho = omega)."""

    n: int
    radius: float = 1.0
    center: tuple[float, ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("complex dimension must be >= 1")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        c = self.center if self.center else (0.0,) * (2 * self.n)
        if len(c) != 2 * self.n:
            raise ValueError("center must have 2n real coordinates")
        object.__setattr__(self, "center", tuple(float(v) for v in c))


@dataclass(frozen=True)
class Ellipsoid:
    """rho(z) = sum_j |z_j|^2 / a_j^2 - 1 with semi-axes a_j per complex coordinate."""

    axes: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(float(a) for a in self.axes))
        if len(self.axes) < 1:
            raise ValueError("need at least one semi-axis")
        if any(not a > 0 for a in self.axes):
            raise ValueError("all semi-axes must be positive")

    @property
    def n(self):
        return len(self.axes)


@dataclass(frozen=True)
class CustomRho:
    """Polynomial defining function of degree <= 4 in the real coordinates.

    coeffs maps exponent multi-indices (length 2n) to coefficients.  The caller
    declares an interior seed point (rho(seed) < 0 is validated) and an
    explicit bounding box; strict plurisubharmonicity of rho is the caller's
    responsibility and is spot-checked numerically at grid nodes by build_grid.
    """

    n: int
    coeffs: Mapping[tuple[int, ...], float]
    seed_point: tuple[float, ...]
    box: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("complex dimension must be >= 1")
        d = 2 * self.n
        cleaned = {}
        for expo, c in dict(self.coeffs).items():
            expo = tuple(int(e) for e in expo)
            if len(expo) != d or any(e < 0 for e in expo):
                raise ValueError("exponent multi-indices must have length 2n, entries >= 0")
            if sum(expo) > 4:
                raise ValueError("defining polynomials are restricted to degree <= 4")
            cleaned[expo] = float(c)
        object.__setattr__(self, "coeffs", cleaned)
        object.__setattr__(self, "seed_point", tuple(float(v) for v in self.seed_point))
        if len(self.seed_point) != d:
            raise ValueError("seed point must have 2n real coordinates")
        box = tuple((float(a), float(b)) for a, b in self.box)
        if len(box) != d or any(b <= a for a, b in box):
            raise ValueError("bounding box must give a nonempty (lo, hi) per axis")
        object.__setattr__(self, "box", box)
        if not eval_rho(self, np.asarray(self.seed_point)) < 0:
            raise ValueError("rho must be negative at the declared seed point")


DomainSpec = Ball | Ellipsoid | CustomRho


def _bounding_box(spec):
    """(2n, 2) array of per-axis (lo, hi) enclosing the closure of the domain."""
    if isinstance(spec, Ball):
        c = np.asarray(spec.center)
        return np.stack([c - spec.radius, c + spec.radius], axis=1)
    if isinstance(spec, Ellipsoid):
        a = np.repeat(np.asarray(spec.axes), 2)
        return np.stack([-a, a], axis=1)
    return np.asarray(spec.box)


def eval_rho(spec, points):
    """Defining function at one point (shape (2n,)) or a batch (m, 2n)."""
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    if single:
        pts = pts[None, :]
    if isinstance(spec, Ball):
        c = np.asarray(spec.center)
        vals = np.sum((pts - c) ** 2, axis=1) - spec.radius ** 2
    elif isinstance(spec, Ellipsoid):
        w = np.repeat(1.0 / np.asarray(spec.axes) ** 2, 2)
        vals = pts ** 2 @ w - 1.0
    else:
        vals = np.zeros(pts.shape[0])
        for expo, c in spec.coeffs.items():
            term = np.full(pts.shape[0], c)
            for ax, e in enumerate(expo):
                if e:
                    term *= pts[:, ax] ** e
            vals += term
    return vals[0] if single else vals


def quadratic_defining(spec):
    """A plurisubharmonic quadratic q <= 0 on the closed domain, with known Hessian.

    Returns (weights, center, offset) describing
        q(z) = sum_j weights_j |z_j - center_j|^2 + offset,
    whose complex Hessian is diag(weights) (so det = prod weights).  For balls
    and ellipsoids q is rho itself; for custom domains it is an enclosing
    ellipsoid derived from the bounding box.  Solvers use scaled multiples of q
    as certified subsolutions and initial guesses.
    """
    if isinstance(spec, Ball):
        n = spec.n
        return np.ones(n), np.asarray(spec.center), -spec.radius ** 2
    if isinstance(spec, Ellipsoid):
        a = np.asarray(spec.axes)
        return 1.0 / a ** 2, np.zeros(2 * len(a)), -1.0
    box = np.asarray(spec.box)
    center = 0.5 * (box[:, 0] + box[:, 1])
    half = 0.5 * (box[:, 1] - box[:, 0])
    n = spec.n
    w = np.array([1.0 / (half[2 * j] ** 2 + half[2 * j + 1] ** 2) for j in range(n)])
    return w, center, -float(n)


def eval_quadratic(weights, center, offset, points):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d2 = (pts - center) ** 2
    n = len(weights)
    acc = np.zeros(pts.shape[0])
    for j in range(n):
        acc += weights[j] * (d2[:, 2 * j] + d2[:, 2 * j + 1])
    return acc + offset


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    value: float = 1.0

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError("constant density must be positive")


@dataclass(frozen=True)
class PolynomialDensity:
    """Polynomial in the real coordinates; strict positivity checked on grids."""

    coeffs: Mapping[tuple[int, ...], float]

    def __post_init__(self):
        object.__setattr__(
            self,
            "coeffs",
            {tuple(int(e) for e in k): float(v) for k, v in dict(self.coeffs).items()},
        )


@dataclass(frozen=True)
class GaussianBump:
    """f(x) = 1 + amplitude * exp(-|x - center|^2 / width^2)."""

    center: tuple[float, ...]
    amplitude: float
    width: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        if not self.width > 0:
            raise ValueError("width must be positive")
        if self.amplitude <= -1.0:
            raise ValueError("amplitude must exceed -1 to keep f positive")


DensitySpec = Constant | PolynomialDensity | GaussianBump


def eval_density(d, points):
    """Density at one point or a batch; strictly positive for valid specs."""
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    if single:
        pts = pts[None, :]
    if isinstance(d, Constant):
        vals = np.full(pts.shape[0], d.value)
    elif isinstance(d, GaussianBump):
        c = np.asarray(d.center)
        vals = 1.0 + d.amplitude * np.exp(-np.sum((pts - c) ** 2, axis=1) / d.width ** 2)
    else:
        vals = np.zeros(pts.shape[0])
        for expo, c in d.coeffs.items():
            term = np.full(pts.shape[0], c)
            for ax, e in enumerate(expo):
                if e:
                    term *= pts[:, ax] ** e
            vals += term
    return vals[0] if single else vals


def density_vector(d, grid, power=1):
    """Density (optionally f**power) at interior nodes; validates positivity on
    the interior and boundary layer (the discrete closure of the domain)."""
    closure = np.concatenate([grid.interior_flat, grid.boundary_flat])
    vals = eval_density(d, grid.node_coords(closure))
    if np.min(vals) <= 0:
        worst = closure[int(np.argmin(vals))]
        raise NonPositiveDensity(
            f"density is {np.min(vals):.3e} <= 0 at node {grid.unravel(worst)}"
        )
    inner = eval_density(d, grid.interior_coords)
    return inner if power == 1 else inner ** power


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------


@dataclass
class GridDomain:
    """Immutable discretization of a domain (see module docstring).

    classification, interior data and cell volumes are fixed at construction;
    the private _cache only memoizes derived stencil operators, so sharing a
    grid across threads after construction is safe for reads.
    """

    spec: DomainSpec
    n: int
    h: float
    lo: np.ndarray
    shape: tuple[int, ...]
    classification: np.ndarray  # int8 over the full lattice, C-order flat
    interior_flat: np.ndarray  # (N,) sorted flat lattice indices
    boundary_flat: np.ndarray
    interior_pos: np.ndarray  # full lattice -> position in interior_flat, or -1
    interior_coords: np.ndarray  # (N, 2n)
    rho_interior: np.ndarray  # (N,)
    nbr_flat: np.ndarray  # (N, 2n, 2) flat index of the +/- axis neighbour
    nbr_ipos: np.ndarray  # (N, 2n, 2) interior position of that neighbour or -1
    theta_axis: np.ndarray  # (N, 2n, 2) crossing fraction, 1.0 when regular
    cell_volume: np.ndarray  # (N,)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_interior(self):
        return self.interior_flat.size

    @property
    def boundary_offsets(self):
        """Per-axis fractional boundary distances, NaN where the neighbour is interior."""
        out = self.theta_axis.copy()
        out[self.nbr_ipos >= 0] = np.nan
        return out

    def node_coords(self, flat):
        idx = np.unravel_index(np.asarray(flat), self.shape)
        return self.lo + self.h * np.stack(idx, axis=-1).astype(float)

    def unravel(self, flat):
        return tuple(int(v) for v in np.unravel_index(int(flat), self.shape))

    def total_volume(self):
        return float(np.sum(self.cell_volume))

    def min_rho_position(self):
        """Interior position of the deepest node (most negative rho)."""
        return int(np.argmin(self.rho_interior))


def _crossing_fraction(spec, start, direction, h):
    """Fraction theta in (0, 1] with rho(start + theta*h*direction) = 0."""

    def g(s):
        return eval_rho(spec, start + (s * h) * direction)

    g1 = g(1.0)
    if g1 <= 0.0:
        # The neighbour was classified non-interior from coordinates computed
        # by a different (equivalent) arithmetic path; a nonpositive value here
        # means it sits on the zero set up to rounding.
        return 1.0
    theta = brentq(g, 0.0, 1.0, xtol=1e-15, rtol=8.9e-16)
    return max(float(theta), _THETA_FLOOR)


def build_grid(spec, h):
    """Discretize the domain with uniform spacing h.

    The lattice is anchored at the bounding-box center and padded by two cells
    per side so that every stencil has lattice neighbours.  Emits a warning
    when h exceeds a quarter of the domain's smallest extent (coarse but still
    buildable); raises EmptyInterior / ResolutionTooCoarse when the interior is
    empty or disconnected.
    """
    h = float(h)
    if not h > 0:
        raise ValueError("h must be positive")
    box = _bounding_box(spec)
    d = box.shape[0]
    n = d // 2
    half = 0.5 * (box[:, 1] - box[:, 0])
    if h > 0.25 * float(np.min(half)):
        import warnings

        warnings.warn(
            f"h={h} exceeds a quarter of the smallest domain half-extent; "
            "boundary resolution will be crude",
            stacklevel=2,
        )
    center = 0.5 * (box[:, 0] + box[:, 1])
    K = np.ceil(half / h).astype(int) + 2
    shape = tuple(int(2 * k + 1) for k in K)
    lo = center - K * h

    axes = [lo[a] + h * np.arange(shape[a]) for a in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    rho_all = eval_rho(spec, pts)
    interior_mask = (rho_all < 0).reshape(shape)
    if not interior_mask.any():
        raise EmptyInterior("no lattice node with rho < 0 at this spacing")

    structure = ndimage.generate_binary_structure(d, 1)
    _, ncomp = ndimage.label(interior_mask, structure=structure)
    if ncomp != 1:
        raise ResolutionTooCoarse(
            f"interior splits into {ncomp} face-connected components at h={h}"
        )

    classification = np.full(shape, EXTERIOR, dtype=np.int8)
    classification[interior_mask] = INTERIOR
    for a in range(d):
        for sgn in (1, -1):
            shifted = np.zeros_like(interior_mask)
            src = [slice(None)] * d
            dst = [slice(None)] * d
            if sgn == 1:
                src[a] = slice(1, None)
                dst[a] = slice(None, -1)
            else:
                src[a] = slice(None, -1)
                dst[a] = slice(1, None)
            shifted[tuple(dst)] = interior_mask[tuple(src)]
            classification[shifted & ~interior_mask] = BOUNDARY

    flat_class = classification.ravel()
    interior_flat = np.flatnonzero(flat_class == INTERIOR).astype(np.int64)
    boundary_flat = np.flatnonzero(flat_class == BOUNDARY).astype(np.int64)
    N = interior_flat.size
    interior_pos = np.full(flat_class.size, -1, dtype=np.int64)
    interior_pos[interior_flat] = np.arange(N)

    strides = np.array(
        [int(np.prod(shape[a + 1 :], dtype=np.int64)) for a in range(d)], dtype=np.int64
    )
    coords = pts[interior_flat]
    rho_int = rho_all[interior_flat]

    nbr_flat = np.empty((N, d, 2), dtype=np.int64)
    for a in range(d):
        nbr_flat[:, a, 0] = interior_flat + strides[a]
        nbr_flat[:, a, 1] = interior_flat - strides[a]
    nbr_ipos = interior_pos[nbr_flat]

    theta = np.ones((N, d, 2))
    need = np.argwhere(nbr_ipos < 0)
    unit = np.eye(d)
    for i, a, s in need:
        direction = unit[a] if s == 0 else -unit[a]
        theta[i, a, s] = _crossing_fraction(spec, coords[i], direction, h)

    cell_volume = _cell_volumes(spec, coords, h, d)
    # Cells centered at boundary nodes still contain a sliver of the domain;
    # hand each sliver to the adjacent interior nodes so that the interior
    # quadrature weights partition (an O(h^2) + Monte Carlo estimate of) the
    # full volume.
    if boundary_flat.size:
        bvols = _cell_volumes(spec, pts[boundary_flat], h, d, assume_clipped=True)
        for b, vol in zip(boundary_flat, bvols):
            if vol == 0.0:
                continue
            owners = interior_pos[b + strides]
            owners = np.concatenate([owners, interior_pos[b - strides]])
            owners = owners[owners >= 0]
            cell_volume[owners] += vol / owners.size

    return GridDomain(
        spec=spec,
        n=n,
        h=h,
        lo=lo,
        shape=shape,
        classification=flat_class,
        interior_flat=interior_flat,
        boundary_flat=boundary_flat,
        interior_pos=interior_pos,
        interior_coords=coords,
        rho_interior=rho_int,
        nbr_flat=nbr_flat,
        nbr_ipos=nbr_ipos,
        theta_axis=theta,
        cell_volume=cell_volume,
    )


def _cell_volumes(spec, coords, h, d, assume_clipped=False):
    """Quadrature weights: full cells h^d, boundary cells clipped by Monte Carlo."""
    N = coords.shape[0]
    full = h ** d
    if assume_clipped:
        vols = np.zeros(N)
        clipped = np.arange(N)
    else:
        # A cell whose corners all lie strictly inside is taken as full.
        corners = np.array(
            np.meshgrid(*([[-0.5, 0.5]] * d), indexing="ij")
        ).reshape(d, -1).T  # (2^d, d)
        vols = np.full(N, full)
        corner_rho = np.stack(
            [eval_rho(spec, coords + h * c) for c in corners], axis=1
        )
        clipped = np.flatnonzero(np.max(corner_rho, axis=1) >= 0)
    if clipped.size:
        rng = np.random.default_rng(_MC_SEED)
        samples = rng.uniform(-0.5, 0.5, size=(clipped.size, _MC_SAMPLES, d))
        pts = coords[clipped][:, None, :] + h * samples
        inside = eval_rho(spec, pts.reshape(-1, d)).reshape(clipped.size, _MC_SAMPLES) < 0
        vols[clipped] = full * inside.mean(axis=1)
    return vols
