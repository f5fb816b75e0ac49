"""Holomorphic-section data for effective divisors on the model surfaces.

A divisor D = sum_j n_j p_j of total degree N determines (up to a constant)
the background pointwise norm-squared a = |phi|_0^2 of a holomorphic section
vanishing to order n_j at p_j, computed against the degree-N background
hermitian metric whose curvature is the constant N (in the area-2*pi
normalisation).  Equivalently, away from the divisor,

    (1/2) Laplacian(log a) + N = 0-localised delta masses,

so a satisfies the curvature identity checked by
:func:`curvature_identity_residual`.

Closed forms are used on both surfaces:

* sphere: a(z) = e^C |P(z)|^2 / (1+|z|^2)^N in the stereographic chart,
  with P monic vanishing at the finite divisor points; points at infinity
  lower deg P.
* torus: a(z) = exp(C + sum_j 2 n_j G0(z - p_j)) where
  G0(z) = log|theta1(pi z | i)| - pi y^2 is the doubly periodic Green-type
  kernel of the square lattice (theta1 with nome q = e^{-pi}).

The normalisation constant C is fixed so that max_nodes(a) = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    POINT_AT_INFINITY,
    ScalarField,
    SurfaceGrid,
    SurfaceModel,
    geodesic_distance,
    laplacian_apply,
    node_distances,
)

_THETA_TERMS = 8


def is_infinity(p) -> bool:
    return isinstance(p, tuple) and len(p) == 2 and math.isinf(p[0])


@dataclass(frozen=True)
class Divisor:
    """Effective divisor: chart points with positive integer multiplicities."""

    points: tuple
    multiplicities: tuple

    def __post_init__(self):
        pts = tuple(
            POINT_AT_INFINITY if is_infinity(p) else (float(p[0]), float(p[1]))
            for p in self.points
        )
        mult = tuple(int(m) for m in self.multiplicities)
        if len(pts) != len(mult) or not pts:
            raise ValueError("divisor needs matching, nonempty points and multiplicities")
        if any(m < 1 for m in mult):
            raise ValueError("multiplicities must be positive integers")
        if len(set(pts)) != len(pts):
            raise ValueError("divisor points must be pairwise distinct")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "multiplicities", mult)

    @property
    def total_degree(self) -> int:
        return sum(self.multiplicities)


@dataclass(frozen=True)
class SectionData:
    """Pointwise data of a section vanishing on a divisor.

    Attributes
    ----------
    divisor : Divisor
    grid : SurfaceGrid
    norm_sq : ScalarField
        a = |phi|_0^2 at the nodes; grid maximum is exp(normalization - C_raw) = 1
        for freshly built sections.
    log_norm_reg : ScalarField
        log(a) minus the exact singular model of the divisor; smooth
        (constant, up to rounding, for these closed-form constructions).
    normalization : float
        The additive constant C applied to log(a).
    """

    divisor: Divisor
    grid: SurfaceGrid
    norm_sq: ScalarField
    log_norm_reg: ScalarField
    normalization: float


# ---------------------------------------------------------------------------
# closed-form log-norms
# ---------------------------------------------------------------------------


def sphere_log_norm_raw(divisor: Divisor, xy: np.ndarray) -> np.ndarray:
    """Un-normalised log a at stereographic points (n,2); C = 0 convention."""
    x = xy[:, 0]
    y = xy[:, 1]
    n = divisor.total_degree
    out = -n * np.log1p(x * x + y * y)
    for p, m in zip(divisor.points, divisor.multiplicities):
        if is_infinity(p):
            continue
        d2 = (x - p[0]) ** 2 + (y - p[1]) ** 2
        with np.errstate(divide="ignore"):
            out = out + m * np.log(d2)
    return out


def _theta1(w: np.ndarray) -> np.ndarray:
    """Jacobi theta_1(w | tau=i), nome q = e^{-pi}; w complex array."""
    q = math.exp(-math.pi)
    total = np.zeros_like(w, dtype=complex)
    for k in range(_THETA_TERMS):
        coeff = (-1.0) ** k * q ** ((k + 0.5) ** 2)
        total = total + coeff * np.sin((2 * k + 1) * w)
    return 2.0 * total


def torus_green_kernel(dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """Doubly periodic kernel G0 with (1/2) Laplacian(2 G0) = 1 away from 0.

    G0(z) = log|theta1(pi z | i)| - pi y^2 evaluated at the wrapped offsets.
    """
    dx = np.mod(np.asarray(dx, dtype=float) + 0.5, 1.0) - 0.5
    dy = np.mod(np.asarray(dy, dtype=float) + 0.5, 1.0) - 0.5
    w = math.pi * (dx + 1j * dy)
    t = _theta1(w)
    with np.errstate(divide="ignore"):
        return np.log(np.abs(t)) - math.pi * dy * dy


def torus_log_norm_raw(divisor: Divisor, xy: np.ndarray) -> np.ndarray:
    """Un-normalised log a at torus points (n,2); C = 0 convention."""
    out = np.zeros(xy.shape[0])
    for p, m in zip(divisor.points, divisor.multiplicities):
        out = out + 2.0 * m * torus_green_kernel(xy[:, 0] - p[0], xy[:, 1] - p[1])
    return out


# ---------------------------------------------------------------------------
# builder and diagnostics
# ---------------------------------------------------------------------------


def _validate_divisor_on(grid: SurfaceGrid, divisor: Divisor) -> Divisor:
    if grid.model is SurfaceModel.TORUS:
        if any(is_infinity(p) for p in divisor.points):
            raise ValueError("torus divisors cannot contain the point at infinity")
        pts = tuple((p[0] % 1.0, p[1] % 1.0) for p in divisor.points)
        divisor = Divisor(pts, divisor.multiplicities)
    else:
        if sum(1 for p in divisor.points if is_infinity(p)) > 1:
            raise ValueError("at most one divisor point may sit at infinity")
    pts = divisor.points
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if geodesic_distance(grid.model, pts[i], pts[j]) < 1e-9:
                raise ValueError(f"divisor points {i} and {j} coincide")
    return divisor


def build_section(grid: SurfaceGrid, divisor: Divisor) -> SectionData:
    """Construct the section data of a divisor on a grid.

    The returned ``norm_sq`` has grid maximum exactly 1; ``normalization``
    records the additive log constant used to achieve that.
    """
    divisor = _validate_divisor_on(grid, divisor)
    if grid.model is SurfaceModel.SPHERE:
        raw = sphere_log_norm_raw(divisor, grid.node_coords)
    else:
        raw = torus_log_norm_raw(divisor, grid.node_coords)
    c = -float(np.max(raw))
    norm_sq = np.exp(raw + c)
    with np.errstate(divide="ignore", invalid="ignore"):
        reg = np.log(norm_sq) - raw
    # a node sitting exactly on the divisor makes both terms -inf; the
    # regular part's limit there is the constant c
    reg = np.where(np.isfinite(reg), reg, c)
    return SectionData(
        divisor=divisor,
        grid=grid,
        norm_sq=ScalarField(grid, norm_sq),
        log_norm_reg=ScalarField(grid, reg),
        normalization=c,
    )


def rescale(section: SectionData, s: float) -> SectionData:
    """Multiply the section norm by e^{2s} (a -> e^{2s} a)."""
    s = float(s)
    return SectionData(
        divisor=section.divisor,
        grid=section.grid,
        norm_sq=ScalarField(section.grid, section.norm_sq.values * math.exp(2.0 * s)),
        log_norm_reg=ScalarField(section.grid, section.log_norm_reg.values + 2.0 * s),
        normalization=section.normalization + 2.0 * s,
    )


def curvature_identity_residual(section: SectionData, exclusion_radius: float = 0.3) -> float:
    """Max-norm defect of (1/2) Laplacian(log a) + N = 0 away from the divisor.

    The Laplacian is applied to the regular part ``log_norm_reg``; the exact
    singular model contributes its analytic Laplacian, which equals -2N away
    from the divisor points on both surfaces, cancelling the background
    constant.  The maximum runs over nodes at geodesic distance at least
    ``exclusion_radius`` from every divisor point; returns 0-like values when
    the construction and the transforms are consistent.
    """
    grid = section.grid
    lap = laplacian_apply(section.log_norm_reg)
    mask = np.ones(grid.n_nodes, dtype=bool)
    for p in section.divisor.points:
        mask &= node_distances(grid, p) >= exclusion_radius
    if not np.any(mask):
        raise ValueError("exclusion radius leaves no nodes to check")
    return float(np.max(np.abs(0.5 * lap.values[mask])))
