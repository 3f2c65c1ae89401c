"""Weak Hele-Shaw flow as an obstacle problem, solved by projected SOR.

With Delta = d^2/dz dzbar the weak solution u_t solves

    -Delta u - f >= 0,  u >= 0,  (-Delta u - f) u = 0,
    f = rho*chi_0 - rho + t*delta_0.

The Dirac mass is removed by writing u = w + t*N with
N(z) = -(2/pi) log|z|, so that -Delta N = delta_0 and w solves the same
inequality with the bounded source rho*chi_0 - rho and obstacle -t*N.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
from skimage.measure import find_contours

from .cauchy import SchwarzData, _cauchy_raw
from .core import (
    DensityField,
    GridMismatchError,
    MarkerCurve,
    ScalarGrid,
    coverage,
    d_dz,
    d_dzbar,
    inside_mask,
    rasterize,
    resample,
)
from .moments import MomentSeries, moments_boundary, moments_from_mask, moments_grid

BOUNDARY_MARKERS = 256


class NonConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class BoxTooSmallError(ValueError):
    pass


def injection_potential(z) -> np.ndarray:
    """N(z) = -(2/pi) log|z|, the unit point source for -d^2/dz dzbar."""
    return -(2 / np.pi) * np.log(np.abs(z))


@numba.njit(cache=True)
def _psor(w, psi, rhs, omega, tol, maxiter):
    # rhs holds 4 h^2 f; red-black ordering keeps results order-independent
    nx, ny = w.shape
    last = np.inf
    for it in range(maxiter):
        upd = 0.0
        for color in range(2):
            for i in range(1, nx - 1):
                j0 = 1 + (i + 1 + color) % 2
                for j in range(j0, ny - 1, 2):
                    gs = 0.25 * (w[i + 1, j] + w[i - 1, j] + w[i, j + 1] + w[i, j - 1] + rhs[i, j])
                    new = w[i, j] + omega * (gs - w[i, j])
                    if new < psi[i, j]:
                        new = psi[i, j]
                    d = abs(new - w[i, j])
                    if d > upd:
                        upd = d
                    w[i, j] = new
        last = upd
        if upd <= tol:
            return it + 1, last
    return maxiter, last


def optimal_omega(nx: int, ny: int) -> float:
    """SOR relaxation factor optimal for the Dirichlet Laplacian on the box."""
    rj = 0.5 * (np.cos(np.pi / (nx - 1)) + np.cos(np.pi / (ny - 1)))
    return float(2 / (1 + np.sqrt(1 - rj**2)))


@dataclass
class ObstacleProblem:
    """Discrete obstacle problem for w = u - t*N on a node grid.

    ``source`` is the bounded part rho*chi_0 - rho. The obstacle for w is
    -t*N unless ``obstacle`` overrides it; edge nodes of ``w`` are held at
    ``edge_values`` (default -t*N, i.e. u = 0 on the box edge).
    """

    grid: ScalarGrid
    source: ScalarGrid
    t: float
    rho: DensityField = field(default_factory=lambda: DensityField.constant(1.0))
    chi0: np.ndarray | None = None
    omega0: MarkerCurve | None = None
    obstacle: ScalarGrid | None = None
    edge_values: np.ndarray | None = None
    cover: np.ndarray | None = None

    def __post_init__(self):
        self.grid.require_aligned(self.source)
        if self.t < 0:
            raise ValueError("injected mass t must be non-negative")
        pts = self.grid.points()
        if np.min(np.abs(pts)) == 0 and self.t > 0 and self.obstacle is None:
            raise ValueError("grid nodes must avoid the injection point")
        if self.chi0 is None:
            self.chi0 = np.zeros(self.grid.shape, dtype=bool)
        if self.cover is None:
            self.cover = self.chi0.astype(float)

    @classmethod
    def hele_shaw(cls, grid: ScalarGrid, rho: DensityField, omega0: MarkerCurve | None,
                  t: float) -> "ObstacleProblem":
        pts = grid.points()
        lo, hi = pts[0, 0], pts[-1, -1]
        if not (lo.real < 0 < hi.real and lo.imag < 0 < hi.imag):
            raise ValueError("origin must lie strictly inside the box")
        cover = coverage(omega0, grid) if omega0 is not None else np.zeros(grid.shape)
        dens = rho(pts)
        src = grid.like(dens * cover - dens)
        p = cls(grid, src, t, rho, cover >= 0.5, omega0)
        p.cover = cover
        return p

    def psi(self) -> np.ndarray:
        if self.obstacle is not None:
            return self.obstacle.values
        return -self.t * injection_potential(self.grid.points())

    def split(self) -> np.ndarray:
        """t*N on the grid (zero when the Dirac is absent)."""
        if self.t == 0:
            return np.zeros(self.grid.shape)
        return self.t * injection_potential(self.grid.points())


@dataclass
class WeakSolution:
    problem: ObstacleProblem
    w: np.ndarray
    iterations: int
    residual: float
    boundary: MarkerCurve | None = None

    @property
    def grid(self) -> ScalarGrid:
        return self.problem.grid

    @property
    def h(self) -> float:
        return self.problem.grid.h

    @property
    def u(self) -> ScalarGrid:
        u = self.w + self.problem.split()
        return self.grid.like(np.maximum(u, 0.0))

    def coincidence(self) -> np.ndarray:
        return self.u.values <= 0.0

    def indicator(self, threshold: float = 0.0) -> np.ndarray:
        """Nodes of Omega_t: {u > threshold} together with the raster of Omega_0."""
        return (self.u.values > threshold) | self.problem.chi0

    def multiplier(self) -> np.ndarray:
        """lambda = -Delta w - source at interior nodes (zero edge)."""
        w, h = self.w, self.h
        lam = np.zeros(w.shape)
        lam[1:-1, 1:-1] = -(w[2:, 1:-1] + w[:-2, 1:-1] + w[1:-1, 2:] + w[1:-1, :-2]
                            - 4 * w[1:-1, 1:-1]) / (4 * h**2) - self.problem.source.values[1:-1, 1:-1]
        return lam

    def saturation(self) -> np.ndarray:
        """Discrete fluid fraction 1 - lambda/rho (fractional on frontier nodes).

        Summed against rho h^2 it reproduces the injected mass exactly up to
        the discrete flux of N through the box edge.
        """
        sat = 1.0 - self.multiplier() / self.problem.rho(self.grid.points())
        sat[0, :] = sat[-1, :] = sat[:, 0] = sat[:, -1] = 0.0
        return sat

    def complementarity(self) -> np.ndarray:
        """min(u, -Delta w - source) at interior nodes (NaN on the edge)."""
        w, h = self.w, self.h
        lap = np.full(w.shape, np.nan)
        lap[1:-1, 1:-1] = (w[2:, 1:-1] + w[:-2, 1:-1] + w[1:-1, 2:] + w[1:-1, :-2]
                           - 4 * w[1:-1, 1:-1]) / (4 * h**2)
        r = -lap - self.problem.source.values
        return np.minimum(self.w + self.problem.split(), r)


def psor_solve(p: ObstacleProblem, omega: float | None = 1.8, tol: float = 1e-10,
               maxiter: int = 200_000, w0: np.ndarray | None = None,
               extract: bool = True) -> WeakSolution:
    """Projected SOR for the log-split obstacle problem.

    ``omega=None`` picks the optimal SOR factor for the grid. ``w0`` is a
    warm start; it is lifted onto the obstacle before iterating.
    """
    if omega is None:
        omega = optimal_omega(*p.grid.shape)
    if not 0 < omega < 2:
        raise ValueError("omega must lie in (0, 2)")
    if min(p.grid.shape) < 3:
        raise ValueError("grid too small")
    psi = np.ascontiguousarray(p.psi(), dtype=float)
    w = psi.copy() if w0 is None else np.maximum(np.array(w0, dtype=float), psi)
    edge = psi if p.edge_values is None else p.edge_values
    for sl in (np.s_[0, :], np.s_[-1, :], np.s_[:, 0], np.s_[:, -1]):
        w[sl] = edge[sl]
    rhs = np.ascontiguousarray(4 * p.grid.h**2 * p.source.values)
    iters, last = _psor(w, psi, rhs, float(omega), float(tol), int(maxiter))
    if last > tol:
        raise NonConvergenceError(
            f"PSOR did not converge in {maxiter} sweeps (last update {last:.3g})", last, iters)
    ws = WeakSolution(p, w, iters, last)
    if extract:
        ws.boundary = extract_boundary(ws)
    return ws


def psor_sweep(p: ObstacleProblem, w: np.ndarray, omega: float = 1.0) -> float:
    """One in-place red-black projected sweep; returns the max update."""
    rhs = np.ascontiguousarray(4 * p.grid.h**2 * p.source.values)
    psi = np.ascontiguousarray(p.psi(), dtype=float)
    _, last = _psor(w, psi, rhs, float(omega), 0.0, 1)
    return float(last)


def extract_boundary(ws: WeakSolution, n: int = BOUNDARY_MARKERS) -> MarkerCurve | None:
    """Free boundary of {u > 0} as a resampled marker curve.

    Near the free boundary u ~ 2 rho d^2 in the distance d, so the level
    set sqrt(u / 2 rho) = h is a parallel curve at distance h inside; it
    is traced by marching squares and pushed out by h along the normal.
    """
    h = ws.h
    grid = ws.grid
    u = ws.u.values
    if ws.problem.t == 0:
        return resample(ws.problem.omega0, n) if ws.problem.omega0 is not None else None
    rho = ws.problem.rho(grid.points())
    q = np.sqrt(u / (2 * rho))
    contours = find_contours(q, h)
    if not contours:
        return None
    c = max(contours, key=len)
    if len(c) < 8 or np.hypot(*(c[0] - c[-1])) > 1e-9:
        return None
    z = grid.origin + h * (c[:-1, 0] + 1j * c[:-1, 1])
    z = z[np.abs(np.diff(np.concatenate([z, z[:1]]))) > 1e-14 * h]
    if _orientation(z) < 0:
        z = z[::-1]
    inner = resample(MarkerCurve(z, check=False), n)
    return resample(MarkerCurve(inner.markers + h * inner.normal(), check=False), n)


def _orientation(z: np.ndarray) -> float:
    zn = np.roll(z, -1)
    return float(np.sum(z.real * zn.imag - zn.real * z.imag))


@dataclass
class WeakFlow:
    frames: list[WeakSolution]
    times: list[float]
    moments: MomentSeries
    grid: ScalarGrid


def default_box(omega0: MarkerCurve | None, rho: DensityField, t_max: float) -> tuple[complex, complex]:
    """Square box three times the expected final diameter."""
    r0 = float(np.abs(omega0.markers).max()) if omega0 is not None else 0.0
    area0 = float(np.pi * r0**2)
    # grow a disc estimate until the smallest density on it is self-consistent
    r = np.sqrt((area0 + t_max / float(rho(0j))) / np.pi)
    ring = np.exp(2j * np.pi * np.arange(64) / 64)
    for _ in range(20):
        pts = np.concatenate([[0j], np.outer(np.linspace(0.25, 1, 4) * r, ring).ravel()])
        r_new = np.sqrt((area0 + t_max / float(np.min(rho(pts)))) / np.pi)
        if r_new <= r * (1 + 1e-3):
            break
        r = r_new
    half = 1.5 * 2 * max(r, r0)
    return complex(-half, -half), complex(half, half)


def weak_flow(omega0: MarkerCurve | None, rho: DensityField, t_list, h: float,
              box: tuple[complex, complex] | None = None, omega: float | None = None,
              tol: float = 1e-10, maxiter: int = 200_000, K: int = 4,
              edge_nodes: int = 10) -> WeakFlow:
    """Frames of the weak solution for increasing injected masses ``t_list``.

    Each solve is warm-started from the previous frame. Frame moments are
    taken from the discrete saturation, see :func:`frame_moments`.
    """
    ts = [float(t) for t in t_list]
    if any(t < 0 for t in ts) or any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("t_list must be increasing and non-negative")
    if box is None:
        box = default_box(omega0, rho, ts[-1])
    grid = ScalarGrid.box(box[0], box[1], h, centered=True)
    frames: list[WeakSolution] = []
    series = MomentSeries()
    u_prev = None
    for t in ts:
        p = ObstacleProblem.hele_shaw(grid, rho, omega0, t)
        w0 = None if u_prev is None else u_prev - p.split()
        ws = psor_solve(p, omega=omega, tol=tol, maxiter=maxiter, w0=w0)
        mask = ws.u.values > 0
        if mask.any():
            ii, jj = np.nonzero(mask)
            if (ii.min() < edge_nodes or jj.min() < edge_nodes
                    or ii.max() >= grid.nx - edge_nodes or jj.max() >= grid.ny - edge_nodes):
                raise BoxTooSmallError(f"free boundary within {edge_nodes} nodes of the box edge at t={t}")
        frames.append(ws)
        series.append(t, frame_moments(ws, K))
        u_prev = ws.u.values
    return WeakFlow(frames, ts, series, grid)


def frame_moments(ws: WeakSolution, K: int = 4) -> np.ndarray:
    """Moments of the discrete saturation (the obstacle multiplier form of chi)."""
    if ws.problem.t == 0:
        cover = ws.problem.cover
        return moments_from_mask(ws.grid, cover > 0, ws.problem.rho, K, weights=cover)
    full = np.ones(ws.grid.shape, dtype=bool)
    return moments_from_mask(ws.grid, full, ws.problem.rho, K, weights=ws.saturation())


def geometric_moments(ws: WeakSolution, K: int = 4, h: float | None = None) -> np.ndarray:
    """Moments of the region inside the extracted boundary.

    Uses the exact boundary formula when the density has a closed-form
    potential, else the midpoint rule at spacing ``h`` (default grid h/4).
    """
    b = ws.boundary
    if b is None:
        raise ValueError("frame has no extracted boundary")
    rho = ws.problem.rho
    if rho.has_potential:
        return moments_boundary(b, rho.potential_dz(b.markers), K)
    return moments_grid(b, rho, K, h or ws.h / 4)


def weak_schwarz(ws: WeakSolution, phi: ScalarGrid, s0: SchwarzData | None,
                 omega0: MarkerCurve | None, band: tuple[float, float] = (1.0, 6.0),
                 exclude: float = 5.0):
    """Samples of S_t = (phi_z - u_z) - chi_0 (phi_z - S_0) on grid nodes.

    Returns ``(points, values)`` for nodes of Omega_t whose distance to the
    extracted boundary lies in ``band`` (in units of h), skipping nodes
    within ``exclude*h`` of the origin or of the initial boundary. Pass
    ``band=None`` to keep every admissible node of Omega_t.
    """
    if not phi.aligned(ws.grid):
        raise GridMismatchError("phi and u must live on the same grid")
    h = ws.h
    pts = ws.grid.points()
    s = sample_schwarz_field(ws, phi, s0, omega0)
    keep = ws.indicator() & np.isfinite(s)
    keep &= np.abs(pts) > exclude * h
    if omega0 is not None:
        keep &= omega0.distance(pts) > exclude * h
    if band is not None and ws.boundary is not None:
        d = ws.boundary.distance(pts)
        keep &= inside_mask(ws.boundary, pts) & (d >= band[0] * h) & (d <= band[1] * h)
    return pts[keep], s[keep]


def _schwarz_parts(ws: WeakSolution, phi: ScalarGrid, s0: SchwarzData | None,
                   omega0: MarkerCurve | None):
    # S_t split into a finite-difference part and the exactly known poles
    # -t N_z = t/(pi z) and -a/z, so the stencils never touch a singularity
    h = ws.h
    pts = ws.grid.points()
    t = ws.problem.t
    smooth = d_dz(phi.values, h) - d_dz(ws.w, h)
    with np.errstate(divide="ignore", invalid="ignore"):
        sing = t / (np.pi * pts) if t > 0 else np.zeros(pts.shape, dtype=complex)
    if omega0 is not None and s0 is not None:
        chi = inside_mask(omega0, pts)
        f_plus = np.full(pts.shape, np.nan, dtype=complex)
        ok = chi & (omega0.distance(pts) >= 5 * s0.curve.spacing())
        f_plus[ok] = _cauchy_raw(s0.g, pts[ok])
        smooth = np.where(chi, f_plus - d_dz(ws.w, h), smooth)
        with np.errstate(divide="ignore", invalid="ignore"):
            sing = np.where(chi, sing - s0.a / pts, sing)
    return smooth, sing


def sample_schwarz_field(ws: WeakSolution, phi: ScalarGrid, s0: SchwarzData | None,
                         omega0: MarkerCurve | None) -> np.ndarray:
    """S_t on every grid node (NaN on the edge and where S_0 is unavailable)."""
    smooth, sing = _schwarz_parts(ws, phi, s0, omega0)
    s = smooth + sing
    return np.where(ws.coincidence() & ~ws.problem.chi0, d_dz(phi.values, ws.h), s)


def dbar_residual(ws: WeakSolution, phi: ScalarGrid, s0: SchwarzData | None,
                  omega0: MarkerCurve | None, exclude: float = 5.0) -> float:
    """Max |dS_t/dzbar| over Omega_t away from the origin and both boundaries."""
    h = ws.h
    pts = ws.grid.points()
    smooth, _ = _schwarz_parts(ws, phi, s0, omega0)
    ds = d_dzbar(smooth, h)
    keep = ws.indicator() & np.isfinite(ds) & (np.abs(pts) > exclude * h)
    if ws.boundary is not None:
        keep &= inside_mask(ws.boundary, pts) & (ws.boundary.distance(pts) > exclude * h)
    if omega0 is not None:
        keep &= omega0.distance(pts) > exclude * h
    return float(np.abs(ds[keep]).max())
