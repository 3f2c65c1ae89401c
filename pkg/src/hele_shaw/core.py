"""Marker curves, uniform grids, densities and contour quadrature.

Points in the plane are complex numbers throughout. Curves are closed,
positively oriented marker sequences; the closing segment is implicit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline, RegularGridInterpolator
from scipy.ndimage import binary_dilation, binary_erosion
from skimage.draw import polygon as draw_polygon
from skimage.measure import points_in_poly

MIN_MARKERS = 16


class CurveError(ValueError):
    """Invalid or degenerate marker curve."""


class BoundaryAmbiguityError(ValueError):
    """A query point lies on the curve within tolerance."""


class GridMismatchError(ValueError):
    """Two grids that must be aligned are not."""


def as_complex(points) -> np.ndarray:
    """Coerce (N,) complex or (N, 2) real input into a complex array."""
    a = np.asarray(points)
    if np.iscomplexobj(a):
        return a.astype(complex).ravel()
    a = a.astype(float)
    if a.ndim == 2 and a.shape[1] == 2:
        return a[:, 0] + 1j * a[:, 1]
    return a.astype(complex).ravel()


def _segments_intersect(z: np.ndarray, tol: float) -> bool:
    """O(N^2) test whether any two non-adjacent segments intersect."""
    n = len(z)
    p = z
    q = np.roll(z, -1)

    def cross(a, b):
        return a.real * b.imag - a.imag * b.real

    idx = np.arange(n)
    chunk = max(1, 4_000_000 // n)
    for start in range(0, n, chunk):
        i = idx[start:start + chunk, None]
        j = idx[None, :]
        gap = (j - i) % n
        mask = (gap > 1) & (gap < n - 1) & (j > i)
        if not mask.any():
            continue
        a, b = p[i], q[i]
        c, d = p[j], q[j]
        d1 = cross(b - a, c - a)
        d2 = cross(b - a, d - a)
        d3 = cross(d - c, a - c)
        d4 = cross(d - c, b - c)
        hit = (d1 * d2 <= tol) & (d3 * d4 <= tol)
        # collinear disjoint segments pass the sign test; reject by bbox
        lo1x = np.minimum(a.real, b.real)
        hi1x = np.maximum(a.real, b.real)
        lo1y = np.minimum(a.imag, b.imag)
        hi1y = np.maximum(a.imag, b.imag)
        lo2x = np.minimum(c.real, d.real)
        hi2x = np.maximum(c.real, d.real)
        lo2y = np.minimum(c.imag, d.imag)
        hi2y = np.maximum(c.imag, d.imag)
        overlap = (
            (lo1x <= hi2x + tol) & (lo2x <= hi1x + tol)
            & (lo1y <= hi2y + tol) & (lo2y <= hi1y + tol)
        )
        if np.any(hit & overlap & mask):
            return True
    return False


@dataclass(frozen=True)
class MarkerCurve:
    """Closed curve given by markers equispaced in some smooth parameter.

    With ``check=True`` (the default) the curve must have at least 16
    markers, positive signed area and no self-intersections.
    """

    markers: np.ndarray
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        z = as_complex(self.markers)
        if not np.all(np.isfinite(z)):
            raise CurveError("markers must be finite")
        object.__setattr__(self, "markers", z)
        z.flags.writeable = False
        if not self.check:
            return
        if len(z) < MIN_MARKERS:
            raise CurveError(f"need at least {MIN_MARKERS} markers, got {len(z)}")
        if shoelace_area(z) <= 0:
            raise CurveError("curve must be positively oriented")
        if _segments_intersect(z, 1e-12):
            raise CurveError("curve is not simple")

    def __len__(self) -> int:
        return len(self.markers)

    @property
    def n(self) -> int:
        return len(self.markers)

    def derivative(self) -> np.ndarray:
        """dz/dtheta at the markers for theta in [0, 2pi), spectral."""
        return _spectral_derivative(self.markers, 1)

    def second_derivative(self) -> np.ndarray:
        return _spectral_derivative(self.markers, 2)

    def speed(self) -> np.ndarray:
        return np.abs(self.derivative())

    def tangent(self) -> np.ndarray:
        d = self.derivative()
        s = np.abs(d)
        if np.any(s < 1e-14 * max(1.0, s.max())):
            raise CurveError("degenerate tangent (repeated markers)")
        return d / s

    def normal(self) -> np.ndarray:
        """Outward unit normal (tangent rotated clockwise)."""
        return -1j * self.tangent()

    def segment_lengths(self) -> np.ndarray:
        return np.abs(np.roll(self.markers, -1) - self.markers)

    def spacing(self) -> float:
        """Mean marker spacing."""
        return float(self.segment_lengths().mean())

    def perimeter(self) -> float:
        return float(np.sum(self.speed()) * 2 * np.pi / self.n)

    def circumradius(self) -> float:
        """Radius of the smallest origin-centred disc containing the markers."""
        return float(np.abs(self.markers).max())

    def distance(self, z) -> np.ndarray:
        """Distance from points to the marker polygon."""
        return polygon_distance(self.markers, z)

    def reversed(self) -> "MarkerCurve":
        return MarkerCurve(self.markers[::-1].copy(), check=False)

    def translated(self, c: complex) -> "MarkerCurve":
        return MarkerCurve(self.markers + c, check=self.check)

    def to_json(self) -> dict:
        return {"markers": [[float(p.real), float(p.imag)] for p in self.markers]}

    @classmethod
    def from_json(cls, obj: dict) -> "MarkerCurve":
        return cls(np.asarray(obj["markers"], dtype=float))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path) -> "MarkerCurve":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def _spectral_derivative(z: np.ndarray, order: int) -> np.ndarray:
    n = len(z)
    k = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0 and order % 2 == 1:
        k[n // 2] = 0.0
    return np.fft.ifft((1j * k) ** order * np.fft.fft(z))


def circle(n: int, r: float = 1.0, c: complex = 0.0) -> MarkerCurve:
    theta = 2 * np.pi * np.arange(n) / n
    return MarkerCurve(c + r * np.exp(1j * theta))


def ellipse(n: int, a: float, b: float, c: complex = 0.0) -> MarkerCurve:
    theta = 2 * np.pi * np.arange(n) / n
    return MarkerCurve(c + a * np.cos(theta) + 1j * b * np.sin(theta))


def shoelace_area(z: np.ndarray) -> float:
    zn = np.roll(z, -1)
    return 0.5 * float(np.sum(z.real * zn.imag - zn.real * z.imag))


def signed_area(curve) -> float:
    """Shoelace area of the marker polygon (negative if clockwise)."""
    z = curve.markers if isinstance(curve, MarkerCurve) else as_complex(curve)
    return shoelace_area(z)


def smooth_area(curve: MarkerCurve) -> float:
    """Area enclosed by the smooth curve through the markers (spectral)."""
    return float((contour_integral(curve, np.conj(curve.markers)) / 2j).real)


def contour_integral(curve: MarkerCurve, samples) -> complex:
    """Periodic trapezoid approximation of the contour integral of g dz."""
    g = np.asarray(samples)
    if g.shape != (curve.n,):
        raise ValueError(f"expected {curve.n} samples, got shape {g.shape}")
    return complex(np.sum(g * curve.derivative()) * (2 * np.pi / curve.n))


def arclength_integral(curve: MarkerCurve, samples) -> complex:
    """Trapezoid approximation of the integral of g ds."""
    g = np.asarray(samples)
    if g.shape != (curve.n,):
        raise ValueError(f"expected {curve.n} samples, got shape {g.shape}")
    return complex(np.sum(g * curve.speed()) * (2 * np.pi / curve.n))


def resample(curve: MarkerCurve, n: int) -> MarkerCurve:
    """Redistribute ``n`` markers equispaced in arclength.

    The input markers are interpolated by a periodic cubic spline in the
    cumulative chord-length parameter.
    """
    if n < MIN_MARKERS:
        raise CurveError(f"need at least {MIN_MARKERS} markers, got {n}")
    z = curve.markers
    seg = np.abs(np.roll(z, -1) - z)
    total = seg.sum()
    if not total > 0:
        raise CurveError("degenerate curve (zero length)")
    s = np.concatenate([[0.0], np.cumsum(seg)])
    pts = np.concatenate([z, z[:1]])
    spline = CubicSpline(s, np.column_stack([pts.real, pts.imag]), bc_type="periodic")
    dspline = spline.derivative()

    # arclength along the spline: 8-point Gauss-Legendre per knot interval
    xg, wg = np.polynomial.legendre.leggauss(8)
    a, b = s[:-1], s[1:]
    mid, half = (a + b) / 2, (b - a) / 2
    nodes = mid[:, None] + half[:, None] * xg[None, :]
    d = dspline(nodes.ravel()).reshape(len(a), len(xg), 2)
    speed = np.hypot(d[..., 0], d[..., 1])
    piece = np.sum(speed * wg[None, :], axis=1) * half
    arc = np.concatenate([[0.0], np.cumsum(piece)])
    length = arc[-1]

    target = length * np.arange(n) / n
    k = np.clip(np.searchsorted(arc, target, side="right") - 1, 0, len(a) - 1)
    param = s[k] + (target - arc[k]) / np.maximum(speed.mean(axis=1)[k], 1e-300)
    # Newton on arclength(param) = target within the located interval
    for _ in range(8):
        lo = s[k]
        m = (lo + param) / 2
        h = (param - lo) / 2
        qn = m[:, None] + h[:, None] * xg[None, :]
        dq = dspline(qn.ravel()).reshape(n, len(xg), 2)
        acc = np.sum(np.hypot(dq[..., 0], dq[..., 1]) * wg[None, :], axis=1) * h
        resid = arc[k] + acc - target
        dp = dspline(param)
        param = param - resid / np.hypot(dp[:, 0], dp[:, 1])
    xy = spline(param)
    return MarkerCurve(xy[:, 0] + 1j * xy[:, 1], check=curve.check)


def winding_number(z_markers: np.ndarray, points) -> np.ndarray:
    """Winding number of the closed polygon around each point."""
    pts = np.atleast_1d(np.asarray(points, dtype=complex))
    out = np.zeros(pts.shape, dtype=int)
    a = z_markers
    b = np.roll(z_markers, -1)
    flat = pts.ravel()
    res = np.zeros(flat.shape, dtype=int)
    chunk = max(1, 2_000_000 // len(a))
    for start in range(0, len(flat), chunk):
        p = flat[start:start + chunk, None]
        ay, by = a.imag[None, :], b.imag[None, :]
        isleft = (b.real - a.real)[None, :] * (p.imag - ay) - (p.real - a.real[None, :]) * (by - ay)
        up = (ay <= p.imag) & (by > p.imag) & (isleft > 0)
        down = (ay > p.imag) & (by <= p.imag) & (isleft < 0)
        res[start:start + chunk] = up.sum(axis=1) - down.sum(axis=1)
    out[...] = res.reshape(pts.shape)
    return out


def polygon_distance(z_markers: np.ndarray, points) -> np.ndarray:
    """Euclidean distance from each point to the closed polygon."""
    pts = np.atleast_1d(np.asarray(points, dtype=complex))
    flat = pts.ravel()
    a = z_markers
    d = np.roll(z_markers, -1) - a
    dd = np.maximum(np.abs(d) ** 2, 1e-300)
    res = np.empty(flat.shape)
    chunk = max(1, 2_000_000 // len(a))
    for start in range(0, len(flat), chunk):
        p = flat[start:start + chunk, None]
        t = np.clip(((p - a) * np.conj(d)).real / dd, 0.0, 1.0)
        res[start:start + chunk] = np.min(np.abs(p - (a + t * d)), axis=1)
    return res.reshape(pts.shape)


def point_in_domain(curve: MarkerCurve, z: complex, tol: float = 1e-12) -> bool:
    """True iff the curve winds once around ``z``."""
    if float(polygon_distance(curve.markers, z)[0]) <= tol:
        raise BoundaryAmbiguityError(f"point {z} lies on the curve (within {tol})")
    return bool(winding_number(curve.markers, z)[0] == 1)


def inside_mask(curve: MarkerCurve, points) -> np.ndarray:
    """Vectorised interior test (no boundary-ambiguity check)."""
    pts = np.asarray(points, dtype=complex)
    z = curve.markers
    flat = pts.ravel()
    res = points_in_poly(np.column_stack([flat.real, flat.imag]),
                         np.column_stack([z.real, z.imag]))
    return res.reshape(pts.shape)


def rasterize(curve: MarkerCurve, grid: "ScalarGrid") -> np.ndarray:
    """Boolean mask of grid nodes inside the curve (node-centred cells)."""
    z = curve.markers
    rr, cc = draw_polygon((z.real - grid.origin.real) / grid.h,
                          (z.imag - grid.origin.imag) / grid.h, shape=grid.shape)
    mask = np.zeros(grid.shape, dtype=bool)
    mask[rr, cc] = True
    return mask


def coverage(curve: MarkerCurve, grid: "ScalarGrid", sub: int = 8) -> np.ndarray:
    """Hat-weighted fraction of the curve's interior around each node.

    The weight of node i is the integral of chi_Omega against the bilinear
    hat function centred at i (divided by h^2), so total mass and first
    moments of chi_Omega are reproduced exactly. Nodes far from the curve
    take the raster value 0 or 1; frontier nodes are estimated with
    ``sub`` samples per cell side.
    """
    mask = rasterize(curve, grid)
    band = binary_dilation(mask, iterations=3) & ~binary_erosion(mask, iterations=3)
    frac = mask.astype(float)
    ii, jj = np.nonzero(band)
    if len(ii) == 0:
        return frac
    off = (np.arange(2 * sub) + 0.5) / sub - 1.0
    hat = 1.0 - np.abs(off)
    wx, wy = np.meshgrid(hat, hat, indexing="ij")
    wts = (wx * wy).ravel() / sub**2
    sx, sy = np.meshgrid(off, off, indexing="ij")
    cx = grid.origin.real + grid.h * ii
    cy = grid.origin.imag + grid.h * jj
    px = (cx[:, None] + grid.h * sx.ravel()[None, :]).ravel()
    py = (cy[:, None] + grid.h * sy.ravel()[None, :]).ravel()
    z = curve.markers
    inside = points_in_poly(np.column_stack([px, py]), np.column_stack([z.real, z.imag]))
    frac[ii, jj] = inside.reshape(len(ii), -1) @ wts
    return frac


@dataclass
class ScalarGrid:
    """Real field sampled at ``origin + h*(i + 1j*j)``, values[i, j]."""

    origin: complex
    h: float
    values: np.ndarray

    def __post_init__(self):
        self.origin = complex(self.origin)
        self.values = np.asarray(self.values, dtype=float)
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        if self.values.ndim != 2:
            raise ValueError("values must be 2-D")

    @classmethod
    def zeros(cls, origin: complex, h: float, nx: int, ny: int) -> "ScalarGrid":
        return cls(origin, h, np.zeros((nx, ny)))

    @classmethod
    def box(cls, lo: complex, hi: complex, h: float, centered: bool = True) -> "ScalarGrid":
        """Zero grid covering [lo, hi]; ``centered`` puts nodes at cell centres."""
        lo, hi = complex(lo), complex(hi)
        nx = int(round((hi.real - lo.real) / h))
        ny = int(round((hi.imag - lo.imag) / h))
        off = h / 2 if centered else 0.0
        if not centered:
            nx, ny = nx + 1, ny + 1
        return cls(lo + off * (1 + 1j), h, np.zeros((nx, ny)))

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    @property
    def ny(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def x(self) -> np.ndarray:
        return self.origin.real + self.h * np.arange(self.nx)

    def y(self) -> np.ndarray:
        return self.origin.imag + self.h * np.arange(self.ny)

    def points(self) -> np.ndarray:
        """Complex node coordinates, shape (nx, ny)."""
        return self.x()[:, None] + 1j * self.y()[None, :]

    def like(self, values) -> "ScalarGrid":
        return ScalarGrid(self.origin, self.h, np.asarray(values, dtype=float))

    def aligned(self, other: "ScalarGrid") -> bool:
        return (
            self.shape == other.shape
            and abs(self.origin - other.origin) <= 1e-12 * max(1.0, abs(self.origin))
            and abs(self.h - other.h) <= 1e-12 * self.h
        )

    def require_aligned(self, other: "ScalarGrid") -> None:
        if not self.aligned(other):
            raise GridMismatchError("grids are not aligned")

    def interpolator(self, method: str = "linear"):
        return RegularGridInterpolator(
            (self.x(), self.y()), self.values, method=method,
            bounds_error=False, fill_value=None,
        )

    def sample(self, z, method: str = "linear") -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        pts = np.column_stack([z.real.ravel(), z.imag.ravel()])
        return self.interpolator(method)(pts).reshape(z.shape)

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("nx,ny,h,ox,oy\n")
            fh.write(f"{self.nx},{self.ny},{self.h!r},{self.origin.real!r},{self.origin.imag!r}\n")
            np.savetxt(fh, self.values, delimiter=",", fmt="%.17g")

    @classmethod
    def read_csv(cls, path) -> "ScalarGrid":
        with open(path) as fh:
            header = fh.readline().strip()
            if header != "nx,ny,h,ox,oy":
                raise ValueError(f"unexpected grid header {header!r}")
            nx, ny, h, ox, oy = fh.readline().strip().split(",")
            vals = np.loadtxt(fh, delimiter=",", ndmin=2)
        vals = vals.reshape(int(nx), int(ny))
        return cls(complex(float(ox), float(oy)), float(h), vals)


def laplacian(values: np.ndarray, h: float) -> np.ndarray:
    """Standard 5-point Laplacian on interior nodes (edges left at 0)."""
    v = values
    out = np.zeros_like(v)
    out[1:-1, 1:-1] = (
        v[2:, 1:-1] + v[:-2, 1:-1] + v[1:-1, 2:] + v[1:-1, :-2] - 4 * v[1:-1, 1:-1]
    ) / h**2
    return out


def d_dz(values: np.ndarray, h: float) -> np.ndarray:
    """Centred-difference d/dz = (d/dx - i d/dy)/2; edges are NaN."""
    out = np.full(values.shape, np.nan, dtype=complex)
    dx = (values[2:, 1:-1] - values[:-2, 1:-1]) / (2 * h)
    dy = (values[1:-1, 2:] - values[1:-1, :-2]) / (2 * h)
    out[1:-1, 1:-1] = (dx - 1j * dy) / 2
    return out


def d_dzbar(values: np.ndarray, h: float) -> np.ndarray:
    """Centred-difference d/dzbar = (d/dx + i d/dy)/2 of a complex field."""
    out = np.full(values.shape, np.nan, dtype=complex)
    dx = (values[2:, 1:-1] - values[:-2, 1:-1]) / (2 * h)
    dy = (values[1:-1, 2:] - values[1:-1, :-2]) / (2 * h)
    out[1:-1, 1:-1] = (dx + 1j * dy) / 2
    return out


class DensityField:
    """Positive area density rho = 1/kappa.

    Build with :meth:`constant`, :meth:`linear` (c0 + c1 Re z + c2 Im z,
    clamped below by ``rho_min``) or :meth:`sampled`.
    """

    def __init__(self, func: Callable[[np.ndarray], np.ndarray], kind: str,
                 params: tuple = (), rho_min: float = 1e-3):
        self._func = func
        self.kind = kind
        self.params = params
        self.rho_min = rho_min

    def __call__(self, z) -> np.ndarray:
        return self._func(np.asarray(z, dtype=complex))

    def __repr__(self) -> str:
        return f"DensityField({self.kind}, {self.params})"

    @classmethod
    def constant(cls, c: float = 1.0) -> "DensityField":
        if not c > 0:
            raise ValueError("density must be positive")
        return cls(lambda z: np.full(np.shape(z), float(c)), "constant", (float(c),), rho_min=float(c))

    @classmethod
    def linear(cls, c0: float, c1: float = 0.0, c2: float = 0.0,
               rho_min: float = 1e-3) -> "DensityField":
        def f(z):
            return np.maximum(c0 + c1 * z.real + c2 * z.imag, rho_min)
        return cls(f, "linear", (float(c0), float(c1), float(c2)), rho_min=rho_min)

    @classmethod
    def sampled(cls, grid: ScalarGrid, rho_min: float = 1e-3) -> "DensityField":
        if np.any(grid.values < rho_min):
            raise ValueError("sampled density falls below rho_min")
        interp = grid.interpolator("linear")

        def f(z):
            pts = np.column_stack([z.real.ravel(), z.imag.ravel()])
            return np.maximum(interp(pts).reshape(z.shape), rho_min)
        return cls(f, "sampled", (), rho_min=rho_min)

    def reciprocal(self) -> Callable[[np.ndarray], np.ndarray]:
        """Permeability kappa = 1/rho as an evaluator."""
        return lambda z: 1.0 / self(z)

    @property
    def has_potential(self) -> bool:
        return self.kind in ("constant", "linear")

    def potential(self, z) -> np.ndarray:
        """Closed-form phi0 with d^2 phi0/dz dzbar = rho (unclamped region)."""
        z = np.asarray(z, dtype=complex)
        c0, c1, c2 = self._coeffs()
        r2 = np.abs(z) ** 2
        return c0 * r2 + c1 * r2 * z.real / 2 + c2 * r2 * z.imag / 2

    def potential_dz(self, z) -> np.ndarray:
        """d(phi0)/dz for :meth:`potential`."""
        z = np.asarray(z, dtype=complex)
        c0, c1, c2 = self._coeffs()
        zb = np.conj(z)
        r2 = np.abs(z) ** 2
        return c0 * zb + c1 * (2 * r2 + zb**2) / 4 + c2 * (2 * r2 - zb**2) / 4j

    def _coeffs(self) -> tuple[float, float, float]:
        if self.kind == "constant":
            return self.params[0], 0.0, 0.0
        if self.kind == "linear":
            return self.params
        raise ValueError("closed-form potential only for constant/linear densities")

    @classmethod
    def parse(cls, text) -> "DensityField":
        """Parse ``2.0``, ``"const:2"`` or ``"linear:c0,c1,c2"``."""
        if isinstance(text, (int, float)):
            return cls.constant(float(text))
        if not isinstance(text, str):
            raise ValueError(f"cannot parse density {text!r}")
        kind, _, rest = text.partition(":")
        try:
            if kind in ("const", "constant"):
                return cls.constant(float(rest))
            if kind == "linear":
                vals = [float(v) for v in rest.split(",")]
                if len(vals) != 3:
                    raise ValueError
                return cls.linear(*vals)
            return cls.constant(float(text))
        except ValueError:
            raise ValueError(f"cannot parse density {text!r}") from None
