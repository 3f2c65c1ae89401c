"""Complex moments M_k = integral over Omega of z^k rho dA.

Laplacian convention: "Delta" means d^2/dz dzbar (a quarter of the usual
Laplacian), so phi = |z|^2 has Delta phi = 1 and, when Delta phi0 = rho,
M_k = -(i/2) * contour integral of z^k (d phi0/dz) dz.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .cauchy import BoundaryFunction
from .core import DensityField, MarkerCurve, ScalarGrid, contour_integral, rasterize


class BoxTooSmallError(ValueError):
    """Computational box does not contain the domain with the required margin."""


def moment_grid_for(curve: MarkerCurve, h: float, margin: int = 10) -> ScalarGrid:
    """Cell-centred grid aligned with multiples of ``h`` around the curve."""
    z = curve.markers
    pad = (margin + 1) * h
    lo = complex(np.floor((z.real.min() - pad) / h) * h, np.floor((z.imag.min() - pad) / h) * h)
    hi = complex(np.ceil((z.real.max() + pad) / h) * h, np.ceil((z.imag.max() + pad) / h) * h)
    return ScalarGrid.box(lo, hi, h, centered=True)


def moments_from_mask(grid: ScalarGrid, mask: np.ndarray, rho: DensityField, K: int,
                      weights: np.ndarray | None = None) -> np.ndarray:
    """Midpoint-rule moments of the node-centred cells selected by ``mask``."""
    z = grid.points()[mask]
    w = rho(z) * grid.h**2
    if weights is not None:
        w = w * weights[mask]
    out = np.empty(K + 1, dtype=complex)
    zk = np.ones_like(z)
    for k in range(K + 1):
        out[k] = np.sum(zk * w)
        zk = zk * z
    return out


def moments_grid(curve: MarkerCurve, rho: DensityField, K: int, h: float,
                 box: tuple[complex, complex] | None = None) -> np.ndarray:
    """M_0..M_K by the midpoint rule over cells whose centres are inside."""
    if box is None:
        grid = moment_grid_for(curve, h)
    else:
        lo, hi = complex(box[0]), complex(box[1])
        z = curve.markers
        m = 10 * h
        if (z.real.min() - m < lo.real or z.real.max() + m > hi.real
                or z.imag.min() - m < lo.imag or z.imag.max() + m > hi.imag):
            raise BoxTooSmallError("curve does not fit in the box with a 10h margin")
        grid = ScalarGrid.box(lo, hi, h, centered=True)
    return moments_from_mask(grid, rasterize(curve, grid), rho, K)


def moments_boundary(curve: MarkerCurve, phi0_dz, K: int) -> np.ndarray:
    """M_k = -(i/2) * contour integral of z^k (d phi0/dz) dz for k = 0..K."""
    g = phi0_dz.values if isinstance(phi0_dz, BoundaryFunction) else np.asarray(phi0_dz)
    z = curve.markers
    return np.array([-0.5j * contour_integral(curve, z**k * g) for k in range(K + 1)])


def log_kernel(dz: np.ndarray) -> np.ndarray:
    """Fundamental solution (2/pi) log|z| of d^2/dz dzbar."""
    return (2 / np.pi) * np.log(np.abs(dz))


def newtonian_potential(rho, grid: ScalarGrid, support: MarkerCurve | None = None) -> ScalarGrid:
    """phi0 at the grid nodes from unit-area cells between the nodes.

    Sources sit at the centres of the (nx-1) x (ny-1) cells spanned by the
    nodes; ``rho`` is a DensityField or a callable. With ``support`` only
    cells whose centres lie inside that curve carry mass.
    """
    nx, ny, h = grid.nx, grid.ny, grid.h
    centers = grid.origin + h * (0.5 + 0.5j) + h * (
        np.arange(nx - 1)[:, None] + 1j * np.arange(ny - 1)[None, :]
    )
    dens = np.asarray(rho(centers), dtype=float)
    if np.any(dens <= 0) and support is None:
        raise ValueError("density must be positive on the grid")
    if support is not None:
        cgrid = ScalarGrid(grid.origin + h * (0.5 + 0.5j), h, np.zeros((nx - 1, ny - 1)))
        dens = np.where(rasterize(support, cgrid), dens, 0.0)
    mx = np.arange(-(nx - 2), nx) - 0.5
    my = np.arange(-(ny - 2), ny) - 0.5
    kern = log_kernel(h * (mx[:, None] + 1j * my[None, :]))
    full = fftconvolve(dens * h**2, kern, mode="full")
    vals = full[nx - 2:nx - 2 + nx, ny - 2:ny - 2 + ny]
    return grid.like(vals)


def quarter_laplacian(values: np.ndarray, h: float) -> np.ndarray:
    """5-point Laplacian divided by 4 (the d^2/dz dzbar convention)."""
    out = np.full(values.shape, np.nan)
    out[1:-1, 1:-1] = (
        values[2:, 1:-1] + values[:-2, 1:-1] + values[1:-1, 2:] + values[1:-1, :-2]
        - 4 * values[1:-1, 1:-1]
    ) / (4 * h**2)
    return out


@dataclass
class MomentSeries:
    times: list[float] = field(default_factory=list)
    values: list[np.ndarray] = field(default_factory=list)

    def append(self, t: float, m) -> None:
        if self.times and not t > self.times[-1]:
            raise ValueError("times must be strictly increasing")
        m = np.asarray(m, dtype=complex)
        if abs(m[0].imag) > 1e-9 * max(abs(m[0]), 1e-300):
            raise ValueError("M_0 must be real")
        self.times.append(float(t))
        self.values.append(m)

    def array(self) -> np.ndarray:
        return np.array(self.values)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "k", "re", "im"])
            for t, m in zip(self.times, self.values):
                for k, v in enumerate(m):
                    w.writerow([repr(t), k, repr(float(v.real)), repr(float(v.imag))])

    @classmethod
    def read_csv(cls, path) -> "MomentSeries":
        rows: dict[float, dict[int, complex]] = {}
        with open(path) as fh:
            for r in csv.DictReader(fh):
                rows.setdefault(float(r["t"]), {})[int(r["k"])] = complex(float(r["re"]), float(r["im"]))
        s = cls()
        for t in sorted(rows):
            d = rows[t]
            s.append(t, [d[k] for k in sorted(d)])
        return s


def richardson_drift(series: MomentSeries) -> np.ndarray:
    """Per-k conservation drift; k = 0 is measured against unit injection."""
    if len(series.times) < 2:
        raise ValueError("need at least two time samples")
    t = np.asarray(series.times)
    m = series.array()
    drift = np.abs(m - m[0]).max(axis=0)
    drift[0] = np.max(np.abs(m[:, 0] - m[0, 0] - (t - t[0])))
    return drift
