"""Moment derivatives under normal boundary motion.

If the boundary moves with outward normal speed V, the rho-moments change
at the rate dM_k/dt = contour integral of z^k V rho ds. Writing
V rho ds = g dz with g = V rho conj(tau) turns this into a Laurent
coefficient of the Cauchy transform of g: dM_k/dt = -2 pi i b_{k+1}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cauchy import BoundaryFunction, laurent_tail
from .core import DensityField, MarkerCurve, arclength_integral, inside_mask, rasterize
from .moments import moment_grid_for

CIRCLE_NODES = 256


def _cells(curve: MarkerCurve, rho: DensityField, h: float):
    grid = moment_grid_for(curve, h)
    mask = rasterize(curve, grid)
    w = grid.points()[mask]
    return w, rho(w) * h**2


def potential_U(curve: MarkerCurve, rho: DensityField, z, h: float = 1 / 256):
    """U(z) = integral over Omega of log|z - w|^2 rho(w) dA(w), for exterior z."""
    zq = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(inside_mask(curve, zq)):
        raise ValueError("potential_U is evaluated outside the domain only")
    if np.any(curve.distance(zq) < 5 * h):
        raise ValueError("evaluation point closer than 5h to the domain")
    w, m = _cells(curve, rho, h)
    flat = zq.ravel()
    out = np.array([np.sum(np.log(np.abs(p - w) ** 2) * m) for p in flat])
    return out.reshape(zq.shape) if np.ndim(z) else float(out[0])


def cauchy_of_domain(curve: MarkerCurve, rho: DensityField, z, h: float = 1 / 256) -> np.ndarray:
    """G(z) = integral over Omega of rho(w) / (z - w) dA(w) by grid quadrature."""
    zq = np.atleast_1d(np.asarray(z, dtype=complex))
    w, m = _cells(curve, rho, h)
    out = np.array([np.sum(m / (p - w)) for p in zq.ravel()])
    return out.reshape(zq.shape)


def moment_coeffs(curve: MarkerCurve, rho: DensityField, K: int, R: float, h: float = 1 / 256) -> np.ndarray:
    """a_1..a_K with a_k = (1/2 pi i) contour integral over |z| = R of G(z) z^(k-1) dz.

    Since G(z) = sum_k a_k z^-k outside the domain, a_k = M_{k-1}.
    """
    if not R > curve.circumradius():
        raise ValueError(f"R = {R} must exceed the circumradius {curve.circumradius():.4g}")
    zc = R * np.exp(2j * np.pi * np.arange(CIRCLE_NODES) / CIRCLE_NODES)
    G = cauchy_of_domain(curve, rho, zc, h)
    # dz = i z dtheta, so (1/2 pi i) * contour integral = mean of G z^k
    return np.array([np.mean(G * zc**k) for k in range(1, K + 1)])


@dataclass(frozen=True)
class NormalField:
    """Signed outward normal speed sampled at the markers."""

    curve: MarkerCurve
    V: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.V, dtype=float).ravel()
        if v.shape != (self.curve.n,):
            raise ValueError(f"expected {self.curve.n} speeds, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise ValueError("normal speeds must be finite")
        object.__setattr__(self, "V", v)

    @property
    def theta(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.curve.n) / self.curve.n

    def outward(self) -> bool:
        return bool(np.all(self.V > 0))

    @classmethod
    def trig(cls, curve: MarkerCurve, const: float = 0.0, cos=(), sin=()) -> "NormalField":
        """const + sum_m cos[m-1] cos(m theta) + sin[m-1] sin(m theta) in the marker parameter."""
        th = 2 * np.pi * np.arange(curve.n) / curve.n
        v = np.full(curve.n, float(const))
        for m, c in enumerate(cos, start=1):
            v += c * np.cos(m * th)
        for m, s in enumerate(sin, start=1):
            v += s * np.sin(m * th)
        return cls(curve, v)

    @classmethod
    def parse(cls, curve: MarkerCurve, text: str) -> "NormalField":
        """Parse terms like ``"const:1+cos:2+sin:3,0.5"`` (mode, optional amplitude)."""
        th = 2 * np.pi * np.arange(curve.n) / curve.n
        v = np.zeros(curve.n)
        for term in text.split("+"):
            kind, _, rest = term.strip().partition(":")
            try:
                parts = [float(p) for p in rest.split(",")] if rest else []
                if kind == "const" and len(parts) == 1:
                    v += parts[0]
                elif kind in ("cos", "sin") and len(parts) in (1, 2):
                    amp = parts[1] if len(parts) == 2 else 1.0
                    v += amp * (np.cos if kind == "cos" else np.sin)(parts[0] * th)
                else:
                    raise ValueError
            except ValueError:
                raise ValueError(f"cannot parse field term {term!r}") from None
        return cls(curve, v)


def g_from_field(nf: NormalField, rho: DensityField) -> BoundaryFunction:
    """g = V rho conj(tau), so that g dz = V rho ds along the curve."""
    tau = nf.curve.tangent()
    return BoundaryFunction(nf.curve, nf.V * rho(nf.curve.markers) * np.conj(tau))


def moment_derivative(nf: NormalField, rho: DensityField, K: int) -> tuple[np.ndarray, np.ndarray]:
    """(d, d') for k = 0..K: direct contour integrals and -2 pi i b_{k+1}."""
    z = nf.curve.markers
    vr = nf.V * rho(z)
    d = np.array([arclength_integral(nf.curve, z**k * vr) for k in range(K + 1)])
    tail = laurent_tail(g_from_field(nf, rho), K + 1)
    d2 = np.array([-2j * np.pi * tail.b(k + 1) for k in range(K + 1)])
    return d, d2


def injectivity_matrix(curve: MarkerCurve, rho: DensityField, M: int) -> np.ndarray:
    """Real matrix from the modes 1, cos, sin, ..., cos M, sin M to (d_0, ..., d_M).

    Rows are Re d_0 and Re/Im of d_1..d_M, giving a square 2M+1 system.
    """
    cols = []
    modes = [NormalField.trig(curve, const=1.0)]
    for m in range(1, M + 1):
        e = [0.0] * m
        e[-1] = 1.0
        modes.append(NormalField.trig(curve, cos=e))
        modes.append(NormalField.trig(curve, sin=e))
    for nf in modes:
        d, _ = moment_derivative(nf, rho, M)
        cols.append(np.concatenate([[d[0].real], np.column_stack([d[1:].real, d[1:].imag]).ravel()]))
    return np.array(cols).T


def injectivity_sigma_min(curve: MarkerCurve, rho: DensityField, M: int) -> float:
    return float(np.linalg.svd(injectivity_matrix(curve, rho, M), compute_uv=False).min())
