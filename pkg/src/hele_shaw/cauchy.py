"""Cauchy transforms, Plemelj splitting and Schwarz-function construction.

Convention: C[g](z) = (1/2 pi i) * contour integral of g(zeta)/(zeta - z),
so that the interior and exterior boundary values satisfy
C_+ = g + C_- on the curve.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import MarkerCurve, contour_integral, inside_mask, point_in_domain

PROXIMITY_FACTOR = 5.0


class ProximityError(ValueError):
    """Evaluation point too close to the curve for trapezoid quadrature."""


@dataclass(frozen=True)
class BoundaryFunction:
    curve: MarkerCurve
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex).ravel()
        if v.shape != (self.curve.n,):
            raise ValueError(f"expected {self.curve.n} values, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise ValueError("boundary values must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, curve: MarkerCurve, g: Callable) -> "BoundaryFunction":
        return cls(curve, g(curve.markers))

    def norm(self) -> float:
        return float(np.abs(self.values).max())


def _cauchy_raw(bf: BoundaryFunction, z) -> np.ndarray:
    zq = np.atleast_1d(np.asarray(z, dtype=complex))
    zeta = bf.curve.markers
    w = bf.values * bf.curve.derivative() * (2 * np.pi / bf.curve.n) / (2j * np.pi)
    flat = zq.ravel()
    out = np.empty(flat.shape, dtype=complex)
    chunk = max(1, 2_000_000 // len(zeta))
    for s in range(0, len(flat), chunk):
        out[s:s + chunk] = np.sum(w[None, :] / (zeta[None, :] - flat[s:s + chunk, None]), axis=1)
    return out.reshape(zq.shape)


def min_distance(curve: MarkerCurve) -> float:
    return PROXIMITY_FACTOR * curve.spacing()


def cauchy_eval(bf: BoundaryFunction, z):
    """C[g](z); f_+ for interior points, f_- for exterior ones.

    Raises ProximityError closer than 5 marker spacings to the curve.
    """
    zq = np.asarray(z, dtype=complex)
    dmin = min_distance(bf.curve)
    d = bf.curve.distance(zq)
    if np.any(d < dmin):
        raise ProximityError(
            f"evaluation point within {float(d.min()):.3g} of the curve; "
            f"minimum allowed distance is {dmin:.3g}"
        )
    out = _cauchy_raw(bf, zq)
    return complex(out.ravel()[0]) if zq.ndim == 0 else out


def plemelj_residual(bf: BoundaryFunction, offset: float) -> float:
    """max |C(m - eps n) - g(m) - C(m + eps n)| over markers m."""
    curve = bf.curve
    z = curve.markers
    diam = float(np.abs(z[:, None] - z[None, :]).max()) if curve.n <= 2048 else 2 * curve.circumradius()
    lo, hi = 2 * curve.spacing(), 0.1 * diam
    if not (lo * (1 - 1e-9) <= offset <= hi * (1 + 1e-9)):
        raise ValueError(f"offset {offset} outside [{lo:.4g}, {hi:.4g}]")
    n = curve.normal()
    inner = _cauchy_raw(bf, z - offset * n)
    outer = _cauchy_raw(bf, z + offset * n)
    return float(np.abs(inner - bf.values - outer).max())


@dataclass(frozen=True)
class LaurentTail:
    """Coefficients b_1..b_K of f_- = sum b_k z^-k at infinity."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex).ravel()
        if len(c) < 1:
            raise ValueError("tail needs K >= 1")
        object.__setattr__(self, "coeffs", c)

    @property
    def K(self) -> int:
        return len(self.coeffs)

    def b(self, k: int) -> complex:
        """b_k with 1-based index; zero beyond the stored order."""
        return complex(self.coeffs[k - 1]) if 1 <= k <= self.K else 0j

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        k = np.arange(1, self.K + 1)
        return np.sum(self.coeffs * z[..., None] ** (-k), axis=-1)


def laurent_tail(bf: BoundaryFunction, K: int) -> LaurentTail:
    """b_k = -(1/2 pi i) contour integral of g(zeta) zeta^(k-1)."""
    if K < 1:
        raise ValueError("K must be >= 1")
    z = bf.curve.markers
    coeffs = [-contour_integral(bf.curve, bf.values * z ** (k - 1)) / (2j * np.pi)
              for k in range(1, K + 1)]
    return LaurentTail(np.array(coeffs))


# primitive of f_tilde from the tail is used for |z| beyond this multiple of R
_SERIES_RADIUS = 2.0
_SERIES_TERMS = 80


@dataclass(frozen=True)
class SchwarzData:
    """Schwarz function S = f_+ - a/z with f_- = a/z + f_tilde.

    ``g`` holds d(phi0)/dz at the markers. The boundary values of S are
    ``g + f_tilde``, i.e. d(phi)/dz for the exterior modification
    phi = phi0 + 2 Re F with F' = f_tilde (see :func:`phi_extension`).
    """

    g: BoundaryFunction
    a: complex
    tail: LaurentTail

    @property
    def curve(self) -> MarkerCurve:
        return self.g.curve

    def residue(self) -> complex:
        """Residue of S at the origin."""
        return -self.a

    def __call__(self, z):
        """S(z) for interior z at least 5 spacings from the curve."""
        z = np.asarray(z, dtype=complex)
        return cauchy_eval(self.g, z) - self.a / z

    def f_tilde(self, z):
        """Exterior part f_- - a/z."""
        z = np.asarray(z, dtype=complex)
        return cauchy_eval(self.g, z) - self.a / z

    def primitive(self, z) -> np.ndarray:
        """F with F' = f_tilde and F -> 0 at infinity (exterior points)."""
        zq = np.atleast_1d(np.asarray(z, dtype=complex))
        R = self.curve.circumradius()
        out = np.empty(zq.shape, dtype=complex)
        far = np.abs(zq) >= _SERIES_RADIUS * R
        out[far] = self._series_primitive(zq[far])
        near = ~far
        if np.any(near):
            out[near] = [self._path_primitive(p, R) for p in zq[near]]
        return out if np.ndim(z) else complex(out[0])

    def _series_primitive(self, z):
        k = np.arange(2, self.tail.K + 1)
        b = self.tail.coeffs[1:]
        return -np.sum(b * z[..., None] ** (-(k - 1)) / (k - 1), axis=-1)

    def _path_primitive(self, z: complex, R: float) -> complex:
        # radial path from |w| = 2R inward to z; must avoid the domain
        if abs(z) == 0:
            raise ValueError("origin is not exterior")
        start = _SERIES_RADIUS * R * z / abs(z)
        length = abs(start - z)
        nodes, weights = np.polynomial.legendre.leggauss(32)
        m = max(1, int(np.ceil(length)))
        edges = np.linspace(0.0, 1.0, m + 1)
        ts, ws = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            ts.append((lo + hi) / 2 + (hi - lo) / 2 * nodes)
            ws.append((hi - lo) / 2 * weights)
        t = np.concatenate(ts)
        w = np.concatenate(ws)
        path = z + t * (start - z)
        if np.any(inside_mask(self.curve, path)):
            raise ValueError("radial integration path crosses the domain")
        integral = np.sum(self.f_tilde(path) * w) * (start - z)
        return complex(self._series_primitive(np.array([start]))[0] - integral)

    def to_json(self) -> dict:
        pair = lambda c: [float(np.real(c)), float(np.imag(c))]  # noqa: E731
        return {
            "a": pair(self.a),
            "tail": [pair(c) for c in self.tail.coeffs],
            "curve": self.curve.to_json(),
            "g": [pair(c) for c in self.g.values],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SchwarzData":
        curve = MarkerCurve.from_json(obj["curve"])
        cplx = lambda p: complex(p[0], p[1])  # noqa: E731
        g = BoundaryFunction(curve, np.array([cplx(p) for p in obj["g"]]))
        tail = LaurentTail(np.array([cplx(p) for p in obj["tail"]]))
        return cls(g, cplx(obj["a"]), tail)

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def schwarz_construct(curve: MarkerCurve, phi0_dz) -> SchwarzData:
    """Schwarz function of (Omega, phi) with a simple pole at the origin.

    ``phi0_dz`` is a BoundaryFunction, an array of samples at the markers,
    or a callable evaluated there.
    """
    if not point_in_domain(curve, 0j):
        raise ValueError("origin must lie strictly inside the curve")
    if isinstance(phi0_dz, BoundaryFunction):
        g = phi0_dz
    elif callable(phi0_dz):
        g = BoundaryFunction.from_function(curve, phi0_dz)
    else:
        g = BoundaryFunction(curve, phi0_dz)
    tail = laurent_tail(g, _SERIES_TERMS)
    return SchwarzData(g, tail.b(1), tail)


def phi_extension(sd: SchwarzData, phi0: Callable, z) -> np.ndarray:
    """phi = phi0 + 2 Re F at exterior points, where F' = f_tilde."""
    zq = np.asarray(z, dtype=complex)
    d = sd.curve.distance(zq)
    dmin = min_distance(sd.curve)
    if np.any(d < dmin):
        raise ProximityError(
            f"evaluation point within {float(d.min()):.3g} of the curve; "
            f"minimum allowed distance is {dmin:.3g}"
        )
    if np.any(inside_mask(sd.curve, zq)):
        raise ValueError("phi_extension is defined outside the curve only")
    out = np.real(phi0(zq)) + 2 * np.real(sd.primitive(zq))
    return float(out) if zq.ndim == 0 else out
