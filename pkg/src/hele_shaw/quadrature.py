"""Quadrature domains for area measure.

A domain satisfies a quadrature identity when, for every integrable
holomorphic f,

    integral over Omega of f dA = sum_k sum_j c_kj f^(j)(a_k).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .cauchy import SchwarzData
from .core import MarkerCurve, contour_integral, point_in_domain


class NotQuadratureDomainError(ValueError):
    """Schwarz data carry no usable pole at the origin."""


def _pair(c) -> list[float]:
    return [float(np.real(c)), float(np.imag(c))]


def _cplx(p) -> complex:
    if isinstance(p, (list, tuple)):
        return complex(p[0], p[1])
    return complex(p)


@dataclass(frozen=True)
class QuadratureData:
    nodes: tuple[complex, ...]
    mult: tuple[int, ...]
    coeffs: tuple[tuple[complex, ...], ...]

    def __post_init__(self):
        nodes = tuple(complex(a) for a in self.nodes)
        mult = tuple(int(m) for m in self.mult)
        coeffs = tuple(tuple(complex(c) for c in row) for row in self.coeffs)
        if not (len(nodes) == len(mult) == len(coeffs)) or not nodes:
            raise ValueError("nodes, mult and coeffs must have the same nonzero length")
        if any(m < 1 for m in mult):
            raise ValueError("multiplicities must be positive")
        if any(len(row) != m for row, m in zip(coeffs, mult)):
            raise ValueError("each node needs exactly mult coefficients")
        if len(set(nodes)) != len(nodes):
            raise ValueError("nodes must be distinct")
        if any(row[-1] == 0 for row in coeffs):
            raise ValueError("leading coefficient c_{k,n_k-1} must be nonzero")
        total = sum(row[0] for row in coeffs)
        if abs(total.imag) > 1e-9 * abs(total):
            raise ValueError("sum of c_k0 must be real (it is the area)")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "mult", mult)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def order(self) -> int:
        return sum(self.mult)

    def apply(self, poly: np.ndarray) -> complex:
        """Right-hand side for f(z) = sum_j poly[j] z^j."""
        P = np.polynomial.Polynomial(np.asarray(poly, dtype=complex))
        out = 0j
        for a, row in zip(self.nodes, self.coeffs):
            d = P
            for c in row:
                out += c * d(a)
                d = d.deriv()
        return complex(out)

    def to_json(self) -> dict:
        return {
            "nodes": [_pair(a) for a in self.nodes],
            "mult": list(self.mult),
            "coeffs": [[_pair(c) for c in row] for row in self.coeffs],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "QuadratureData":
        return cls(
            tuple(_cplx(a) for a in obj["nodes"]),
            tuple(obj["mult"]),
            tuple(tuple(_cplx(c) for c in row) for row in obj["coeffs"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def area_integral(curve: MarkerCurve, poly) -> complex:
    """Integral over the domain of a polynomial, by -(i/2) times the contour integral of f zbar dz."""
    z = curve.markers
    f = np.polynomial.polynomial.polyval(z, np.asarray(poly, dtype=complex))
    return complex(-0.5j * contour_integral(curve, f * np.conj(z)))


def quad_residual(curve: MarkerCurve, qd: QuadratureData, poly) -> float:
    """|integral of f dA - quadrature sum| for one polynomial f."""
    for a in qd.nodes:
        if not point_in_domain(curve, a):
            raise ValueError(f"node {a} is not inside the curve")
    return abs(area_integral(curve, poly) - qd.apply(poly))


def quad_check(curve: MarkerCurve, qd: QuadratureData, K: int) -> float:
    """Largest quadrature-identity residual over the monomials z^0..z^K."""
    worst = 0.0
    for j in range(K + 1):
        e = np.zeros(j + 1)
        e[j] = 1.0
        worst = max(worst, quad_residual(curve, qd, e))
    return worst


def quad_from_schwarz(sd: SchwarzData, tol: float = 1e-10) -> QuadratureData:
    """Order-one data at the origin: c_0 = pi times the residue of S at 0.

    Only meaningful for Schwarz data built from phi0 = |z|^2.
    """
    z = sd.curve.markers
    if np.abs(sd.g.values - np.conj(z)).max() > 1e-9 * max(1.0, np.abs(z).max()):
        raise ValueError("quadrature data need Schwarz data built from phi0 = |z|^2")
    res = sd.residue()
    if abs(res) < tol:
        raise NotQuadratureDomainError(f"residue {abs(res):.3g} at 0 is below {tol:g}")
    return QuadratureData((0j,), (1,), ((np.pi * res,),))


def polynomial_map_curve(a: float, b: float, n: int) -> tuple[MarkerCurve, QuadratureData]:
    """Image of the unit circle under w -> a w + b w^2 with its exact quadrature data.

    On |w| = 1, zbar dz = ((a^2 + 2b^2)/w + ab/w^2 + 2ab) dw, so the residue
    theorem gives c_00 = pi (a^2 + 2 b^2) and c_01 = pi a^2 b.
    """
    if not a > 2 * abs(b):
        raise ValueError(f"w -> {a} w + {b} w^2 is not univalent on the disc (need a > 2|b|)")
    w = np.exp(2j * np.pi * np.arange(n) / n)
    curve = MarkerCurve(a * w + b * w**2)
    c00 = np.pi * (a**2 + 2 * b**2)
    if b == 0:
        return curve, QuadratureData((0j,), (1,), ((c00,),))
    return curve, QuadratureData((0j,), (2,), ((c00, np.pi * a**2 * b),))

