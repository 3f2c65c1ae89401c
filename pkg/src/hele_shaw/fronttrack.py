"""Classical Hele-Shaw flow by front tracking.

The pressure is the Green's function of the current domain with pole at
the origin, p = -(1/2pi) log|z| + H, normalised to unit injected flux.
H solves a Dirichlet problem through a double-layer potential discretised
with the Nystrom method on the markers. Markers move with normal speed
kappa * (-dp/dn).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .core import CurveError, DensityField, MarkerCurve, arclength_integral, point_in_domain, resample
from .moments import MomentSeries, moments_boundary, moments_grid

COND_LIMIT = 1e8


class PressureSolveError(RuntimeError):
    """The Nystrom system is too ill-conditioned to trust."""


class CFLError(ValueError):
    """Time step moves some marker by more than half a spacing."""


class StepError(RuntimeError):
    """The advanced curve is no longer simple."""


def _log_part(z):
    return -np.log(np.abs(z)) / (2 * np.pi)


@dataclass
class PressureSolution:
    """Pressure of the current domain: density mu of H and dp/dn at markers."""

    curve: MarkerCurve
    mu: np.ndarray
    dpdn: np.ndarray
    cond: float

    def harmonic_part(self, z) -> np.ndarray:
        """H at interior points, with singularity subtraction at the nearest marker."""
        zq = np.atleast_1d(np.asarray(z, dtype=complex))
        m = self.curve.markers
        w = self.curve.derivative() / (1j * self.curve.n)
        flat = zq.ravel()
        near = np.argmin(np.abs(flat[:, None] - m[None, :]), axis=1)
        mu0 = self.mu[near]
        vals = np.real(np.sum((self.mu[None, :] - mu0[:, None]) * w[None, :]
                              / (m[None, :] - flat[:, None]), axis=1)) + mu0
        return vals.reshape(zq.shape) if np.ndim(z) else float(vals[0])

    def __call__(self, z):
        """p at interior points away from the origin."""
        z = np.asarray(z, dtype=complex)
        return _log_part(z) + self.harmonic_part(z)

    def flux(self) -> float:
        """Total outward flux of -dp/dn; unity for a correct solve."""
        return float(np.real(arclength_integral(self.curve, -self.dpdn)))


def green_pressure(curve: MarkerCurve) -> PressureSolution:
    """Pressure with Delta p = -delta_0 (usual Laplacian) and p = 0 on the curve.

    dp/dn combines the exact normal derivative of the log part with a
    second-order one-sided difference of H at inward offsets eps and 2 eps,
    eps = 2 * spacing.
    """
    m = curve.markers
    spacing = curve.spacing()
    if not point_in_domain(curve, 0j) or np.abs(m).min() < 10 * spacing:
        raise ValueError("origin must be inside, at least 10 spacings from the curve")
    n = curve.n
    d1 = curve.derivative()
    d2 = curve.second_derivative()
    diff = m[None, :] - m[:, None]
    np.fill_diagonal(diff, 1.0)
    A = np.imag(d1[None, :] / diff) / n
    np.fill_diagonal(A, np.imag(d2 / (2 * d1)) / n)
    A += 0.5 * np.eye(n)
    cond = float(np.linalg.cond(A))
    if not cond <= COND_LIMIT:
        raise PressureSolveError(f"Nystrom matrix condition number {cond:.3g} exceeds {COND_LIMIT:.0e}")
    mu = lu_solve(lu_factor(A), -_log_part(m))
    nrm = curve.normal()
    eps = 2 * spacing
    sol = PressureSolution(curve, mu, np.zeros(n), cond)
    h1 = sol.harmonic_part(m - eps * nrm)
    h2 = sol.harmonic_part(m - 2 * eps * nrm)
    h0 = -_log_part(m)
    # one-sided second-order derivative along the inward direction
    dh_in = (-3 * h0 + 4 * h1 - h2) / (2 * eps)
    dlog = -np.real(np.conj(m) * nrm) / (2 * np.pi * np.abs(m) ** 2)
    sol.dpdn = dlog - dh_in
    return sol


def _kappa_values(kappa, z) -> np.ndarray:
    if kappa is None:
        return np.ones(np.shape(z))
    if callable(kappa):
        return np.asarray(kappa(z), dtype=float) * np.ones(np.shape(z))
    return np.full(np.shape(z), float(kappa))


def normal_velocity(curve: MarkerCurve, kappa=1.0, pressure: PressureSolution | None = None) -> np.ndarray:
    """Outward normal speed kappa * (-dp/dn) at the markers."""
    if pressure is None:
        pressure = green_pressure(curve)
    return _kappa_values(kappa, curve.markers) * (-pressure.dpdn)


def advance(curve: MarkerCurve, kappa=1.0, dt: float = 1e-3, pressure: PressureSolution | None = None,
            resample_markers: bool = True) -> MarkerCurve:
    """One explicit Euler step of the front.

    ``kappa`` is a number or an evaluator of the permeability. Negative
    ``dt`` runs the flow backwards (only sensible for analytic boundaries).
    """
    if dt == 0:
        return curve
    v = normal_velocity(curve, kappa, pressure)
    spacing = curve.spacing()
    if abs(dt) * np.abs(v).max() > 0.5 * spacing:
        raise CFLError(f"dt * max speed = {abs(dt) * np.abs(v).max():.3g} exceeds half the spacing {0.5 * spacing:.3g}")
    z = curve.markers + dt * v * curve.normal()
    try:
        new = MarkerCurve(z)
    except CurveError as exc:
        raise StepError(f"front step failed: {exc}") from exc
    return resample(new, curve.n) if resample_markers else new


@dataclass
class ClassicalRun:
    frames: list[MarkerCurve]
    times: list[float]
    moments: MomentSeries
    flux: list[float] = field(default_factory=list)


def _density_from_kappa(kappa) -> DensityField:
    if kappa is None:
        return DensityField.constant(1.0)
    if isinstance(kappa, (int, float)):
        return DensityField.constant(1.0 / float(kappa))
    if isinstance(kappa, DensityField) and kappa.kind == "constant":
        return DensityField.constant(1.0 / kappa.params[0])
    return DensityField(lambda z: 1.0 / np.asarray(kappa(z), dtype=float), "sampled")


def curve_moments(curve: MarkerCurve, rho: DensityField, K: int = 4, h: float = 1 / 256) -> np.ndarray:
    """rho-moments of a curve: boundary formula when possible, else grid quadrature."""
    if rho.has_potential:
        return moments_boundary(curve, rho.potential_dz(curve.markers), K)
    return moments_grid(curve, rho, K, h)


def _rk2_step(curve: MarkerCurve, kappa, dt: float, p: PressureSolution) -> MarkerCurve:
    # midpoint rule; markers keep their identity through the half step
    mid = advance(curve, kappa, dt / 2, pressure=p, resample_markers=False)
    v = normal_velocity(mid, kappa)
    if abs(dt) * np.abs(v).max() > 0.5 * curve.spacing():
        raise CFLError("midpoint speed violates the step cap")
    try:
        new = MarkerCurve(curve.markers + dt * v * mid.normal())
    except CurveError as exc:
        raise StepError(f"front step failed: {exc}") from exc
    return resample(new, curve.n)


def run_classical(omega0: MarkerCurve, kappa=1.0, T: float = 0.3, dt: float = 1e-3,
                  rk2: bool = False, allow_backward: bool = False, K: int = 4,
                  frame_every: int = 1) -> ClassicalRun:
    """Integrate the front to time T; moments use rho = 1/kappa.

    With unit flux and kappa = 1, elapsed time equals the injected area.
    Backward runs (T < 0) need ``allow_backward``; their moment series is
    indexed by elapsed time.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if T < 0:
        if not allow_backward:
            raise ValueError("backward time needs allow_backward=True")
        warnings.warn("backward Hele-Shaw flow is ill-posed unless the boundary is analytic", stacklevel=2)
    sign = -1.0 if T < 0 else 1.0
    steps = int(np.ceil(abs(T) / dt - 1e-9))
    rho = _density_from_kappa(kappa)
    curve = omega0
    series = MomentSeries()
    frames, times, fluxes = [curve], [0.0], []
    series.append(0.0, curve_moments(curve, rho, K))
    elapsed = 0.0
    for i in range(steps):
        dt_i = min(dt, abs(T) - elapsed)
        p = green_pressure(curve)
        fluxes.append(p.flux())
        if rk2:
            curve = _rk2_step(curve, kappa, sign * dt_i, p)
        else:
            curve = advance(curve, kappa, sign * dt_i, pressure=p)
        elapsed += dt_i
        if (i + 1) % frame_every == 0 or i == steps - 1:
            frames.append(curve)
            times.append(sign * elapsed)
            series.append(elapsed, curve_moments(curve, rho, K))
    return ClassicalRun(frames, times, series, fluxes)
