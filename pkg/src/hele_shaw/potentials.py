"""Regularised maximum of two functions and a local gluing of potentials.

reg_max(alpha, beta) = integral of max(alpha, beta + lam) f(lam) dlam for a
unit-mass bump f supported in (-a, a). It equals alpha where
alpha > beta + a and beta where alpha < beta - a, and is smooth in between.

glue_potential replaces a potential phi = |z|^2 + O(|z|^3) near the origin
by a reference potential psi outside a small ball, keeping a rescaled copy
of phi near 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import BPoly

from .core import GridMismatchError, ScalarGrid

GL_NODES = 64
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_NODES)


def _bump_profile(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    m = np.abs(x) < 1
    out[m] = np.exp(-1.0 / (1.0 - x[m] ** 2))
    return out


_BUMP_MASS = quad(lambda x: float(_bump_profile(x)), -1, 1, epsabs=1e-14, epsrel=1e-13, limit=200)[0]


class EpsilonTooLargeError(ValueError):
    """No admissible radius R exists for the requested epsilon."""


@dataclass(frozen=True)
class BumpFunction:
    """Standard mollifier C exp(-1/(1 - (lam/a)^2)) / a on (-a, a)."""

    a: float

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("half-width must be positive")

    def __call__(self, lam):
        return _bump_profile(np.asarray(lam, dtype=float) / self.a) / (_BUMP_MASS * self.a)

    @property
    def sup(self) -> float:
        """Sup norm, attained at 0: e^-1 / (mass * a), about 0.83 / a."""
        return float(np.exp(-1.0) / (_BUMP_MASS * self.a))

    def mass(self) -> float:
        return quad(lambda t: float(self(t)), -self.a, self.a, epsabs=1e-14, epsrel=1e-13, limit=200)[0]


def reg_max_values(alpha, beta, f: BumpFunction) -> np.ndarray:
    """Pointwise regularised maximum of two arrays.

    Where |alpha - beta| < a the integral is split at the kink
    lam = alpha - beta and each smooth piece gets 64-node Gauss-Legendre.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    a = f.a
    gamma = alpha - beta
    out = np.where(gamma >= a, alpha, beta)
    mid = np.abs(gamma) < a
    if np.any(mid):
        g = gamma[mid][:, None]
        # lower piece (-a, gamma): integrand alpha f
        half = (g + a) / 2
        lam = -a + half * (_GL_X + 1)
        lower = np.sum(f(lam) * _GL_W, axis=1) * half[:, 0]
        # upper piece (gamma, a): integrand (beta + lam) f
        half = (a - g) / 2
        lam = g + half * (_GL_X + 1)
        fu = f(lam) * _GL_W
        upper0 = np.sum(fu, axis=1) * half[:, 0]
        upper1 = np.sum(fu * lam, axis=1) * half[:, 0]
        out[mid] = alpha[mid] * lower + beta[mid] * upper0 + upper1
    return out


def reg_max(alpha: ScalarGrid, beta: ScalarGrid, f: BumpFunction) -> ScalarGrid:
    if not alpha.aligned(beta):
        raise GridMismatchError("alpha and beta must live on the same grid")
    return alpha.like(reg_max_values(alpha.values, beta.values, f))


def _derivs(v: np.ndarray, h: float) -> dict[str, np.ndarray]:
    c = v[1:-1, 1:-1]
    return {
        "0": c,
        "x": (v[2:, 1:-1] - v[:-2, 1:-1]) / (2 * h),
        "y": (v[1:-1, 2:] - v[1:-1, :-2]) / (2 * h),
        "xx": (v[2:, 1:-1] - 2 * c + v[:-2, 1:-1]) / h**2,
        "yy": (v[1:-1, 2:] - 2 * c + v[1:-1, :-2]) / h**2,
        "xy": (v[2:, 2:] - v[2:, :-2] - v[:-2, 2:] + v[:-2, :-2]) / (4 * h**2),
    }


def c2_norm(v: np.ndarray, h: float) -> float:
    """Largest of the discrete C^0, C^1 and C^2 sup seminorms on the interior."""
    return max(float(np.abs(d).max()) for d in _derivs(v, h).values())


def grad_sup(v: np.ndarray, h: float) -> float:
    d = _derivs(v, h)
    return float(np.sqrt(d["x"] ** 2 + d["y"] ** 2).max())


@dataclass
class BoundCheck:
    clause_alpha: bool
    clause_beta: bool
    lhs: float
    rhs: float
    c2_bound: bool

    def all(self) -> bool:
        return self.clause_alpha and self.clause_beta and self.c2_bound


def reg_max_bound_check(alpha: ScalarGrid, beta: ScalarGrid, f: BumpFunction,
                        slack: float = 1.1) -> BoundCheck:
    """Equality clauses and ||u - alpha||_C2 <= a + ||alpha - beta||_C2 + ||d(alpha - beta)||^2 ||f||_C0."""
    u = reg_max(alpha, beta, f).values
    gamma = alpha.values - beta.values
    h = alpha.h
    hi = gamma > f.a
    lo = gamma < -f.a
    clause_alpha = bool(np.all(u[hi] == alpha.values[hi]))
    clause_beta = bool(np.all(u[lo] == beta.values[lo]))
    lhs = c2_norm(u - alpha.values, h)
    rhs = f.a + c2_norm(gamma, h) + grad_sup(gamma, h) ** 2 * f.sup
    return BoundCheck(clause_alpha, clause_beta, lhs, rhs, bool(lhs <= slack * rhs))


# psi: |z|^2 on the unit disc, quintic Hermite blend on 1 <= |z| <= 2,
# log(1 + |z|^2) + PSI_CONST beyond
PSI_CONST = 0.87
_PSI_BLEND = BPoly.from_derivatives(
    [1.0, 2.0],
    [[1.0, 2.0, 2.0], [np.log(5.0) + PSI_CONST, 0.8, -6.0 / 25.0]],
)


def reference_potential(z) -> np.ndarray:
    """Radial psi equal to |z|^2 for |z| <= 1 (exactly, bit for bit)."""
    z = np.asarray(z, dtype=complex)
    r = np.abs(z)
    out = np.abs(z) ** 2
    mid = (r > 1) & (r < 2)
    far = r >= 2
    out = np.where(mid, _PSI_BLEND(np.clip(r, 1, 2)), out)
    out = np.where(far, np.log1p(r**2) + PSI_CONST, out)
    return out


def _sup_on_ball(fun: Callable, R: float, n: int = 41) -> tuple[float, float]:
    # C^2 norm of fun on B_R by finite differences on a polar sample, and
    # sup |fun| / |z|^2 over the same points
    rr = np.linspace(0, R, n)[1:]
    tt = np.linspace(0, 2 * np.pi, 4 * n, endpoint=False)
    z = (rr[:, None] * np.exp(1j * tt[None, :])).ravel()
    d = R / (4 * n)
    v = fun(z)
    vx = (fun(z + d) - fun(z - d)) / (2 * d)
    vy = (fun(z + 1j * d) - fun(z - 1j * d)) / (2 * d)
    vxx = (fun(z + d) - 2 * v + fun(z - d)) / d**2
    vyy = (fun(z + 1j * d) - 2 * v + fun(z - 1j * d)) / d**2
    vxy = (fun(z + d + 1j * d) - fun(z + d - 1j * d) - fun(z - d + 1j * d) + fun(z - d - 1j * d)) / (4 * d**2)
    c2 = max(np.abs(x).max() for x in (v, vx, vy, vxx, vyy, vxy))
    ratio = float(np.max(np.abs(v) / np.abs(z) ** 2))
    return float(c2), ratio


@dataclass
class GlueResult:
    local: ScalarGrid
    glob: ScalarGrid
    R: float
    delta1: float
    delta2: float
    r: float
    a: float
    checks: dict = field(default_factory=dict)

    def params(self) -> dict:
        return {"R": self.R, "delta1": self.delta1, "delta2": self.delta2, "r": self.r, "a": self.a}


def _glued(z, phi, psi, R, delta1, delta2, f):
    z = np.asarray(z, dtype=complex)
    out = np.array(psi(z), dtype=float)
    inside = np.abs(z) < R
    if np.any(inside):
        zi = z[inside]
        out[inside] = reg_max_values(psi(zi), (1 - delta1) * phi(zi) + delta2, f)
    return out


def glue_potential(phi: Callable, eps: float, psi: Callable | None = None,
                   n_local: int = 241, h_global: float = 1 / 64,
                   r_min: float = 1e-12) -> GlueResult:
    """Glue phi = |z|^2 + g near 0 into psi, following the max-regularisation recipe.

    R is halved from 1/5 until ||g||_C2 < eps/20 on B_R, C R < eps/20
    with C = sup |g|/|z|^2 on the unit disc, and |g| < delta1 R^2 / 2 on
    the circle |z| = R. Then delta1 = eps/20,
    delta2 = delta1 R^2 / 4, a = delta2 / 2, and on B_R

        phi_eps = reg_max(psi, (1 - delta1) phi + delta2, bump(a)),

    with phi_eps = psi outside B_R. The result reports the three
    conclusions and discrete subharmonicity on a local grid covering
    B_{1.2R} and on a global grid over the unit disc.
    """
    if psi is None:
        psi = reference_potential
    if not eps > 0:
        raise ValueError("eps must be positive")

    def g(z):
        z = np.asarray(z, dtype=complex)
        return np.asarray(phi(z), dtype=float) - np.abs(z) ** 2

    _, C = _sup_on_ball(g, 1.0)
    R = 0.2
    while True:
        R /= 2
        if R < r_min:
            raise EpsilonTooLargeError(f"no radius R >= {r_min:g} satisfies the recipe for eps = {eps:g}")
        c2, _ = _sup_on_ball(g, R)
        rim = np.abs(g(R * np.exp(2j * np.pi * np.arange(256) / 256))).max()
        # the rim margin keeps psi - beta > a on the boundary circle
        if c2 < eps / 20 and C * R < eps / 20 and rim < 0.5 * (eps / 20) * R**2:
            break
    delta1 = eps / 20
    delta2 = delta1 * R**2 / 4
    a = delta2 / 2
    f = BumpFunction(a)

    def glued(z):
        return _glued(z, phi, psi, R, delta1, delta2, f)

    hl = 2.4 * R / (n_local - 1)
    local = ScalarGrid(complex(-1.2 * R, -1.2 * R), hl, np.zeros((n_local, n_local)))
    zl = local.points()
    local = local.like(glued(zl))
    ng = int(round(4 / h_global)) + 1
    glob = ScalarGrid(complex(-2, -2), h_global, np.zeros((ng, ng)))
    zg = glob.points()
    glob = glob.like(glued(zg))

    beta_l = (1 - delta1) * np.asarray(phi(zl), dtype=float) + delta2
    exact = local.values == beta_l
    # radius of the largest centred ball of nodes on which phi_eps equals beta
    r = float(np.abs(zl[~exact]).min()) if np.any(~exact) else 1.2 * R
    psi_l = np.asarray(psi(zl), dtype=float)
    far = np.abs(zg) > 1
    lap_l = _lap(local.values, hl)
    lap_g = _lap(glob.values, h_global)
    disc = (np.abs(zg) <= 1 - 2 * h_global)[1:-1, 1:-1]
    checks = {
        "equal_on_ball": bool(r > 0 and np.all(exact[np.abs(zl) < r])),
        "equal_psi_outside": bool(np.array_equal(glob.values[far], np.asarray(psi(zg[far]), dtype=float))),
        "c2_distance": c2_norm(local.values - psi_l, hl),
        "c2_small": bool(c2_norm(local.values - psi_l, hl) < eps),
        "subharmonic": bool(lap_l.min() > 0 and lap_g[disc].min() > 0),
    }
    return GlueResult(local, glob, R, delta1, delta2, r, a, checks)


def _lap(v: np.ndarray, h: float) -> np.ndarray:
    return (v[2:, 1:-1] + v[:-2, 1:-1] + v[1:-1, 2:] + v[1:-1, :-2] - 4 * v[1:-1, 1:-1]) / h**2
