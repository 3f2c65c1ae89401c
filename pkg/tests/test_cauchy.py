import numpy as np
import pytest

from hele_shaw.cauchy import (
    BoundaryFunction, ProximityError, SchwarzData, cauchy_eval, laurent_tail, phi_extension,
    plemelj_residual, schwarz_construct,
)
from hele_shaw.core import circle, ellipse


def bf_on(curve, g):
    return BoundaryFunction(curve, g(curve.markers))


@pytest.mark.parametrize("z, expected", [(0, 1), (2, 0)])
def test_constant_density(z, expected):
    assert abs(cauchy_eval(bf_on(circle(256), np.ones_like), z) - expected) <= 1e-10


@pytest.mark.parametrize("z, expected", [(0, 0), (2, -0.5)])
def test_conjugate_density(z, expected):
    assert abs(cauchy_eval(bf_on(circle(256), np.conj), z) - expected) <= 1e-8


def test_proximity_error_names_distance():
    c = circle(128)
    with pytest.raises(ProximityError, match="minimum allowed distance"):
        cauchy_eval(bf_on(c, np.conj), 0.99)


def test_plemelj_conjugate():
    assert plemelj_residual(bf_on(circle(512), np.conj), 0.05) <= 0.06


def test_plemelj_constant():
    assert plemelj_residual(bf_on(circle(512), np.ones_like), 0.05) <= 1e-8


def test_plemelj_trig_polynomial():
    rng = np.random.default_rng(0)
    c = circle(512)
    coef = rng.normal(size=7) + 1j * rng.normal(size=7)
    th = np.angle(c.markers)
    g = sum(cm * np.exp(1j * m * th) for cm, m in zip(coef, range(-3, 4)))
    bf = BoundaryFunction(c, g)
    assert plemelj_residual(bf, 0.05) <= 10 * 0.05 * bf.norm()


def test_plemelj_offset_range():
    with pytest.raises(ValueError):
        plemelj_residual(bf_on(circle(512), np.conj), 0.5)


def test_plemelj_linear_decay():
    bf = bf_on(ellipse(512, 1, 0.6), lambda z: np.conj(z) ** 2 + z)
    r = [plemelj_residual(bf, e) for e in (0.1, 0.05, 0.025)]
    assert 1.5 <= r[0] / r[1] <= 2.5 and 1.5 <= r[1] / r[2] <= 2.5


@pytest.mark.parametrize("g, k", [(np.conj, 1), (lambda z: np.conj(z) ** 2, 2)])
def test_laurent_tail_monomials(g, k):
    tail = laurent_tail(bf_on(circle(256), g), 6)
    expected = np.zeros(6, dtype=complex)
    expected[k - 1] = -1
    assert np.abs(tail.coeffs - expected).max() <= 1e-10


def test_laurent_tail_constant():
    assert np.abs(laurent_tail(bf_on(circle(256), np.ones_like), 5).coeffs).max() <= 1e-10


def test_laurent_tail_matches_cauchy_far_away():
    c = ellipse(256, 1, 0.6)
    bf = bf_on(c, lambda z: np.conj(z) + 0.3 * np.conj(z) ** 3)
    tail = laurent_tail(bf, 20)
    z = 3 * c.circumradius() * np.exp(2j * np.pi * np.arange(12) / 12)
    assert np.abs(cauchy_eval(bf, z) - tail(z)).max() <= 1e-8 * bf.norm()


def test_holomorphy_of_interior_values():
    c = ellipse(256, 1, 0.6)
    bf = bf_on(c, lambda z: np.conj(z) * z)
    h = 1e-3
    z = np.array([0.1 + 0.05j, -0.3, 0.2j])
    dbar = (cauchy_eval(bf, z + h) - cauchy_eval(bf, z - h)
            + 1j * (cauchy_eval(bf, z + 1j * h) - cauchy_eval(bf, z - 1j * h))) / (4 * h)
    assert np.abs(dbar).max() <= 1e-6 * bf.norm()


def test_schwarz_unit_disc():
    sd = schwarz_construct(circle(512), np.conj)
    assert abs(sd(0.5) - 2) <= 1e-8
    assert abs(sd.residue() - 1) <= 1e-10


@pytest.mark.parametrize("r", [0.3, 0.7, 1.2])
def test_schwarz_disc_radius(r):
    sd = schwarz_construct(circle(256, r), np.conj)
    z = np.array([0.1 * r, 0.3j * r, -0.2 * r + 0.1j * r])
    assert np.abs(sd(z) - r**2 / z).max() <= 1e-8


def test_schwarz_offset_disc_keeps_only_the_origin_pole():
    # boundary relation zbar = 0.3 + 1/(z - 0.3); f_+ = 0.3, f_- = -1/(z - 0.3), b_1 = -1
    sd = schwarz_construct(circle(256, 1.0, 0.3), np.conj)
    z = 0.3 + 0.5
    assert abs(sd(z) - (0.3 + 1 / z)) <= 1e-8


def test_offset_disc_rational_schwarz_function_from_tail():
    # continuing f_- inward by its Laurent series recovers the rational S
    sd = schwarz_construct(circle(256, 1.0, 0.3), np.conj)
    z = 0.3 + 0.5
    tail = laurent_tail(sd.g, 25)
    assert abs(cauchy_eval(sd.g, z) - tail(z) - (0.3 + 1 / (z - 0.3))) <= 1e-8


def test_schwarz_needs_origin_inside():
    with pytest.raises(ValueError):
        schwarz_construct(circle(128, 0.5, 2.0), np.conj)


def test_schwarz_json_roundtrip():
    sd = schwarz_construct(ellipse(64, 1, 0.6), np.conj)
    back = SchwarzData.from_json(sd.to_json())
    assert abs(back(0.2 + 0.1j) - sd(0.2 + 0.1j)) <= 1e-14
    assert set(sd.to_json()) >= {"a", "tail", "curve", "g"}


def test_phi_extension_unit_disc():
    sd = schwarz_construct(circle(256), np.conj)
    assert abs(phi_extension(sd, lambda z: np.abs(z) ** 2, 1.5) - 2.25) <= 1e-10


@pytest.fixture(scope="module")
def offset_disc():
    # 1024 markers so that offsets of 0.05 clear the 5-spacing proximity limit
    c = circle(1024, 1.0, 0.3)
    sd = schwarz_construct(c, np.conj)
    m, n = c.markers[::64], c.normal()[::64]

    def dphi(p, d=1e-5):
        def phi(z):
            return phi_extension(sd, lambda w: np.abs(w) ** 2, z)
        return (phi(p + d) - phi(p - d) - 1j * (phi(p + 1j * d) - phi(p - 1j * d))) / (4 * d)
    return sd, m, n, dphi


def test_phi_extension_derivative_is_zbar_plus_f_tilde(offset_disc):
    sd, m, n, dphi = offset_disc
    out = m + 0.05 * n
    assert np.abs(dphi(out) - np.conj(out) - sd.f_tilde(out)).max() <= 1e-8


def test_phi_extension_offset_disc_consistency(offset_disc):
    # d(phi)/dz outside and S inside share boundary values; at mirrored
    # offsets they differ at first order in eps
    sd, m, n, dphi = offset_disc
    mis = {e: np.abs(dphi(m + e * n) - sd(m - e * n)).max() for e in (0.1, 0.05)}
    assert mis[0.05] <= 3 * 0.05
    assert 1.5 <= mis[0.1] / mis[0.05] <= 2.5


def test_phi_extension_offset_disc_extrapolated(offset_disc):
    sd, m, n, dphi = offset_disc

    def gap(e):
        outer = 2 * dphi(m + e * n) - dphi(m + 2 * e * n)
        inner = 2 * sd(m - e * n) - sd(m - 2 * e * n)
        return np.abs(outer - inner).max()
    assert gap(0.1) / gap(0.05) >= 3


def test_phi_extension_correction_is_harmonic():
    c = ellipse(256, 1, 0.6)
    sd = schwarz_construct(c, np.conj)

    def hpart(z):
        return phi_extension(sd, lambda w: np.abs(w) ** 2, z) - np.abs(z) ** 2
    d = 2e-3
    for z in (1.5 + 0.2j, -0.3 + 1.1j, 3.0):
        lap = (hpart(z + d) + hpart(z - d) + hpart(z + 1j * d) + hpart(z - 1j * d) - 4 * hpart(z)) / d**2
        assert abs(lap) <= 1e-6


def test_phi_extension_rejects_interior():
    sd = schwarz_construct(circle(128), np.conj)
    with pytest.raises(ValueError):
        phi_extension(sd, lambda w: np.abs(w) ** 2, 0.2)
