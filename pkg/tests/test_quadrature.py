import json

import numpy as np
import pytest

from hele_shaw.cauchy import schwarz_construct
from hele_shaw.core import circle, signed_area
from hele_shaw.quadrature import (
    NotQuadratureDomainError, QuadratureData, polynomial_map_curve, quad_check, quad_from_schwarz,
    quad_residual,
)


def disc_data(r, c):
    return QuadratureData((c,), (1,), ((np.pi * r**2,),))


def test_disc_mean_value():
    assert quad_check(circle(256, 0.7, 0.2), disc_data(0.7, 0.2), 6) <= 1e-8


def test_disc_perturbed_coefficient():
    qd = QuadratureData((0.2,), (1,), ((np.pi * 0.49 + 0.05,),))
    assert abs(quad_check(circle(256, 0.7, 0.2), qd, 6) - 0.05) <= 1e-8


def test_node_outside_raises():
    with pytest.raises(ValueError):
        quad_check(circle(128), disc_data(1.0, 2.0), 3)


def test_polynomial_map_area():
    curve, qd = polynomial_map_curve(1.0, 0.3, 256)
    assert abs(qd.coeffs[0][0] - 1.18 * np.pi) <= 1e-12
    assert abs(qd.coeffs[0][1] - 0.3 * np.pi) <= 1e-12
    assert quad_check(curve, qd, 6) <= 1e-6


def test_polynomial_map_degenerates_to_disc():
    curve, qd = polynomial_map_curve(1.0, 0.0, 128)
    assert qd.order == 1 and abs(qd.coeffs[0][0] - np.pi) <= 1e-12


def test_polynomial_map_not_univalent():
    with pytest.raises(ValueError):
        polynomial_map_curve(1.0, 0.6, 128)


@pytest.mark.parametrize("a, b", [(1.0, 0.3), (1.0, -0.2), (2.0, 0.5), (0.7, 0.1)])
def test_polynomial_map_area_matches_polygon(a, b):
    curve, qd = polynomial_map_curve(a, b, 4096)
    c00 = qd.coeffs[0][0].real
    # the polygon area converges at O(n^-2); 4096 markers bring it within 1e-6 c00
    assert abs(signed_area(curve) - c00) <= 1e-6 * c00


@pytest.mark.parametrize("r", [0.3, 0.7, 1.2])
def test_quad_from_schwarz_centred_discs(r):
    qd = quad_from_schwarz(schwarz_construct(circle(256, r), np.conj))
    assert qd.nodes == (0j,) and abs(qd.coeffs[0][0] - np.pi * r**2) <= 1e-6
    assert quad_check(circle(256, r), qd, 6) <= 1e-8


@pytest.mark.parametrize("r", [0.3, 0.7, 1.2])
def test_quad_from_schwarz_off_centre_disc(r):
    # node fixed at 0: build the data on the centred disc, then translate the identity
    c = 0.2 + 0.1j
    qd = quad_from_schwarz(schwarz_construct(circle(256, r), np.conj))
    moved = QuadratureData((c,), (1,), qd.coeffs)
    assert abs(moved.coeffs[0][0] - np.pi * r**2) <= 1e-6
    assert quad_check(circle(256, r, c), moved, 6) <= 1e-6 * max(1, r) ** 6


def test_quad_from_schwarz_unit_disc():
    qd = quad_from_schwarz(schwarz_construct(circle(512), np.conj))
    assert abs(qd.coeffs[0][0] - np.pi) <= 1e-10


def test_quad_from_schwarz_needs_model_potential():
    sd = schwarz_construct(circle(128), lambda z: 2 * np.conj(z) + z)
    with pytest.raises(ValueError):
        quad_from_schwarz(sd)


def test_zero_residue_is_not_a_quadrature_domain():
    sd = schwarz_construct(circle(128), np.conj)
    object.__setattr__(sd, "a", 0j)
    with pytest.raises(NotQuadratureDomainError):
        quad_from_schwarz(sd)


def test_higher_monomial_on_polynomial_map():
    curve, qd = polynomial_map_curve(1.0, 0.3, 256)
    e5 = np.zeros(6)
    e5[5] = 1.0
    base = np.pad([1.0, 0.5, 0.25], (0, 3))
    assert quad_residual(curve, qd, base + 1e-3 * e5) <= 1e-6


@pytest.mark.parametrize("bad", [
    dict(nodes=(0j, 0j), mult=(1, 1), coeffs=((1,), (1,))),
    dict(nodes=(0j,), mult=(2,), coeffs=((1,),)),
    dict(nodes=(0j,), mult=(1,), coeffs=((0,),)),
    dict(nodes=(0j,), mult=(1,), coeffs=((1j,),)),
])
def test_quadrature_data_validation(bad):
    with pytest.raises(ValueError):
        QuadratureData(**bad)


def test_quadrature_json_roundtrip():
    _, qd = polynomial_map_curve(1.0, 0.3, 64)
    obj = json.loads(qd.dumps())
    assert set(obj) == {"nodes", "mult", "coeffs"}
    assert QuadratureData.from_json(obj) == qd
