import numpy as np
import pytest

from dqopt import (
    DualNumber,
    DualQuaternion,
    Quaternion,
    UnitDualQuaternion,
)
from dqopt.errors import UnitValidationError
from helpers import table_dq_product

I = Quaternion(0, 1, 0, 0)
J = Quaternion(0, 0, 1, 0)
K = Quaternion(0, 0, 0, 1)
ONE = Quaternion.identity()
ZERO = Quaternion(0, 0, 0, 0)


def _rand_dq(rng):
    c = rng.standard_normal(8)
    return DualQuaternion(Quaternion(*c[:4]), Quaternion(*c[4:]))


def test_product_matches_reference():
    rng = np.random.default_rng(53)
    for _ in range(300):
        p = _rand_dq(rng)
        q = _rand_dq(rng)
        got = p * q
        std, dual = table_dq_product(
            p.std.as_array(), p.dual.as_array(), q.std.as_array(), q.dual.as_array()
        )
        assert np.allclose(got.std.as_array(), std, atol=1e-13)
        assert np.allclose(got.dual.as_array(), dual, atol=1e-13)


def test_magnitude_frozen_values():
    # |2 + i eps| = 2: the dual part vanishes since <q, q_d> = 0
    m = DualQuaternion(Quaternion(2, 0, 0, 0), I).magnitude()
    assert m == DualNumber(2.0, 0.0)

    # |(1 + i) + eps| = sqrt(2) + eps / sqrt(2)
    m = DualQuaternion(Quaternion(1, 1, 0, 0), ONE).magnitude()
    assert m.std == pytest.approx(np.sqrt(2.0), abs=1e-15)
    assert m.dual == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-15)

    # purely dual value: magnitude is the infinitesimal |q_d| eps
    m = DualQuaternion(ZERO, Quaternion(0, 3, 0, 4)).magnitude()
    assert m == DualNumber(0.0, 5.0)


def test_magnitude_squares_to_self_product():
    # |q|^2 must equal q q*, which is the independent definition
    rng = np.random.default_rng(59)
    for _ in range(300):
        q = _rand_dq(rng)
        m = q.magnitude()
        qq = q * q.conjugate()
        assert np.allclose(qq.std.as_array()[1:], 0.0, atol=1e-12)
        assert np.allclose(qq.dual.as_array()[1:], 0.0, atol=1e-12)
        assert (m * m).approx_eq(qq.as_dual_number(), tol=1e-10)


def test_inverse_frozen_value():
    inv = DualQuaternion(ONE, I).inverse()
    assert inv.approx_eq(DualQuaternion(ONE, -I), tol=1e-15)


def test_inverse_property():
    rng = np.random.default_rng(61)
    for _ in range(200):
        q = _rand_dq(rng)
        if q.std.norm() < 1e-3:
            continue
        assert (q * q.inverse()).approx_eq(DualQuaternion.identity(), tol=1e-10)
        assert (q.inverse() * q).approx_eq(DualQuaternion.identity(), tol=1e-10)


def test_square_of_mixed_element_is_real():
    # (i + j eps)^2 = -1 exactly: the dual cross terms cancel
    q = DualQuaternion(I, J)
    assert (q * q).approx_eq(DualQuaternion.from_real(-1.0), tol=0.0)


def test_from_pose_frozen_values():
    u = UnitDualQuaternion.from_pose(ONE, Quaternion(0, 2, 0, 0))
    assert u.std.approx_eq(ONE, tol=0.0)
    assert u.dual.approx_eq(I, tol=0.0)

    r = Quaternion(np.sqrt(0.5), np.sqrt(0.5), 0, 0)
    u = UnitDualQuaternion.from_pose(r, J)
    # dual part (r j) / 2 = (sqrt2 / 4)(j + k)
    expect = np.array([0.0, 0.0, np.sqrt(2.0) / 4.0, np.sqrt(2.0) / 4.0])
    assert np.allclose(u.dual.as_array(), expect, atol=1e-15)


def test_pose_roundtrip():
    rng = np.random.default_rng(67)
    for _ in range(200):
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        rot = Quaternion.exp_axis_angle(float(rng.uniform(-3, 3)), Quaternion(0, *axis))
        t = Quaternion(0, *rng.standard_normal(3))
        u = UnitDualQuaternion.from_pose(rot, t)
        assert u.as_dual_quaternion().unit_deviation() <= 1e-12
        r2, t2 = u.to_pose()
        assert r2.approx_eq(rot, tol=1e-12)
        assert t2.approx_eq(t, tol=1e-12)


def test_log_frozen_values():
    # pure translation: log(1 + i eps) = i eps
    u = UnitDualQuaternion(DualQuaternion(ONE, I))
    lg = u.log()
    assert lg.std.approx_eq(ZERO, tol=0.0)
    assert lg.dual.approx_eq(I, tol=1e-15)

    # quarter turn about z, no translation: log = (pi/4) k
    u = UnitDualQuaternion(
        DualQuaternion(Quaternion(np.sqrt(0.5), 0, 0, np.sqrt(0.5)), ZERO)
    )
    lg = u.log()
    assert np.allclose(lg.std.as_array(), [0, 0, 0, np.pi / 4], atol=1e-15)
    assert lg.dual.approx_eq(ZERO, tol=1e-15)


def test_exp_log_roundtrip():
    rng = np.random.default_rng(71)
    for _ in range(200):
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        rot = Quaternion.exp_axis_angle(float(rng.uniform(0.1, 2.8)), Quaternion(0, *axis))
        t = Quaternion(0, *rng.standard_normal(3))
        u = UnitDualQuaternion.from_pose(rot, t)
        back = UnitDualQuaternion.exp(u.log())
        assert back.std.approx_eq(u.std, tol=1e-10)
        assert back.dual.approx_eq(u.dual, tol=1e-10)


def test_canonicalized_frozen_value():
    u = UnitDualQuaternion(DualQuaternion(-K, I))
    c = u.canonicalized()
    assert c.std.approx_eq(K, tol=0.0)
    assert c.dual.approx_eq(-I, tol=0.0)
    # already-canonical values pass through unchanged
    v = UnitDualQuaternion(DualQuaternion(K, -I))
    w = v.canonicalized()
    assert w.std.approx_eq(K, tol=0.0) and w.dual.approx_eq(-I, tol=0.0)


def test_unit_validation_rejects_off_unit():
    with pytest.raises(UnitValidationError):
        UnitDualQuaternion(DualQuaternion(Quaternion(2, 0, 0, 0), ZERO))
    with pytest.raises(UnitValidationError):
        # unit standard part but nonzero inner product with the dual part
        UnitDualQuaternion(DualQuaternion(ONE, ONE))


def test_of_normalizes_nearby_values():
    q = DualQuaternion(Quaternion(1 + 2e-7, 0, 0, 0), I)
    u = UnitDualQuaternion.of(q)
    assert u.as_dual_quaternion().unit_deviation() <= 1e-12


def test_unit_product_and_inverse():
    rng = np.random.default_rng(73)
    for _ in range(200):
        a = _rand_unit(rng)
        b = _rand_unit(rng)
        prod = a * b
        assert prod.as_dual_quaternion().unit_deviation() <= 1e-12
        ident = a * a.inverse()
        assert ident.std.approx_eq(ONE, tol=1e-12)
        assert ident.dual.approx_eq(ZERO, tol=1e-12)


def _rand_unit(rng):
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    rot = Quaternion.exp_axis_angle(float(rng.uniform(-3, 3)), Quaternion(0, *axis))
    return UnitDualQuaternion.from_pose(rot, Quaternion(0, *rng.standard_normal(3)))
