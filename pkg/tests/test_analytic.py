import mpmath as mp
import numpy as np
import pytest

from gradedbem.analytic import (
    SphereScene,
    incident_pressure,
    legendre,
    legendre_all,
    reference_field,
    scattered_pressure,
    sph_bessel_j,
    sph_hankel2,
    sph_jn_all,
    sph_yn_all,
    total_pressure,
    _derivative,
)
from gradedbem.grids import make_eqa_grid
from gradedbem.waves import FOUR_PI, Medium

mp.mp.dps = 50


def mp_sph_j(n, x):
    x = mp.mpf(x)
    return mp.sqrt(mp.pi / (2 * x)) * mp.besselj(n + mp.mpf(1) / 2, x)


def mp_sph_y(n, x):
    x = mp.mpf(x)
    return mp.sqrt(mp.pi / (2 * x)) * mp.bessely(n + mp.mpf(1) / 2, x)


# -- Legendre -----------------------------------------------------------------


def test_legendre_anchors():
    assert legendre(0, 0.123) == 1.0
    np.testing.assert_allclose(legendre(2, 0.5), -0.125, rtol=1e-15)
    ones = legendre_all(200, np.array([1.0]))
    np.testing.assert_allclose(ones[:, 0], 1.0, rtol=1e-12)


def test_legendre_rejects_out_of_range():
    with pytest.raises(ValueError):
        legendre(3, 1.5)


def test_legendre_matches_high_precision():
    xs = [-0.99, -0.5, 0.0, 0.3, 0.97]
    for n in (1, 2, 10, 60, 125):
        got = legendre_all(n, np.array(xs))[n]
        want = [float(mp.legendre(n, x)) for x in xs]
        np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-13)


# -- spherical Bessel / Hankel ------------------------------------------------


def test_j0_at_pi_vanishes():
    assert abs(sph_bessel_j(0, np.pi)) < 1e-12


def test_h2_zero_order_closed_form():
    for x in (1.0, 5.0, 20.0):
        want = 1j * np.exp(-1j * x) / x
        assert abs(sph_hankel2(0, x) - want) < 1e-12


def test_wronskian_identity():
    for x in (0.5, 5.0, 50.0):
        arr = np.array([x])
        j = sph_jn_all(61, arr)
        y, valid = sph_yn_all(61, arr)
        assert valid[0] >= 62
        dj = _derivative(j, arr)
        dy = _derivative(y, arr)
        w = (j * dy - dj * y)[:, 0]
        for n in (0, 10, 60):
            assert abs(w[n] * x**2 - 1.0) < 1e-10


def test_bessel_spot_values_match_high_precision():
    orders = (0, 1, 5, 25, 60, 125, 200)
    args = (1e-3, 0.5, 5.0, 50.0, 450.0)
    checked = 0
    for x in args:
        arr = np.array([x])
        j = sph_jn_all(200, arr)[:, 0]
        y, valid = sph_yn_all(200, arr)
        for n in orders:
            want_j = mp_sph_j(n, x)
            if abs(want_j) > 1e-280:  # skip the denormal underflow zone
                np.testing.assert_allclose(j[n], float(want_j), rtol=1e-10)
                checked += 1
            want_y = mp_sph_y(n, x)
            if n + 1 <= valid[0]:
                np.testing.assert_allclose(y[n, 0], float(want_y), rtol=1e-10)
                checked += 1
            else:  # overflow was the reason this order is unavailable
                assert abs(want_y) > 1e280
    assert checked >= 20


def test_bessel_derivatives_match_high_precision():
    for n, x in ((1, 0.7), (10, 5.0), (40, 30.0)):
        got = sph_bessel_j(n, x, derivative=True)
        h = mp.mpf("1e-20")
        want = (mp_sph_j(n, mp.mpf(x) + h) - mp_sph_j(n, mp.mpf(x) - h)) / (2 * h)
        np.testing.assert_allclose(got, float(want), rtol=1e-10)


def test_hankel_rejects_bad_arguments():
    with pytest.raises(ValueError):
        sph_hankel2(3, 0.0)
    with pytest.raises(ValueError):
        sph_hankel2(3, -1.0)
    with pytest.raises(OverflowError):
        sph_hankel2(125, 0.01)


# -- incident field -----------------------------------------------------------


def scene(k, source=(0.0, 0.2, 0.0), radius=0.1, order=125):
    return SphereScene(radius_m=radius, source_m=np.array(source), k=k, order=order)


def test_incident_static_value():
    s = scene(0.0, source=(0.0, 1.0, 0.0))
    got = incident_pressure(s, np.array([[0.0, 0.0, 0.0]]))
    np.testing.assert_allclose(got, 1.0 / FOUR_PI, rtol=1e-15)


def test_incident_inverse_distance_law():
    s = scene(30.0)
    d1 = np.array([[0.0, 0.2 + 0.5, 0.0]])
    d2 = np.array([[0.0, 0.2 + 1.0, 0.0]])
    p1, p2 = abs(incident_pressure(s, d1)[0]), abs(incident_pressure(s, d2)[0])
    np.testing.assert_allclose(p1 / p2, 2.0, rtol=1e-12)


def test_incident_phase_periodicity():
    k = 25.0
    lam = 2 * np.pi / k
    s = scene(k)
    p1 = incident_pressure(s, np.array([[0.0, 0.2 + lam, 0.0]]))[0]
    p2 = incident_pressure(s, np.array([[0.0, 0.2 + 2 * lam, 0.0]]))[0]
    assert abs(np.angle(p1) - np.angle(p2)) < 1e-10


def test_incident_rejects_source_point():
    s = scene(10.0)
    with pytest.raises(ValueError):
        incident_pressure(s, np.array([[0.0, 0.2, 0.0]]))


# -- scattered field ----------------------------------------------------------


def test_rigid_boundary_radial_velocity_vanishes():
    # source at twice the radius, kR = 2; radial derivative of the total
    # field on the surface via a one-sided second-order difference
    k = 20.0
    s = scene(k, source=(0.0, 0.2, 0.0))
    rng = np.random.default_rng(19)
    d = rng.normal(size=(100, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    h = 3e-5
    r0, r1, r2 = (total_pressure(s, d * (0.1 + i * h)) for i in range(3))
    dp_tot = (-3 * r0 + 4 * r1 - r2) / (2 * h)
    i0, i1, i2 = (incident_pressure(s, d * (0.1 + i * h)) for i in range(3))
    dp_inc = (-3 * i0 + 4 * i1 - i2) / (2 * h)
    assert np.abs(dp_tot).max() / np.abs(dp_inc).max() < 1e-6


def test_truncation_order_60_suffices_at_grid_radius():
    d = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -0.3, 1.0] / np.linalg.norm([0.0, -0.3, 1.0])])
    pts = 1.2 * d
    for kR in (2.0, 10.0):
        k = kR / 0.1
        lo = scattered_pressure(scene(k, source=(0.0, 0.101, 0.0), order=60), pts)
        hi = scattered_pressure(scene(k, source=(0.0, 0.101, 0.0), order=125), pts)
        assert np.max(np.abs(lo - hi) / np.abs(hi)) < 1e-8


def test_last_term_is_negligible_at_full_order():
    pts = 1.2 * np.array([[0.6, 0.8, 0.0]])
    for kR in (0.5, 2.0, 10.0):
        k = kR / 0.1
        s124 = scattered_pressure(scene(k, source=(0.0, 0.101, 0.0), order=124), pts)
        s125 = scattered_pressure(scene(k, source=(0.0, 0.101, 0.0), order=125), pts)
        assert abs(s125 - s124) < 1e-13 * abs(s125)


def test_small_k_limit_is_rayleigh_weak():
    # a source well away from the sphere: the static image correction of a
    # grazing source would dominate, so distance matters here
    k = 0.1  # kR = 0.01
    s = scene(k, source=(0.0, 1.0, 0.0))
    pts = 1.2 * np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]])
    ratio = np.abs(scattered_pressure(s, pts)) / np.abs(incident_pressure(s, pts))
    assert np.all(ratio < 1e-3)


def test_zero_k_scatters_nothing():
    s = scene(0.0)
    got = scattered_pressure(s, 1.2 * np.eye(3))
    assert np.all(got == 0)


def test_scattered_rejects_interior_points():
    with pytest.raises(ValueError):
        scattered_pressure(scene(10.0), np.array([[0.05, 0.0, 0.0]]))


def test_forced_truncation_without_convergence_reports_overflow():
    # source grazing the surface and evaluation on it: the series tail decays
    # too slowly to absorb the y_n overflow at kR = 0.01
    s = SphereScene(radius_m=0.1, source_m=np.array([0.0, 0.1000001, 0.0]), k=0.1)
    with pytest.raises(OverflowError):
        scattered_pressure(s, np.array([[0.1, 0.0, 0.0]]))


def test_series_matches_high_precision_oracle():
    # independent evaluation of the same partial-wave sum with mpmath
    k, R, a = 36.6, 0.1, 0.101
    pts = np.array([[0.0, 1.2, 0.0], [0.8485281374238570, -0.8485281374238570, 0.0]])
    got = scattered_pressure(SphereScene(radius_m=R, source_m=np.array([0.0, a, 0.0]), k=k), pts)

    def mp_h2(n, x):
        return mp_sph_j(n, x) - 1j * mp_sph_y(n, x)

    def mp_dj(n, x):
        return mp_sph_j(n - 1, x) - (n + 1) / mp.mpf(x) * mp_sph_j(n, x) if n else -mp_sph_j(1, x)

    def mp_dh2(n, x):
        return mp_h2(n - 1, x) - (n + 1) / mp.mpf(x) * mp_h2(n, x) if n else -mp_h2(1, x)

    for point, value in zip(pts, got):
        r = float(np.linalg.norm(point))
        cosb = float(point[1] / r)
        total = mp.mpc(0)
        for n in range(126):
            total += (
                (2 * n + 1)
                * mp_h2(n, k * a)
                * (mp_dj(n, k * R) / mp_dh2(n, k * R))
                * mp_h2(n, k * r)
                * mp.legendre(n, cosb)
            )
        want = complex(1j * k / (4 * mp.pi) * total)
        np.testing.assert_allclose(value, want, rtol=1e-10)


def test_reciprocal_symmetry_in_radii():
    k = 25.0
    d = np.array([1.0, 2.0, -0.5])
    d /= np.linalg.norm(d)
    a, r = 0.3, 0.9
    p1 = scattered_pressure(
        SphereScene(radius_m=0.1, source_m=np.array([0.0, a, 0.0]), k=k), np.array([r * d])
    )
    p2 = scattered_pressure(
        SphereScene(radius_m=0.1, source_m=np.array([0.0, r, 0.0]), k=k), np.array([a * d])
    )
    np.testing.assert_allclose(p1, p2, rtol=1e-12)


# -- reference field on a grid ------------------------------------------------


def test_reference_field_axisymmetry():
    grid = make_eqa_grid(1.2, 30.0, 30.0)
    field = reference_field(0.1, np.array([0.0, 0.101, 0.0]), grid, [1000.0])
    lat = grid.coordinates[:, 0]
    ring = np.flatnonzero(lat == 0.0)  # same angle to the +y source axis
    vals = field.values[0, ring]
    assert np.max(np.abs(vals - vals[0])) < 1e-12 * abs(vals[0])


def test_reference_field_head_shadow():
    grid = make_eqa_grid(1.2, 30.0, 90.0)
    k = 50.0  # kR = 5
    f = k * Medium().c / (2 * np.pi)
    field = reference_field(0.1, np.array([0.0, 0.101, 0.0]), grid, [f])
    near = np.abs(field.values[0, np.argmax(grid.points[:, 1])])
    far = np.abs(field.values[0, np.argmin(grid.points[:, 1])])
    assert near > far


def test_reference_field_static_equals_incident():
    grid = make_eqa_grid(1.2, 45.0, 90.0)
    field = reference_field(0.1, np.array([0.0, 0.101, 0.0]), grid, [0.0])
    s = SphereScene(radius_m=0.1, source_m=np.array([0.0, 0.101, 0.0]), k=0.0)
    np.testing.assert_allclose(field.values[0], incident_pressure(s, grid.points), rtol=1e-12)


def test_reference_field_csv_roundtrip(tmp_path):
    from gradedbem.fields import PressureField

    grid = make_eqa_grid(1.2, 90.0, 90.0)
    field = reference_field(0.1, np.array([0.0, 0.101, 0.0]), grid, [500.0, 1000.0])
    path = tmp_path / "field.csv"
    field.save_csv(path)
    back = PressureField.load_csv(path)
    np.testing.assert_array_equal(back.freqs_hz, field.freqs_hz)
    np.testing.assert_array_equal(back.values, field.values)


def test_scene_invariants():
    with pytest.raises(ValueError):
        SphereScene(radius_m=0.1, source_m=np.array([0.0, 0.05, 0.0]), k=1.0)
    with pytest.raises(ValueError):
        SphereScene(radius_m=0.1, source_m=np.array([0.0, 0.2, 0.0]), k=-1.0)
    with pytest.raises(ValueError):
        SphereScene(radius_m=0.1, source_m=np.array([0.0, 0.2, 0.0]), k=1.0, order=0)
