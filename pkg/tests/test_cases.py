import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eulerbench.cases import (DATA_DIR_ENV, REFERENCE_FILE, ShockTubeParams, VortexParams,
                              element_averages, extract_centerline, load_reference_profile,
                              shock_init, vortex_primitives, vortex_state)
from eulerbench.core import GasModel, primitives
from eulerbench.errors import MalformedReference, NoCenterlineRow
from eulerbench.mesh import build_uniform_mesh

GAS = GasModel(1.4)


def test_vortex_far_field_is_mean_state():
    rho, u, v, p = vortex_primitives(5.0, 5.0)
    for got, mean in zip((rho, u, v, p), (1.0, 1.0, 0.0, 1.0)):
        assert abs(got - mean) < 1e-10


def test_vortex_centre_density():
    g, eps = 1.4, 5.0
    expected = (1 - (g - 1) * eps ** 2 * math.e / (8 * g * math.pi ** 2)) ** (1 / (g - 1))
    rho, u, v, _ = vortex_primitives(0.0, 0.0)
    assert rho == pytest.approx(expected, rel=1e-14)
    # the closed form evaluates to 0.493807; the quoted 0.49359 is slightly off
    assert rho == pytest.approx(0.49359, abs=5e-4)
    assert u == 1.0 and v == 0.0


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_vortex_advects_with_wrap(x, y):
    a = vortex_state(x, y, 1.0)
    b = vortex_state(x - 1.0, y, 0.0)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-14)


def test_vortex_is_isentropic():
    rng = np.random.default_rng(0)
    x, y = rng.uniform(-5, 5, (2, 500))
    rho, _, _, p = vortex_primitives(x, y, 0.3)
    np.testing.assert_allclose(p / rho ** 1.4, 1.0, rtol=0, atol=1e-12)


def test_vortex_conserved_round_trip():
    x = np.linspace(-5, 5, 11)
    prim = primitives(vortex_state(x, 0.3 * x), GAS)
    ref = vortex_primitives(x, 0.3 * x)
    for a, b in zip(prim[:4], ref):
        np.testing.assert_allclose(a, b, rtol=1e-13)


def test_vortex_defaults():
    p = VortexParams()
    assert (p.epsilon, p.rho, p.u, p.v, p.p, p.bounds, p.t_final) == (
        5.0, 1.0, 1.0, 0.0, 1.0, (-5.0, 5.0, -5.0, 5.0), 1.0)


@pytest.mark.parametrize("x, y, expected", [
    (0.0, 0.0, (1.0, 0.0, 0.0, 2.5)),
    (1.0, 0.0, (0.125, 0.0, 0.0, 0.25)),
    (0.0, -0.39, (1.0, 0.0, 0.0, 2.5)),
    (0.3, 0.3, (0.125, 0.0, 0.0, 0.25)),
])
def test_shock_init_states(x, y, expected):
    np.testing.assert_allclose(shock_init(x, y), expected, rtol=0, atol=1e-15)


def test_shock_defaults():
    p = ShockTubeParams()
    assert (p.bounds, p.radius, p.t_final) == ((-1.0, 1.0, -1.0, 1.0), 0.4, 0.25)


def test_shock_init_is_radially_symmetric():
    mesh = build_uniform_mesh(40, 40, (-1.0, 1.0, -1.0, 1.0))
    avg = element_averages(mesh, shock_init, 4)[0].reshape(40, 40)
    for mirrored in (avg.T, avg[::-1], avg[:, ::-1]):
        np.testing.assert_allclose(avg, mirrored, rtol=0, atol=1e-15)


def test_centerline_of_initial_field_brackets_radius():
    mesh = build_uniform_mesh(40, 40, (-1.0, 1.0, -1.0, 1.0))
    xc, yc = mesh.point_grid(np.zeros(1))
    rho = shock_init(xc[:, 0], yc[:, 0])[0]
    x, r = extract_centerline(rho, mesh, "x")
    assert np.all(np.diff(x) > 0)
    jumps = np.flatnonzero(np.diff(r) != 0)
    assert len(jumps) == 2
    for j in jumps:
        lo, hi = sorted((abs(x[j]), abs(x[j + 1])))
        assert lo < 0.4 < hi
    y, ry = extract_centerline(rho, mesh, "y")
    assert np.array_equal(r, ry)


def test_centerline_requires_axis_in_domain():
    mesh = build_uniform_mesh(4, 4, (0.5, 1.0, 0.5, 1.0))
    with pytest.raises(NoCenterlineRow):
        extract_centerline(np.ones(16), mesh, "x")
    with pytest.raises(NoCenterlineRow):
        extract_centerline(np.ones(16), mesh, "y")
    with pytest.raises(ValueError):
        extract_centerline(np.ones(16), build_uniform_mesh(4, 4, (-1, 1, -1, 1)), "z")


def test_element_averages_of_polynomial_are_exact():
    mesh = build_uniform_mesh(3, 2, (0.0, 3.0, 0.0, 2.0))
    avg = element_averages(mesh, lambda x, y: np.stack([x ** 2, x * y]), 3)
    xc = np.tile(np.arange(3) + 0.5, 2)
    yc = np.repeat(np.arange(2) + 0.5, 3)
    np.testing.assert_allclose(avg[0], xc ** 2 + 1 / 12, rtol=1e-14)
    np.testing.assert_allclose(avg[1], xc * yc, rtol=1e-14)


def test_shipped_reference_profile_loads():
    ref = load_reference_profile()
    assert ref.x[0] == pytest.approx(-1.0) and ref.x[-1] == pytest.approx(1.0)
    assert np.all(np.diff(ref.x) > 0)
    assert ref.header
    # symmetric about the origin and bounded by the initial states
    np.testing.assert_allclose(ref.rho, ref.rho[::-1], atol=1e-12)
    assert 0.1 < ref.rho.min() and ref.rho.max() <= 1.0
    assert ref.at(0.95) == pytest.approx(0.125, abs=1e-3)


def test_reference_profile_honours_data_dir(tmp_path, monkeypatch):
    (tmp_path / REFERENCE_FILE).write_text("# test\n-1 0.5\n1 0.25\n")
    monkeypatch.setenv(DATA_DIR_ENV, str(tmp_path))
    ref = load_reference_profile()
    assert ref.at(0.0) == pytest.approx(0.375)
    assert ref.header == ("test",)


@pytest.mark.parametrize("text", [
    "0 0.5 1\n1 0.5\n",
    "0 a\n1 0.5\n",
    "0 0.5\n",
    "1 0.5\n0 0.5\n",
    "0 0.5\n1 1.2\n",
    "0 0.0\n1 0.5\n",
])
def test_malformed_reference(tmp_path, text):
    path = tmp_path / "ref.dat"
    path.write_text(text)
    with pytest.raises(MalformedReference):
        load_reference_profile(path)


def test_missing_reference_file(tmp_path):
    with pytest.raises(MalformedReference):
        load_reference_profile(tmp_path / "absent.dat")
