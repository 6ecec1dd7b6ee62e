import numpy as np
import pytest
from scipy import stats

from blocklevy.drivers import DriverKind
from blocklevy.group_sde import PathBlowUp, Scheme, integrate_path, integrate_paths, snapshot_step
from blocklevy.hyperlinalg import Field, symplectic_defect, unitarity_defect
from blocklevy.montecarlo import estimate_moment
from blocklevy.tables import parse_table


def test_zero_time_is_identity():
    for kind in DriverKind:
        g = integrate_path(kind, 2, 2, 0.0, steps=5, seed=1)
        assert unitarity_defect(g.data, g.field) == 0.0
        assert np.all(g.block(1, 2) == 0)


def test_bad_arguments():
    with pytest.raises(ValueError):
        integrate_path("so", 1, 2, -1.0, steps=3)
    with pytest.raises(ValueError):
        integrate_paths("so", 1, 2, 1.0, steps=0)
    with pytest.raises(ValueError):
        Scheme.parse("midpoint")


def test_rotation_angle_law():
    # SO(2) with m = 2: G = exp of a 2x2 antisymmetric matrix; the angle is the summed increments
    m = 2
    batch = integrate_paths("so", 1, m, 1.0, 100, "geometric", seed=12, nsamples=10_000)
    g = batch.final
    np.testing.assert_allclose(g[:, 0, 0], g[:, 1, 1], atol=1e-12)
    theta = np.arctan2(g[:, 0, 1], g[:, 0, 0])
    assert stats.kstest(theta, "norm", args=(0, np.sqrt(1.0 / m))).pvalue > 0.01


@pytest.mark.parametrize("kind,n,m", [("so", 2, 8), ("u", 4, 4), ("sp", 2, 8), ("sp", 1, 16)])
def test_geometric_stays_on_group(kind, n, m):
    batch = integrate_paths(kind, n, m, 1.0, 100, "geometric", seed=3, nsamples=4)
    field = DriverKind.parse(kind).field
    assert unitarity_defect(batch.final, field).max() <= 1e-10
    if field is Field.QUATERNION:
        assert symplectic_defect(batch.final).max() <= 1e-8


def _mean_defect(kind, dt, sign=-1, nsamples=20_000):
    batch = integrate_paths(kind, 1, 2, 1.0, round(1 / dt), "euler", seed=4, nsamples=nsamples, drift_sign=sign)
    return unitarity_defect(batch.final, DriverKind.parse(kind).field).mean()


def test_drift_sign_decides_preservation():
    good = [_mean_defect("so", dt) for dt in (0.1, 0.05, 0.025)]
    bad = [_mean_defect("so", dt, sign=+1) for dt in (0.1, 0.05, 0.025)]
    assert good[2] < good[1] < good[0]
    # the wrong sign leaves a defect of order one however small the step
    assert min(bad) > 0.3
    assert bad[2] > 5 * good[2]


def test_snapshots_match_shorter_runs():
    final, snaps = integrate_path("u", 2, 2, 1.0, steps=100, seed=6, snapshot_times=[0.25, 0.5, 1.0])
    short = integrate_path("u", 2, 2, 0.5, steps=50, seed=6)
    np.testing.assert_array_equal(snaps[1].data, short.data)
    np.testing.assert_array_equal(snaps[2].data, final.data)
    assert snapshot_step(0.333, 1.0, 100) == 33


def test_blow_up_is_reported():
    with np.errstate(all="ignore"):
        with pytest.raises(PathBlowUp) as info:
            integrate_paths("so", 1, 4, 1e300, 50, "euler", seed=0)
    assert info.value.step < 50


@pytest.mark.slow
def test_schemes_agree_in_distribution():
    tab = parse_table("tr(u[1,1] u[1,1])")
    geo = estimate_moment(tab, "sp", 1, 2, 1.0, 20_000, scheme="geometric", seed=1)
    ito = estimate_moment(tab, "sp", 1, 2, 1.0, 20_000, steps=400, scheme="euler", seed=2)
    err = np.hypot(geo.stderr, ito.stderr)
    # Monte Carlo error plus a first-order time discretisation allowance
    assert abs(geo.mean - ito.mean) <= 3 * err + 0.01
