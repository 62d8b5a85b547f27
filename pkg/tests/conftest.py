import math

import numpy as np
import pytest

from mobitrace.ingest import GeoPoint
from mobitrace.store import Trajectory

REL_TOL = 1e-9


def rel_close(a, b, tol=REL_TOL):
    den = max(abs(a), abs(b))
    if den == 0.0:
        return True
    return abs(a - b) / den <= tol


def angle_close(a, b, tol=REL_TOL):
    d = abs(a - b) % math.pi
    return min(d, math.pi - d) <= tol


@pytest.fixture
def ref():
    return GeoPoint(49.49, 0.12)


def traj(points, user_id="u", times=None):
    """Trajectory from a plain list of (x, y) with sequential timestamps."""
    xy = np.asarray(points, dtype=np.float64)
    if times is None:
        times = np.arange(len(xy), dtype=np.int64) * 60
    return Trajectory(user_id, np.asarray(times, dtype=np.int64), xy)
