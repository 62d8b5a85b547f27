"""Trajectory analytics for sparse location event streams.

Ingest call-record CSVs, project them onto a local kilometer plane, compute
per-user mobility summaries (center of mass, gyration radius, principal
axes, intrinsic frame), aggregate population distributions, and fit a
truncated power law to the gyration-radius distribution. A deterministic
synthetic generator with known ground truth backs every analysis stage.
"""

from .distributions import (
    Histogram,
    PowerLawFit,
    RgBand,
    band_census,
    classify_band,
    fit_truncated_power_law,
    jump_sizes,
    rg_distribution,
    waiting_times,
)
from .errors import MobitraceError, ParseError
from .ingest import (
    CdrRecord,
    GeoPoint,
    IngestStats,
    Position,
    ingest_csv,
    ingest_stream,
    project,
    unproject,
)
from .kernel import (
    IntrinsicTrajectory,
    MobilitySummary,
    radius_of_gyration,
    rg_time_series,
    summarize,
    to_intrinsic_frame,
)
from .selftest import run_selftest
from .store import Trajectory, build_trajectories, load_trajectories_csv, write_trajectories_csv
from .synth import (
    PopulationSpec,
    TruncatedPowerLawSampler,
    UserSpec,
    gen_population,
    gen_user,
    naive_summary_oracle,
)

__version__ = "0.1.0"

_LAZY = ("MobilityFeatures", "TruncatedPowerLawMLE", "RgBandClassifier")


def __getattr__(name: str):
    # the estimator layer pulls in scikit-learn; keep that off the import
    # path of everything else
    if name in _LAZY:
        from . import estimators

        return getattr(estimators, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_LAZY))
