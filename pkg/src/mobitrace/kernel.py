"""Per-trajectory mobility metrics: gyration, principal axes, intrinsic frame.

All statistics use population (1/n) normalization and operate on coordinates
centered at the trajectory's mean position. The inertia tensor follows the
surveying convention ixx = sum(y'^2), iyy = sum(x'^2), ixy = -sum(x'y'), so
the eigenvector of the SMALLER eigenvalue points along the widest spread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Iterable, NamedTuple

import numpy as np

from .errors import DegenerateTrajectory
from .fmt import sig9
from .ingest import Position, format_timestamp
from .store import Trajectory, prefix

ISOTROPIC_EPS = 1e-12
DEGENERATE_EPS = 1e-12
_HALF_PI = math.pi / 2.0


class InertiaTensor(NamedTuple):
    """Symmetric 2x2 second-moment tensor in km^2 (iyx == ixy)."""

    ixx: float
    iyy: float
    ixy: float

    @property
    def iyx(self) -> float:
        return self.ixy

    @property
    def trace(self) -> float:
        return self.ixx + self.iyy

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.ixx, self.ixy], [self.ixy, self.iyy]])


@dataclass(frozen=True, slots=True)
class MobilitySummary:
    """Per-user derived metrics, one row of the summary table."""

    user_id: str
    n: int
    com: Position
    rg: float
    theta: float
    mu: float
    sigma_x: float
    sigma_y: float
    top_positions: tuple[tuple[Position, int], ...]
    degenerate_axis: bool


@dataclass(eq=False, slots=True)
class IntrinsicTrajectory:
    """Dimensionless (u, v) trajectory in the per-user intrinsic frame."""

    user_id: str
    times: np.ndarray
    uv: np.ndarray

    @property
    def n(self) -> int:
        return int(self.times.shape[0])


def center_of_mass(traj: Trajectory) -> Position:
    """Arithmetic mean of all recorded positions (multiplicity counts)."""
    com = traj.xy.mean(axis=0)
    return Position(com[0].item(), com[1].item())


def radius_of_gyration(traj: Trajectory) -> float:
    centered = traj.xy - traj.xy.mean(axis=0)
    return float(np.sqrt(np.mean((centered * centered).sum(axis=1))))


def rg_time_series(traj: Trajectory) -> list[tuple[int, float]]:
    """Gyration radius of every prefix; the last value is the full-trajectory
    radius bit for bit (same code path on the same memory)."""
    times = traj.times.tolist()
    return [(times[k - 1], radius_of_gyration(prefix(traj, k))) for k in range(1, traj.n + 1)]


def top_frequent_positions(traj: Trajectory, k: int) -> list[tuple[Position, int]]:
    """Most visited exact positions, ties broken by first occurrence."""
    counts: dict[tuple[float, float], list[int]] = {}
    for idx, point in enumerate(traj.xy.tolist()):
        key = (point[0], point[1])
        entry = counts.get(key)
        if entry is None:
            counts[key] = [1, idx]
        else:
            entry[0] += 1
    ranked = sorted(counts.items(), key=lambda item: (-item[1][0], item[1][1]))
    return [(Position(key[0], key[1]), entry[0]) for key, entry in ranked[:k]]


def inertia_tensor(traj: Trajectory) -> InertiaTensor:
    """Second moments about the center of mass (sums, not means)."""
    centered = traj.xy - traj.xy.mean(axis=0)
    cx = centered[:, 0]
    cy = centered[:, 1]
    return InertiaTensor(
        ixx=float(np.sum(cy * cy)),
        iyy=float(np.sum(cx * cx)),
        ixy=float(-np.sum(cx * cy)),
    )


def eigenvalue_gap(tensor: InertiaTensor) -> float:
    """lambda_plus - lambda_minus of the tensor, always >= 0."""
    return math.hypot(tensor.ixx - tensor.iyy, 2.0 * tensor.ixy)


def is_isotropic(tensor: InertiaTensor) -> bool:
    return eigenvalue_gap(tensor) <= ISOTROPIC_EPS * tensor.trace


def principal_angle(tensor: InertiaTensor) -> float:
    """Orientation of the widest-spread axis, in [0, pi).

    This is the eigenvector direction of the smaller eigenvalue. Isotropic
    tensors have no preferred axis and resolve to 0 by convention.
    """
    if is_isotropic(tensor):
        return 0.0
    theta = 0.5 * math.atan2(-2.0 * tensor.ixy, tensor.iyy - tensor.ixx)
    theta %= math.pi
    if theta >= math.pi:  # fp wrap of a tiny negative input
        theta = 0.0
    return theta


def cos_principal_angle_closed_form(tensor: InertiaTensor) -> float:
    """Closed-form cosine of the principal angle.

    Diagnostic only: undefined (nan) for axis-aligned tensors where the
    denominator vanishes; the eigen route above has no such hole.
    """
    d = 0.5 * tensor.ixx - 0.5 * tensor.iyy + 0.5 * eigenvalue_gap(tensor)
    if d == 0.0:
        return math.nan
    return (-tensor.ixy / d) / math.sqrt(1.0 + (tensor.ixy * tensor.ixy) / (d * d))


def sigma_axes(traj: Trajectory, theta: float) -> tuple[float, float]:
    """Population standard deviations along the axes of the frame rotated
    by theta. A component at relative floor 1e-12 snaps to exactly 0."""
    centered = traj.xy - traj.xy.mean(axis=0)
    c = math.cos(theta)
    s = math.sin(theta)
    u = centered[:, 0] * c + centered[:, 1] * s
    v = -centered[:, 0] * s + centered[:, 1] * c
    sigma_u = float(np.sqrt(np.mean(u * u)))
    sigma_v = float(np.sqrt(np.mean(v * v)))
    if sigma_v <= DEGENERATE_EPS * sigma_u:
        sigma_v = 0.0
    elif sigma_u <= DEGENERATE_EPS * sigma_v:
        sigma_u = 0.0
    return sigma_u, sigma_v


def summarize(traj: Trajectory) -> MobilitySummary:
    """All per-user metrics in one record, major axis first."""
    com = center_of_mass(traj)
    rg = radius_of_gyration(traj)
    tensor = inertia_tensor(traj)
    mu = eigenvalue_gap(tensor)
    theta = principal_angle(tensor)
    sigma_u, sigma_v = sigma_axes(traj, theta)
    if sigma_v > sigma_u:
        sigma_u, sigma_v = sigma_v, sigma_u
        theta = (theta + _HALF_PI) % math.pi
    return MobilitySummary(
        user_id=traj.user_id,
        n=traj.n,
        com=com,
        rg=rg,
        theta=theta,
        mu=mu,
        sigma_x=sigma_u,
        sigma_y=sigma_v,
        top_positions=tuple(top_frequent_positions(traj, 2)),
        degenerate_axis=sigma_v == 0.0,
    )


def to_intrinsic_frame(traj: Trajectory) -> IntrinsicTrajectory:
    """Center, rotate the major axis onto u, and standardize both axes.

    The most frequent position lands at u >= 0 (rotate by pi if needed);
    a degenerate minor axis is emitted as exact zeros instead of 0/0.
    """
    summary = summarize(traj)
    # identical points can leave a phantom rg of pure roundoff (mean
    # subtraction at large coordinates), so test the configuration too
    if summary.rg == 0.0 or bool(np.all(traj.xy == traj.xy[0])):
        raise DegenerateTrajectory(f"all {traj.n} points of {traj.user_id!r} coincide")
    centered = traj.xy - traj.xy.mean(axis=0)
    c = math.cos(summary.theta)
    s = math.sin(summary.theta)
    u = (centered[:, 0] * c + centered[:, 1] * s) / summary.sigma_x
    if summary.degenerate_axis:
        v = np.zeros_like(u)
    else:
        v = (-centered[:, 0] * s + centered[:, 1] * c) / summary.sigma_y
    top = summary.top_positions[0][0]
    top_u = (top.x - summary.com.x) * c + (top.y - summary.com.y) * s
    if top_u < 0.0:
        u = -u
        if not summary.degenerate_axis:
            v = -v
    return IntrinsicTrajectory(traj.user_id, traj.times, np.column_stack([u, v]))


# -- tabular output ----------------------------------------------------------

SUMMARY_HEADER = (
    "user_id,n,x_cm,y_cm,rg_km,theta_rad,mu_km2,sigma_x_km,sigma_y_km,"
    "degenerate,top1_x,top1_y,top1_n,top2_x,top2_y,top2_n"
)
INTRINSIC_HEADER = "user_id,t,u,v"


def write_summary_csv(summaries: Iterable[MobilitySummary], out: IO[str]) -> None:
    """Summary table sorted by user_id, 9 significant digits."""
    out.write(SUMMARY_HEADER + "\n")
    for summary in sorted(summaries, key=lambda item: item.user_id):
        tops = []
        for pos, count in summary.top_positions[:2]:
            tops += [sig9(pos.x), sig9(pos.y), str(count)]
        while len(tops) < 6:
            tops.append("")
        out.write(
            ",".join(
                [
                    summary.user_id,
                    str(summary.n),
                    sig9(summary.com.x),
                    sig9(summary.com.y),
                    sig9(summary.rg),
                    sig9(summary.theta),
                    sig9(summary.mu),
                    sig9(summary.sigma_x),
                    sig9(summary.sigma_y),
                    "1" if summary.degenerate_axis else "0",
                ]
                + tops
            )
            + "\n"
        )


def write_intrinsic_csv(intrinsics: Iterable[IntrinsicTrajectory], out: IO[str]) -> None:
    """Intrinsic-frame point dump sorted by user_id then time."""
    out.write(INTRINSIC_HEADER + "\n")
    for intr in sorted(intrinsics, key=lambda item: item.user_id):
        for t, (u, v) in zip(intr.times.tolist(), intr.uv.tolist()):
            out.write(f"{intr.user_id},{format_timestamp(t)},{sig9(u)},{sig9(v)}\n")
