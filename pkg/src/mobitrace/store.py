"""Per-user trajectory assembly and planar round-trip storage."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Union

import numpy as np

from .errors import BadCoordinate, BadPrefix, MalformedLine, ParseError
from .ingest import CdrRecord, Position, _COORD_BAD, format_timestamp, parse_timestamp

PLANAR_HEADER = "user_id,t,x_km,y_km"


@dataclass(eq=False)
class Trajectory:
    """Time-ordered planar positions of one user.

    times is int64 epoch seconds, non-decreasing; xy is float64 of shape
    (n, 2). Equal timestamps keep their input order (stable sort upstream).
    """

    user_id: str
    times: np.ndarray
    xy: np.ndarray

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=np.int64)
        self.xy = np.asarray(self.xy, dtype=np.float64)
        if self.times.ndim != 1 or self.xy.shape != (self.times.shape[0], 2):
            raise ValueError("times must be (n,), xy must be (n, 2)")
        if self.times.shape[0] < 1:
            raise ValueError("a trajectory holds at least one point")

    @property
    def n(self) -> int:
        return int(self.times.shape[0])

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.user_id == other.user_id
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.xy, other.xy)
        )

    def __repr__(self) -> str:
        return f"Trajectory({self.user_id!r}, n={self.n})"


def build_trajectories(records: Iterable[CdrRecord]) -> dict[str, Trajectory]:
    """Group records by user and time-sort each group stably.

    The returned dict iterates in sorted user_id order.
    """
    groups: dict[str, tuple[list[int], list[float], list[float]]] = {}
    for rec in records:
        bucket = groups.get(rec.user_id)
        if bucket is None:
            bucket = ([], [], [])
            groups[rec.user_id] = bucket
        bucket[0].append(rec.t)
        bucket[1].append(rec.pos.x)
        bucket[2].append(rec.pos.y)
    out: dict[str, Trajectory] = {}
    for user_id in sorted(groups):
        ts, xs, ys = groups[user_id]
        times = np.asarray(ts, dtype=np.int64)
        order = np.argsort(times, kind="stable")
        xy = np.column_stack([xs, ys])
        out[user_id] = Trajectory(user_id, times[order], xy[order])
    return out


def prefix(traj: Trajectory, k: int) -> Trajectory:
    """First k points of a trajectory (views, no copy)."""
    if not 1 <= k <= traj.n:
        raise BadPrefix(f"prefix length {k} outside 1..{traj.n}")
    return Trajectory(traj.user_id, traj.times[:k], traj.xy[:k])


def write_trajectories_csv(trajectories: dict[str, Trajectory], out: IO[str]) -> None:
    """Planar dump, bit-exact re-ingestable: floats written as repr."""
    out.write(PLANAR_HEADER + "\n")
    for user_id in sorted(trajectories):
        traj = trajectories[user_id]
        for t, (x, y) in zip(traj.times.tolist(), traj.xy.tolist()):
            out.write(f"{user_id},{format_timestamp(t)},{x!r},{y!r}\n")


def _parse_planar_float(text: str, what: str, line_no: int) -> float:
    if not text or _COORD_BAD.search(text):
        raise BadCoordinate(f"non-numeric {what} {text!r}", line_no)
    try:
        value = float(text)
    except ValueError:
        raise BadCoordinate(f"non-numeric {what} {text!r}", line_no) from None
    if value != value or value in (float("inf"), float("-inf")):
        raise BadCoordinate(f"non-finite {what} {text!r}", line_no)
    return value


def load_trajectories_csv(source: Union[str, Path, IO[str]]) -> dict[str, Trajectory]:
    """Read a planar dump back; strict, raises on any malformed row."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as handle:
            return load_trajectories_csv(handle)
    records: list[CdrRecord] = []
    line_no = 0
    first = True
    for raw in source:
        line = raw.rstrip("\r\n")
        line_no += 1
        if first:
            first = False
            if line == PLANAR_HEADER:
                continue
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise MalformedLine(f"expected 4 fields, got {len(parts)}", line_no)
        user_id, ts, x_text, y_text = parts
        if not user_id:
            raise MalformedLine("empty user_id", line_no)
        try:
            t = parse_timestamp(ts)
        except ParseError as err:
            err.line_no = line_no
            raise
        x = _parse_planar_float(x_text, "x_km", line_no)
        y = _parse_planar_float(y_text, "y_km", line_no)
        records.append(CdrRecord(user_id, t, Position(x, y)))
    return build_trajectories(records)
