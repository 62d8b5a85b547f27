"""CDR text-stream parsing and local planar projection.

Input rows are ``user_id,timestamp,lat,lon`` with strict whole-second UTC
timestamps. Parsing is total: a bad row becomes a counted rejection and the
stream keeps going. Accepted rows are projected onto a kilometer plane around
a reference point (given, or the mean of the accepted coordinates).
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import IO, Iterable, Iterator, NamedTuple

import numpy as np

from .errors import (
    BadCoordinate,
    BadTimestamp,
    EmptyInput,
    MalformedLine,
    OutOfProjectionRange,
    ParseError,
)

logger = logging.getLogger("mobitrace.ingest")

EARTH_RADIUS_KM = 6371.0088
PROJECTION_GUARD_DEG = 5.0
RAW_HEADER = "user_id,timestamp,lat,lon"
REASON_WINDOW = "WindowExcluded"

_DEG = math.pi / 180.0
_EPOCH_ORDINAL = 719163  # proleptic ordinal of 1970-01-01
_COORD_BAD = re.compile(r"[^0-9+\-.eE]")


class GeoPoint(NamedTuple):
    """Geographic coordinate in degrees."""

    lat: float
    lon: float


class Position(NamedTuple):
    """Planar coordinate in kilometers east/north of the reference."""

    x: float
    y: float


class GeoRecord(NamedTuple):
    """One parsed row before projection."""

    user_id: str
    t: int
    point: GeoPoint


class CdrRecord(NamedTuple):
    """One projected activity event."""

    user_id: str
    t: int
    pos: Position


# -- timestamps --------------------------------------------------------------

_month_start: dict[int, int] = {}  # (year << 4 | month) -> ordinal of day 1
_day_text: dict[int, str] = {}  # day ordinal offset from epoch -> "YYYY-MM-DD"

_MDAYS = (0, 31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)


def _days_in_month(year: int, month: int) -> int:
    if month == 2 and year % 4 == 0 and (year % 100 != 0 or year % 400 == 0):
        return 29
    return _MDAYS[month]


def parse_timestamp(text: str) -> int:
    """Parse ``YYYY-MM-DDThh:mm:ssZ`` into epoch seconds, strictly."""
    if (
        len(text) != 20
        or text[4] != "-"
        or text[7] != "-"
        or text[10] != "T"
        or text[13] != ":"
        or text[16] != ":"
        or text[19] != "Z"
    ):
        raise BadTimestamp(f"bad timestamp {text!r}")
    digits = text[0:4] + text[5:7] + text[8:10] + text[11:13] + text[14:16] + text[17:19]
    if not (digits.isascii() and digits.isdigit()):
        raise BadTimestamp(f"bad timestamp {text!r}")
    year = int(digits[0:4])
    month = int(digits[4:6])
    day = int(digits[6:8])
    hour = int(digits[8:10])
    minute = int(digits[10:12])
    second = int(digits[12:14])
    if not 1 <= month <= 12:
        raise BadTimestamp(f"bad month in {text!r}")
    if year < 1 or day < 1 or day > _days_in_month(year, month):
        raise BadTimestamp(f"bad day in {text!r}")
    if hour > 23 or minute > 59 or second > 59:
        raise BadTimestamp(f"bad time of day in {text!r}")
    key = (year << 4) | month
    base = _month_start.get(key)
    if base is None:
        base = date(year, month, 1).toordinal()
        _month_start[key] = base
    days = base + day - 1 - _EPOCH_ORDINAL
    return days * 86400 + hour * 3600 + minute * 60 + second


def format_timestamp(t: int) -> str:
    """Inverse of parse_timestamp."""
    days, rest = divmod(int(t), 86400)
    daytext = _day_text.get(days)
    if daytext is None:
        daytext = date.fromordinal(days + _EPOCH_ORDINAL).isoformat()
        _day_text[days] = daytext
    hour, rest = divmod(rest, 3600)
    minute, second = divmod(rest, 60)
    return f"{daytext}T{hour:02d}:{minute:02d}:{second:02d}Z"


# -- projection --------------------------------------------------------------


def project(p: GeoPoint, ref: GeoPoint) -> Position:
    """Equirectangular projection of p onto the km plane tangent at ref."""
    dlat = p.lat - ref.lat
    dlon = p.lon - ref.lon
    if not (abs(dlat) < PROJECTION_GUARD_DEG and abs(dlon) < PROJECTION_GUARD_DEG):
        raise OutOfProjectionRange(f"point {p} beyond {PROJECTION_GUARD_DEG} deg of {ref}")
    coef = EARTH_RADIUS_KM * math.cos(ref.lat * _DEG)
    return Position(coef * dlon * _DEG, EARTH_RADIUS_KM * dlat * _DEG)


def unproject(pos: Position, ref: GeoPoint) -> GeoPoint:
    """Inverse of project (same tangent plane)."""
    coef = EARTH_RADIUS_KM * math.cos(ref.lat * _DEG)
    return GeoPoint(ref.lat + pos.y / (EARTH_RADIUS_KM * _DEG), ref.lon + pos.x / (coef * _DEG))


def project_arrays(lat: np.ndarray, lon: np.ndarray, ref: GeoPoint) -> tuple[np.ndarray, np.ndarray]:
    """Bulk projection with the exact operation order of project(), so scalar
    and array routes produce identical bits for identical inputs."""
    coef = EARTH_RADIUS_KM * math.cos(ref.lat * _DEG)
    return coef * (lon - ref.lon) * _DEG, EARTH_RADIUS_KM * (lat - ref.lat) * _DEG


def unproject_arrays(x: np.ndarray, y: np.ndarray, ref: GeoPoint) -> tuple[np.ndarray, np.ndarray]:
    """Bulk inverse projection on the tangent plane at ref."""
    coef = EARTH_RADIUS_KM * math.cos(ref.lat * _DEG)
    return ref.lat + y / (EARTH_RADIUS_KM * _DEG), ref.lon + x / (coef * _DEG)


# -- row parsing -------------------------------------------------------------


def _parse_coord(text: str, lo: float, hi: float, what: str) -> float:
    if not text or _COORD_BAD.search(text):
        raise BadCoordinate(f"non-numeric {what} {text!r}")
    try:
        value = float(text)
    except ValueError:
        raise BadCoordinate(f"non-numeric {what} {text!r}") from None
    if not lo <= value <= hi:  # also rejects nan
        raise BadCoordinate(f"{what} {text!r} outside [{lo}, {hi}]")
    return value


def parse_cdr_line(line: str, line_no: int = 0) -> GeoRecord:
    """Parse one non-header CSV row; raises a ParseError subclass on any defect."""
    parts = line.rstrip("\r\n").split(",")
    if len(parts) != 4:
        raise MalformedLine(f"expected 4 fields, got {len(parts)}", line_no)
    user_id, ts, lat_text, lon_text = parts
    if not user_id:
        raise MalformedLine("empty user_id", line_no)
    try:
        t = parse_timestamp(ts)
        lat = _parse_coord(lat_text, -90.0, 90.0, "lat")
        lon = _parse_coord(lon_text, -180.0, 180.0, "lon")
    except ParseError as err:
        err.line_no = line_no
        raise
    return GeoRecord(user_id, t, GeoPoint(lat, lon))


# -- streaming ingestion -----------------------------------------------------


@dataclass
class IngestStats:
    """Counters for one ingestion run; mergeable across chunks."""

    lines_read: int = 0
    records_ok: int = 0
    records_rejected: int = 0
    reject_reasons: dict[str, int] = field(default_factory=dict)
    ref_point: GeoPoint | None = None
    rejected_lines: list[tuple[int, str]] = field(default_factory=list)

    def merge(self, other: "IngestStats") -> "IngestStats":
        """Componentwise sum of two chunk runs sharing one reference point."""
        if self.ref_point != other.ref_point:
            raise ValueError("cannot merge stats with different reference points")
        reasons = dict(self.reject_reasons)
        for reason, count in other.reject_reasons.items():
            reasons[reason] = reasons.get(reason, 0) + count
        return IngestStats(
            lines_read=self.lines_read + other.lines_read,
            records_ok=self.records_ok + other.records_ok,
            records_rejected=self.records_rejected + other.records_rejected,
            reject_reasons=reasons,
            ref_point=self.ref_point,
            rejected_lines=sorted(self.rejected_lines + other.rejected_lines),
        )


def _reject(stats: IngestStats, line_no: int, reason: str) -> None:
    stats.records_rejected += 1
    stats.reject_reasons[reason] = stats.reject_reasons.get(reason, 0) + 1
    stats.rejected_lines.append((line_no, reason))


def ingest_stream(
    source: Iterable[str],
    ref: GeoPoint | None = None,
    window: tuple[int | None, int | None] | None = None,
) -> tuple[list[CdrRecord], IngestStats]:
    """Parse, window-filter, and project a line stream.

    ref=None derives the reference as the mean lat/lon of the rows that
    survive parsing and the window. The window is a closed interval; either
    bound may be None. Raises EmptyInput when nothing is accepted.
    """
    stats = IngestStats()
    t_lo = t_hi = None
    if window is not None:
        t_lo, t_hi = window
    users: list[str] = []
    times: list[int] = []
    lats: list[float] = []
    lons: list[float] = []
    lnos: list[int] = []
    line_no = 0
    first = True
    for raw in source:
        line = raw.rstrip("\r\n")
        line_no += 1
        if first:
            first = False
            if line == RAW_HEADER:
                continue
        if not line:
            continue
        stats.lines_read += 1
        try:
            rec = parse_cdr_line(line, line_no)
        except ParseError as err:
            _reject(stats, line_no, err.reason)
            continue
        if (t_lo is not None and rec.t < t_lo) or (t_hi is not None and rec.t > t_hi):
            _reject(stats, line_no, REASON_WINDOW)
            continue
        users.append(rec.user_id)
        times.append(rec.t)
        lats.append(rec.point.lat)
        lons.append(rec.point.lon)
        lnos.append(line_no)
    if not users:
        raise EmptyInput("no record survived parsing and filtering")

    lat_arr = np.asarray(lats, dtype=np.float64)
    lon_arr = np.asarray(lons, dtype=np.float64)
    if ref is None:
        ref = GeoPoint(float(np.mean(lat_arr)), float(np.mean(lon_arr)))
    stats.ref_point = ref

    ok = (np.abs(lat_arr - ref.lat) < PROJECTION_GUARD_DEG) & (
        np.abs(lon_arr - ref.lon) < PROJECTION_GUARD_DEG
    )
    xs, ys = project_arrays(lat_arr, lon_arr, ref)

    records: list[CdrRecord] = []
    append = records.append
    xs_l = xs.tolist()
    ys_l = ys.tolist()
    for i, good in enumerate(ok.tolist()):
        if good:
            append(CdrRecord(users[i], times[i], Position(xs_l[i], ys_l[i])))
        else:
            _reject(stats, lnos[i], OutOfProjectionRange.__name__)
    stats.records_ok = len(records)
    if not records:
        raise EmptyInput("every parsed record fell outside the projection guard")
    logger.info(
        "ingested %d lines: %d ok, %d rejected", stats.lines_read, stats.records_ok, stats.records_rejected
    )
    return records, stats


def _iter_file_lines(paths: Iterable[str | Path]) -> Iterator[str]:
    # headers of files after the first are dropped here; the first file's
    # header stays visible so single-file line numbers match the file
    for file_index, path in enumerate(paths):
        with open(path, "r", encoding="utf-8") as handle:
            first = True
            for line in handle:
                if first:
                    first = False
                    if file_index > 0 and line.rstrip("\r\n") == RAW_HEADER:
                        continue
                yield line


def ingest_csv(
    paths: str | Path | Iterable[str | Path],
    ref: GeoPoint | None = None,
    window: tuple[int | None, int | None] | None = None,
) -> tuple[list[CdrRecord], IngestStats]:
    """File wrapper around ingest_stream; several files read as one stream."""
    if isinstance(paths, (str, Path)):
        paths = [paths]
    return ingest_stream(_iter_file_lines(paths), ref=ref, window=window)


def write_rejects_csv(stats: IngestStats, out: IO[str]) -> None:
    """Rejection report, one row per refused input line."""
    out.write("line_no,reason\n")
    for line_no, reason in stats.rejected_lines:
        out.write(f"{line_no},{reason}\n")
