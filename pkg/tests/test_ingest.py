import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mobitrace.errors import (
    BadCoordinate,
    BadTimestamp,
    EmptyInput,
    MalformedLine,
    OutOfProjectionRange,
)
from mobitrace.ingest import (
    EARTH_RADIUS_KM,
    GeoPoint,
    IngestStats,
    Position,
    REASON_WINDOW,
    format_timestamp,
    ingest_csv,
    ingest_stream,
    parse_cdr_line,
    parse_timestamp,
    project,
    project_arrays,
    unproject,
    unproject_arrays,
    write_rejects_csv,
)

from conftest import rel_close


# -- timestamps --------------------------------------------------------------


def test_epoch_and_known_instants():
    assert parse_timestamp("1970-01-01T00:00:00Z") == 0
    assert parse_timestamp("2024-06-01T00:00:00Z") == 1717200000
    assert parse_timestamp("2024-06-01T12:34:56Z") == 1717200000 + 12 * 3600 + 34 * 60 + 56


def test_format_is_inverse():
    assert format_timestamp(0) == "1970-01-01T00:00:00Z"
    assert format_timestamp(1717200000) == "2024-06-01T00:00:00Z"


def test_leap_day():
    t = parse_timestamp("2024-02-29T00:00:00Z")
    assert format_timestamp(t) == "2024-02-29T00:00:00Z"
    with pytest.raises(BadTimestamp):
        parse_timestamp("2023-02-29T00:00:00Z")
    # century rule: 1900 is not a leap year, 2000 is
    with pytest.raises(BadTimestamp):
        parse_timestamp("1900-02-29T00:00:00Z")
    parse_timestamp("2000-02-29T00:00:00Z")


@pytest.mark.parametrize(
    "text",
    [
        "2024-06-01T00:00:00",  # missing Z
        "2024-06-01 00:00:00Z",  # space separator
        "2024-06-01T00:00:00z",  # lowercase z
        "2024-6-01T00:00:00Z",  # short month
        "2024-06-01T00:00:0OZ",  # letter O
        "2024-13-01T00:00:00Z",  # month 13
        "2024-00-01T00:00:00Z",  # month 0
        "2024-06-00T00:00:00Z",  # day 0
        "2024-06-31T00:00:00Z",  # June has 30 days
        "2024-06-01T24:00:00Z",  # hour 24
        "2024-06-01T00:60:00Z",  # minute 60
        "2024-06-01T00:00:60Z",  # second 60
        "0000-01-01T00:00:00Z",  # year 0
        "+024-06-01T00:00:00Z",  # sign in year
        "",
        "2024-06-01T00:00:00Z ",  # trailing junk
    ],
)
def test_bad_timestamps(text):
    with pytest.raises(BadTimestamp):
        parse_timestamp(text)


def test_non_ascii_digits_rejected():
    with pytest.raises(BadTimestamp):
        parse_timestamp("２024-06-01T00:00:00Z")


@given(st.integers(min_value=0, max_value=4_000_000_000))
@settings(max_examples=300)
def test_timestamp_round_trip(t):
    assert parse_timestamp(format_timestamp(t)) == t


# -- projection --------------------------------------------------------------


def test_projection_pinned_values(ref):
    p = project(GeoPoint(49.50, 0.13), ref)
    assert rel_close(p.y, EARTH_RADIUS_KM * 0.01 * math.pi / 180.0, 1e-12)
    coef = EARTH_RADIUS_KM * math.cos(math.radians(49.49))
    assert rel_close(p.x, coef * 0.01 * math.pi / 180.0, 1e-12)
    # one degree of latitude on this sphere is ~111.19 km
    q = project(GeoPoint(50.49, 0.12), ref)
    assert rel_close(q.y, 111.19, 1e-4)


def test_projection_reference_maps_to_origin(ref):
    assert project(ref, ref) == (0.0, 0.0)


def test_projection_guard(ref):
    with pytest.raises(OutOfProjectionRange):
        project(GeoPoint(49.49 + 5.0, 0.12), ref)
    with pytest.raises(OutOfProjectionRange):
        project(GeoPoint(49.49, 0.12 - 5.0), ref)
    # just inside passes
    project(GeoPoint(49.49 + 4.999, 0.12 + 4.999), ref)


def test_unproject_inverts(ref):
    p = GeoPoint(49.7301, -0.4205)
    back = unproject(project(p, ref), ref)
    assert rel_close(back.lat, p.lat, 1e-12)
    assert rel_close(back.lon, p.lon, 1e-12)


def test_array_projection_matches_scalar_bitwise(ref):
    lats = np.array([49.49, 49.50, 48.9, 50.2])
    lons = np.array([0.12, 0.13, -0.8, 1.4])
    xs, ys = project_arrays(lats, lons, ref)
    for i in range(len(lats)):
        p = project(GeoPoint(lats[i], lons[i]), ref)
        assert xs[i] == p.x and ys[i] == p.y
    back_lat, back_lon = unproject_arrays(xs, ys, ref)
    for i in range(len(lats)):
        g = unproject(Position(xs[i], ys[i]), ref)
        assert back_lat[i] == g.lat and back_lon[i] == g.lon


@given(
    st.floats(min_value=-85.0, max_value=85.0),
    st.floats(min_value=-175.0, max_value=175.0),
    st.floats(min_value=-4.9, max_value=4.9),
    st.floats(min_value=-4.9, max_value=4.9),
)
@settings(max_examples=200)
def test_projection_round_trip_property(ref_lat, ref_lon, dlat, dlon):
    ref = GeoPoint(ref_lat, ref_lon)
    p = GeoPoint(ref_lat + dlat, ref_lon + dlon)
    pos = project(p, ref)
    back = unproject(pos, ref)
    assert abs(back.lat - p.lat) < 1e-9
    assert abs(back.lon - p.lon) < 1e-9


# -- line parsing ------------------------------------------------------------


def test_parse_good_line():
    rec = parse_cdr_line("alice,2024-06-01T08:00:00Z,49.5,0.125")
    assert rec.user_id == "alice"
    assert rec.t == 1717200000 + 8 * 3600
    assert rec.point == (49.5, 0.125)


def test_parse_scientific_notation_accepted():
    rec = parse_cdr_line("a,2024-06-01T08:00:00Z,4.95e1,1.2E-1")
    assert rec.point == (49.5, 0.12)


@pytest.mark.parametrize(
    "line,err",
    [
        ("a,2024-06-01T08:00:00Z,49.5", MalformedLine),  # 3 fields
        ("a,2024-06-01T08:00:00Z,49.5,0.1,extra", MalformedLine),  # 5 fields
        (",2024-06-01T08:00:00Z,49.5,0.1", MalformedLine),  # empty user
        ("a,2024-06-01,49.5,0.1", BadTimestamp),
        ("a,2024-06-01T08:00:00Z,91.0,0.1", BadCoordinate),  # lat over 90
        ("a,2024-06-01T08:00:00Z,-90.5,0.1", BadCoordinate),
        ("a,2024-06-01T08:00:00Z,49.5,180.5", BadCoordinate),
        ("a,2024-06-01T08:00:00Z,nan,0.1", BadCoordinate),
        ("a,2024-06-01T08:00:00Z,inf,0.1", BadCoordinate),
        ("a,2024-06-01T08:00:00Z,4 9,0.1", BadCoordinate),  # inner space
        ("a,2024-06-01T08:00:00Z,4_9,0.1", BadCoordinate),  # underscore literal
        ("a,2024-06-01T08:00:00Z,0x10,0.1", BadCoordinate),
        ("a,2024-06-01T08:00:00Z,,0.1", BadCoordinate),  # empty field
        ("a,2024-06-01T08:00:00Z,49.5, 0.1", BadCoordinate),  # leading space
    ],
)
def test_parse_bad_lines(line, err):
    with pytest.raises(err):
        parse_cdr_line(line)


def test_parse_error_carries_line_number_and_reason():
    with pytest.raises(BadCoordinate) as exc:
        parse_cdr_line("a,2024-06-01T08:00:00Z,91.0,0.1", line_no=17)
    assert exc.value.line_no == 17
    assert exc.value.reason == "BadCoordinate"


def test_boundary_coordinates_accepted():
    parse_cdr_line("a,2024-06-01T08:00:00Z,90,180")
    parse_cdr_line("a,2024-06-01T08:00:00Z,-90,-180")


# -- streaming ---------------------------------------------------------------


def _stream(*lines):
    return io.StringIO("\n".join(lines) + "\n")


GOOD = "u1,2024-06-01T08:00:00Z,49.49,0.12"


def test_ingest_counts_and_line_numbers(ref):
    src = _stream(
        "user_id,timestamp,lat,lon",
        GOOD,
        "broken line",
        "",
        "u2,2024-06-01T09:00:00Z,49.50,0.13",
    )
    records, stats = ingest_stream(src, ref=ref)
    assert stats.lines_read == 3  # header and blank are not data lines
    assert stats.records_ok == 2
    assert stats.records_rejected == 1
    assert stats.reject_reasons == {"MalformedLine": 1}
    # rejected line keeps its physical position in the file
    assert stats.rejected_lines == [(3, "MalformedLine")]
    assert [r.user_id for r in records] == ["u1", "u2"]
    assert records[0].pos == (0.0, 0.0)


def test_headerless_stream_accepted(ref):
    records, stats = ingest_stream(_stream(GOOD), ref=ref)
    assert stats.lines_read == 1 and len(records) == 1


def test_window_is_closed_interval(ref):
    t0 = parse_timestamp("2024-06-01T08:00:00Z")
    src = _stream(
        "u,2024-06-01T07:59:59Z,49.49,0.12",
        "u,2024-06-01T08:00:00Z,49.49,0.12",
        "u,2024-06-01T09:00:00Z,49.49,0.12",
        "u,2024-06-01T09:00:01Z,49.49,0.12",
    )
    records, stats = ingest_stream(src, ref=ref, window=(t0, t0 + 3600))
    assert [r.t for r in records] == [t0, t0 + 3600]
    assert stats.reject_reasons == {REASON_WINDOW: 2}


def test_auto_reference_is_mean_of_accepted(ref):
    src = _stream(
        "u,2024-06-01T08:00:00Z,49.0,0.0",
        "u,2024-06-01T09:00:00Z,50.0,1.0",
    )
    records, stats = ingest_stream(src)
    assert stats.ref_point == (49.5, 0.5)
    # symmetric points project to symmetric positions
    assert rel_close(records[0].pos.y, -records[1].pos.y, 1e-12)


def test_auto_reference_ignores_window_excluded_rows():
    src = _stream(
        "u,2024-06-01T08:00:00Z,49.0,0.0",
        "u,2024-06-01T09:00:00Z,50.0,1.0",
        "u,2030-01-01T00:00:00Z,20.0,100.0",  # excluded, must not drag the mean
    )
    _, stats = ingest_stream(src, window=(None, parse_timestamp("2025-01-01T00:00:00Z")))
    assert stats.ref_point == (49.5, 0.5)


def test_projection_guard_rejects_but_continues(ref):
    src = _stream(GOOD, "far,2024-06-01T08:00:00Z,60.0,0.12")
    records, stats = ingest_stream(src, ref=ref)
    assert len(records) == 1
    assert stats.reject_reasons == {"OutOfProjectionRange": 1}


def test_empty_input_raises(ref):
    with pytest.raises(EmptyInput):
        ingest_stream(_stream("garbage"), ref=ref)
    with pytest.raises(EmptyInput):
        ingest_stream(io.StringIO(""), ref=ref)
    with pytest.raises(EmptyInput):
        # parses fine, but everything is outside the guard
        ingest_stream(_stream("u,2024-06-01T08:00:00Z,60.0,0.12"), ref=ref)


def test_stats_merge(ref):
    _, a = ingest_stream(_stream(GOOD, "junk"), ref=ref)
    _, b = ingest_stream(_stream(GOOD, GOOD), ref=ref)
    merged = a.merge(b)
    assert merged.lines_read == 4
    assert merged.records_ok == 3
    assert merged.records_rejected == 1
    assert merged.reject_reasons == {"MalformedLine": 1}


def test_stats_merge_requires_same_reference(ref):
    _, a = ingest_stream(_stream(GOOD), ref=ref)
    _, b = ingest_stream(_stream(GOOD), ref=GeoPoint(49.0, 0.0))
    with pytest.raises(ValueError):
        a.merge(b)


def test_rejects_csv(ref):
    _, stats = ingest_stream(_stream(GOOD, "junk", "u,bad-time,49.49,0.12"), ref=ref)
    out = io.StringIO()
    write_rejects_csv(stats, out)
    assert out.getvalue() == "line_no,reason\n2,MalformedLine\n3,BadTimestamp\n"


def test_ingest_csv_multiple_files(tmp_path, ref):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    a.write_text("user_id,timestamp,lat,lon\n" + GOOD + "\n")
    b.write_text("user_id,timestamp,lat,lon\nu2,2024-06-01T09:00:00Z,49.50,0.13\n")
    records, stats = ingest_csv([a, b], ref=ref)
    assert stats.records_ok == 2
    assert {r.user_id for r in records} == {"u1", "u2"}


def test_ingest_csv_single_path(tmp_path, ref):
    a = tmp_path / "a.csv"
    a.write_text(GOOD + "\n")
    records, _ = ingest_csv(a, ref=ref)
    assert len(records) == 1
