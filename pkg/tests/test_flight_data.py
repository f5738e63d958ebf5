import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from magcomp.errors import DataError
from magcomp.flight_data import (FlightFrame, check_channels, line_ids, load_flight,
                                 save_flight, select_line)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_load_minimal(tmp_path):
    p = write(tmp_path / "f.csv", "TIME,UNCOMPMAG3\n0.0,53000\n0.1,53001\n0.2,53002\n")
    fr = load_flight(p)
    assert len(fr) == 3 and fr.sample_rate_hz == 10.0
    np.testing.assert_array_equal(fr["UNCOMPMAG3"], [53000, 53001, 53002])
    np.testing.assert_array_equal(fr["TIME"], [0.0, 0.1, 0.2])


def test_non_monotone_time(tmp_path):
    p = write(tmp_path / "f.csv", "TIME,UNCOMPMAG3\n0.0,1\n0.2,2\n0.1,3\n")
    with pytest.raises(DataError, match="non-monotone time"):
        load_flight(p, sample_rate_hz=5.0)


def test_nan_retained_and_reported(tmp_path):
    p = write(tmp_path / "f.csv",
              "TIME,UNCOMPMAG1,FLUXB_X\n0.0,1,2\n0.1,1,NaN\n0.2,1,4\n")
    fr = load_flight(p)
    assert np.isnan(fr["FLUXB_X"][1])
    reports = {r.name: r for r in check_channels(fr)}
    assert reports["FLUXB_X"].nan_count == 1 and reports["FLUXB_X"].nan_indices == [1]
    assert reports["UNCOMPMAG1"].nan_count == 0 and reports["UNCOMPMAG1"].nan_indices == []


@pytest.mark.parametrize("text, match", [
    ("TIME,UNCOMPMAG1\n0.0,1\n0.1\n", "ragged"),
    ("TIME,UNCOMPMAG1\n0.0,1\n0.1,abc\n", "non-numeric"),
    ("UNCOMPMAG1,FLUXB_X\n0,1\n1,2\n", "TIME"),
    ("TIME,FLUXB_X\n0.0,1\n0.1,2\n", "magnetometer"),
])
def test_load_errors(tmp_path, text, match):
    with pytest.raises(DataError, match=match):
        load_flight(write(tmp_path / "f.csv", text))


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_flight(tmp_path / "nope.csv")


def test_schema_requires_columns(tmp_path):
    p = write(tmp_path / "f.csv", "TIME,UNCOMPMAG1,PITCH\n0.0,1,2\n0.1,1,2\n")
    fr = load_flight(p, schema=["UNCOMPMAG1"])
    assert "PITCH" in fr  # extra columns still loaded
    with pytest.raises(DataError):
        load_flight(p, schema=["UNCOMPMAG5"])


def test_sample_rate_cross_check(tmp_path):
    p = write(tmp_path / "f.csv", "TIME,UNCOMPMAG1\n0,1\n1,1\n2,1\n")
    with pytest.raises(DataError, match="inconsistent"):
        load_flight(p)
    assert load_flight(p, sample_rate_hz=1.0).sample_rate_hz == 1.0


def test_aliases(tmp_path):
    p = write(tmp_path / "f.csv", "TIME,UNCOMPMAG1,CUR_COM1,V_BAT1\n0.0,1,2,3\n0.1,1,2,3\n")
    fr = load_flight(p)
    assert "CUR_COMR" in fr.channels and "V_BATR" in fr.channels
    np.testing.assert_array_equal(fr["CUR_COM1"], fr["CUR_COMR"])


def test_frame_immutable(tmp_path):
    fr = load_flight(write(tmp_path / "f.csv", "TIME,UNCOMPMAG1\n0.0,1\n0.1,2\n"))
    with pytest.raises(ValueError):
        fr["UNCOMPMAG1"][0] = 5.0


def test_check_channels_many_channels(rng):
    n = 50
    chans = {f"CH{k:03d}": rng.standard_normal(n) for k in range(100)}
    chans["UNCOMPMAG1"] = np.ones(n)
    chans["CH007"][[3, 9]] = np.nan
    chans["CH042"][0] = np.nan
    fr = FlightFrame(np.arange(n) / 10.0, chans, 10.0)
    bad = [r for r in check_channels(fr) if r.nan_count > 0]
    assert sorted(r.name for r in bad) == ["CH007", "CH042"]
    assert {r.name: r.nan_count for r in bad} == {"CH007": 2, "CH042": 1}


def test_check_channels_truncates_indices():
    n = 100
    v = np.full(n, np.nan)
    fr = FlightFrame(np.arange(n) / 10.0, {"UNCOMPMAG1": v}, 10.0)
    (rep,) = check_channels(fr, max_indices=5)
    assert rep.nan_count == 100 and rep.nan_indices == [0, 1, 2, 3, 4] and rep.truncated


def lined_frame(lines):
    n = len(lines)
    return FlightFrame(np.arange(n) / 10.0,
                       {"LINE": np.array(lines), "UNCOMPMAG1": np.arange(n, dtype=float)}, 10.0)


def test_select_line():
    fr = lined_frame([1003.01, 1003.01, 1003.02, 1003.02])
    sub = select_line(fr, 1003.01)
    assert len(sub) == 2 and sub.line_id == "1003.01"
    assert select_line(fr, "1003.02")["UNCOMPMAG1"].tolist() == [2.0, 3.0]


def test_select_withheld_line():
    fr = lined_frame([1003.01, 1003.01, 1003.02, 1003.02])
    with pytest.raises(DataError, match="empty selection"):
        select_line(fr, 1003.10)


@settings(max_examples=30)
@given(st.lists(st.tuples(st.sampled_from([1002.01, 1002.02, 1003.01, 1003.08, 1004.3]),
                          st.integers(2, 15)), min_size=1, max_size=6))
def test_select_line_partition(blocks):
    # merge adjacent repeats so each line is one contiguous block
    merged = []
    for line, count in blocks:
        if merged and merged[-1][0] == line:
            merged[-1] = (line, merged[-1][1] + count)
        elif line not in [m[0] for m in merged]:
            merged.append((line, count))
    lines = [line for line, count in merged for _ in range(count)]
    fr = lined_frame(lines)
    total = sum(len(select_line(fr, lid)) for lid in line_ids(fr))
    assert total == len(fr)


finite_or_nan = st.one_of(st.floats(allow_infinity=False, width=64), st.just(np.nan))


@settings(max_examples=30, deadline=None)
@given(arrays(float, (6, 3), elements=finite_or_nan))
def test_serialize_roundtrip(tmp_path_factory, values):
    fr = FlightFrame(np.arange(6) / 10.0,
                     {"UNCOMPMAG1": values[:, 0], "FLUXB_X": values[:, 1], "PITCH": values[:, 2]},
                     10.0)
    p = tmp_path_factory.mktemp("rt") / "f.csv"
    save_flight(fr, p)
    back = load_flight(p)
    for name in fr.names:
        a, b = fr[name], back[name]
        assert np.array_equal(np.isnan(a), np.isnan(b))
        assert np.array_equal(a[~np.isnan(a)], b[~np.isnan(b)])
        assert a.tobytes() == b.tobytes() or np.isnan(a).any()
