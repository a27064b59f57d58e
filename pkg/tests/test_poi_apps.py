import pytest

from airmine.ingest import AppObservation, ObservationRecord
from airmine.model import (ConfigError, GeoPoint, InputError,
                           PipelineConfig)
from airmine.poi_apps import (POI, Visit, app_invocation_counts,
                              combine_weekday_counts, community_from_counts,
                              community_visit_rates, detect_visits,
                              extract_app_community, load_pois, parse_bounds,
                              read_community, read_visits, weekday_histogram,
                              write_community, write_visits)

CFG = PipelineConfig()
MALL = POI("mall_1", "mall", GeoPoint(34.0, -118.2), 150.0)


def obs(uid, ts_min, lat=34.0, lon=-118.2):
    return ObservationRecord(uid, int(ts_min * 60), lat, lon)


def run_at(uid, start_min, n, step_min=5, lat=34.0, lon=-118.2):
    return [obs(uid, start_min + i * step_min, lat, lon) for i in range(n)]


def test_parse_bounds_defaults_and_overrides():
    b = parse_bounds("")
    assert b["mall"] == (10.0, 360.0)
    assert b["fastfood"] == (5.0, 120.0)
    assert b["other"] == (10.0, 360.0)
    b = parse_bounds("mall=15:300,fastfood=3:60")
    assert b["mall"] == (15.0, 300.0)
    assert b["fastfood"] == (3.0, 60.0)
    with pytest.raises(ConfigError):
        parse_bounds("mall=300:15")  # lower bound above upper
    with pytest.raises(ConfigError):
        parse_bounds("mall=0:60")
    with pytest.raises(ConfigError):
        parse_bounds("nonsense")


def test_visit_duration_bounds_are_inclusive():
    bounds = parse_bounds("")
    # 9 minutes in radius: under the 10-minute mall floor
    too_short = run_at("u", 0, 4, step_min=3)  # 0,3,6,9 -> 9 min
    assert detect_visits(too_short, [MALL], bounds, CFG) == []
    # exactly 10 minutes qualifies
    ok = run_at("u", 0, 3, step_min=5)  # 0,5,10
    got = detect_visits(ok, [MALL], bounds, CFG)
    assert len(got) == 1
    assert got[0].duration_min == 10.0
    assert got[0].poi_id == "mall_1"
    # exactly the 360-minute cap still qualifies
    cap = run_at("u", 0, 37, step_min=10)  # 0..360
    got = detect_visits(cap, [MALL], bounds, CFG)
    assert len(got) == 1 and got[0].duration_min == 360.0
    # 361 minutes: the whole run is discarded, not truncated
    over = run_at("u", 0, 362, step_min=1)
    assert detect_visits(over, [MALL], bounds, CFG) == []


def test_overnight_mall_run_yields_nothing():
    #7 hours on site exceeds the cap: someone lives or works there
    recs = run_at("u", 0, 43, step_min=10)  # 420 min
    assert detect_visits(recs, [MALL], parse_bounds(""), CFG) == []


def test_visit_gap_splits_runs():
    a = run_at("u", 0, 5)            # 0..20 min
    b = run_at("u", 60, 5)           # 60..80 min, 40-min gap
    got = detect_visits(a + b, [MALL], parse_bounds(""), CFG)
    assert len(got) == 2
    assert [v.duration_min for v in got] == [20.0, 20.0]


def test_visit_radius_boundary():
    bounds = parse_bounds("")
    # ~150 m north of the POI center: 0.00135 deg of latitude
    edge = [obs("u", m, lat=34.00134) for m in (0, 5, 10, 15)]
    assert len(detect_visits(edge, [MALL], bounds, CFG)) == 1
    out = [obs("u", m, lat=34.00142) for m in (0, 5, 10, 15)]
    assert detect_visits(out, [MALL], bounds, CFG) == []


def test_visits_sorted_and_multi_poi():
    other = POI("cafe", "fastfood", GeoPoint(34.0, -118.2), 150.0)
    recs = run_at("u", 0, 5)
    got = detect_visits(recs, [MALL, other], parse_bounds(""), CFG)
    # both POIs cover the same spot; rows come back sorted by (start, poi)
    assert [v.poi_id for v in got] == ["cafe", "mall_1"]


def app_rec(uid, app_id, n):
    return [AppObservation(uid, i * 3600, 34.0, -118.2, app_id, "wifi",
                           "wifi0", "", "other", 0, 0) for i in range(n)]


def test_community_threshold_is_strict():
    recs = app_rec("in", "maps", 101) + app_rec("out", "maps", 100)
    com = extract_app_community(recs, "maps", CFG)
    assert com.members == frozenset({"in"})
    counts = app_invocation_counts(recs)
    assert counts["maps"]["in"] == 101
    assert community_from_counts(counts["maps"], "maps", CFG).members == \
        frozenset({"in"})


def test_visit_rates_include_zero_visit_members():
    visits = [Visit("a", "mall_1", i * 86400, i * 86400 + 600, 10.0)
              for i in range(12)]
    stats = community_visit_rates({"a", "b"}, visits, span_weeks=4.0)
    assert stats.rates["a"] == 3.0   # 12 visits over 4 weeks
    assert stats.rates["b"] == 0.0
    assert stats.mean == 1.5
    assert stats.median == 1.5       # midpoint of the even-sized list
    with pytest.raises(ConfigError):
        community_visit_rates({"a"}, visits, span_weeks=0.0)


def test_weekday_histogram_single_tuesday():
    # 1970-01-06 was a Tuesday
    recs = [ObservationRecord("u", 5 * 86400 + 3600 * h, 0.0, 0.0)
            for h in (9, 15)]
    pcts, counts, total = weekday_histogram(recs, CFG)
    assert total == 1
    assert counts == [0, 1, 0, 0, 0, 0, 0]
    assert pcts == [0.0, 100.0, 0.0, 0.0, 0.0, 0.0, 0.0]


def test_weekday_histogram_offset_shifts_day():
    # 02:00 UTC Tuesday is still Monday at UTC-8
    recs = [ObservationRecord("u", 5 * 86400 + 7200, 0.0, 0.0)]
    cfg = PipelineConfig(utc_offset=-8.0)
    _, counts, _ = weekday_histogram(recs, cfg)
    assert counts == [1, 0, 0, 0, 0, 0, 0]


def test_combine_weekday_counts():
    # shards hold disjoint uid populations, so vectors just add up
    a = ([2, 1, 0, 0, 0, 0, 0], 2)
    b = ([1, 0, 0, 0, 1, 0, 1], 2)
    pcts, counts, total = combine_weekday_counts([a, b])
    assert counts == [3, 1, 0, 0, 1, 0, 1]
    assert total == 4
    assert pcts[0] == 75.0 and pcts[1] == 25.0


def test_load_pois(tmp_path):
    p = tmp_path / "pois.csv"
    p.write_text("poi_id,category,lat,lon,radius_m\n"
                 "m1,mall,34.0,-118.2,150\n"
                 "f1,fastfood,34.1,-118.3,80\n")
    pois = load_pois(str(p))
    assert [x.poi_id for x in pois] == ["m1", "f1"]
    assert pois[0].radius_m == 150.0


def test_load_pois_rejects_bad_rows(tmp_path):
    p = tmp_path / "pois.csv"
    p.write_text("poi_id,category,lat,lon,radius_m\n"
                 "m1,palace,34.0,-118.2,150\n")
    with pytest.raises(InputError):
        load_pois(str(p))
    p.write_text("poi_id,category,lat,lon,radius_m\n"
                 "m1,mall,34.0,-118.2,0\n")
    with pytest.raises(InputError):
        load_pois(str(p))
    p.write_text("poi_id,category,lat,lon,radius_m\n"
                 "m1,mall,34.0,-118.2,2500\n")
    with pytest.raises(InputError):
        load_pois(str(p))


def test_visits_csv_round_trip(tmp_path):
    visits = [Visit("u1", "m1", 1425335400, 1425336600, 20.0),
              Visit("u2", "f1", 1425335400, 1425336000, 10.0)]
    p = tmp_path / "visits.csv"
    write_visits(str(p), visits)
    assert read_visits(str(p)) == sorted(visits)


def test_community_csv_round_trip(tmp_path):
    com = community_from_counts({"a": 200, "b": 150, "c": 5}, "maps", CFG)
    p = tmp_path / "community.csv"
    write_community(str(p), com)
    again = read_community(str(p), CFG.app_min_invocations)
    assert again.app_id == "maps"
    assert again.members == frozenset({"a", "b"})
