import random

import pytest

import oracles
from airmine.ingest import AppObservation
from airmine.model import InputError
from airmine.towers import (accumulate_towers, cells_per_operator,
                            default_cdf_edges, distance_samples,
                            empirical_cdf, estimate_towers,
                            group_uid_counts, merge_tower_accs, percentile)


def cell_rec(uid, lat, lon, operator="opA", cell_id="c1", tech="LTE",
             conn="cellular", ts=0):
    return AppObservation(uid, ts, lat, lon, "maps", conn, operator,
                          cell_id, tech, 0, 0)


def test_single_point_estimate():
    got = estimate_towers([cell_rec("u", 34.05, -118.2)])
    est = got[("opA", "c1")]
    assert est.position.lat == 34.05 and est.position.lon == -118.2
    assert est.n_obs == 1 and est.n_uids == 1
    assert est.bbox_diag_km == 0.0
    assert est.tech == "LTE"


def test_centroid_is_coordinate_mean():
    recs = [cell_rec("u1", 34.0, -118.0), cell_rec("u2", 34.2, -118.4)]
    est = estimate_towers(recs)[("opA", "c1")]
    assert est.position.lat == pytest.approx(34.1)
    assert est.position.lon == pytest.approx(-118.2)
    assert est.n_uids == 2
    assert est.bbox_diag_km > 0


def test_wifi_and_missing_cell_are_ignored():
    recs = [cell_rec("u", 34.0, -118.0, conn="wifi"),
            cell_rec("u", 34.0, -118.0, cell_id="")]
    assert estimate_towers(recs) == {}


def test_tech_majority_with_tie_break():
    recs = [cell_rec("u", 34.0, -118.0, tech="3G"),
            cell_rec("u", 34.0, -118.0, tech="3G"),
            cell_rec("u", 34.0, -118.0, tech="LTE")]
    assert estimate_towers(recs)[("opA", "c1")].tech == "3G"
    tie = [cell_rec("u", 34.0, -118.0, tech="LTE"),
           cell_rec("u", 34.0, -118.0, tech="3G")]
    assert estimate_towers(tie)[("opA", "c1")].tech == "3G"  # lexicographic


def test_sharded_accumulation_matches_single_pass():
    rng = random.Random(8)
    recs = [cell_rec(f"u{rng.randrange(30)}",
                     34.0 + rng.uniform(-0.05, 0.05),
                     -118.2 + rng.uniform(-0.05, 0.05),
                     operator=rng.choice(("opA", "opB")),
                     cell_id=rng.choice(("c1", "c2", "c3")),
                     tech=rng.choice(("LTE", "3G")))
            for _ in range(500)]
    whole = estimate_towers(recs)
    parts = [accumulate_towers(recs[i::4]) for i in range(4)]
    from airmine.towers import _finish
    merged = _finish(merge_tower_accs(parts))
    assert set(whole) == set(merged)
    for key in whole:
        a, b = whole[key], merged[key]
        assert a.n_obs == b.n_obs and a.n_uids == b.n_uids
        assert a.position.lat == pytest.approx(b.position.lat, abs=1e-12)
        assert a.position.lon == pytest.approx(b.position.lon, abs=1e-12)
        assert a.tech == b.tech


def test_distance_samples_grouped_by_record_tech():
    towers = estimate_towers([cell_rec("u", 34.0, -118.2)])
    recs = [cell_rec("u", 34.01, -118.2),
            cell_rec("u", 34.02, -118.2, tech="3G")]
    samples = distance_samples(recs, towers)
    assert set(samples) == {("opA", "LTE"), ("opA", "3G")}
    assert samples[("opA", "LTE")][0] == pytest.approx(1.112, abs=0.001)
    assert samples[("opA", "3G")][0] == pytest.approx(2.224, abs=0.001)


def test_distance_samples_missing_tower_raises():
    recs = [cell_rec("u", 34.0, -118.2, cell_id="ghost")]
    with pytest.raises(InputError):
        distance_samples(recs, {})


def test_group_uid_counts():
    recs = [cell_rec("a", 34.0, -118.2), cell_rec("b", 34.0, -118.2),
            cell_rec("a", 34.0, -118.2, tech="3G"),
            cell_rec("a", 34.0, -118.2, conn="wifi", operator="wifi0")]
    got = group_uid_counts(recs)
    assert got[("opA", "LTE")] == 2
    assert got[("opA", "3G")] == 1
    assert ("wifi0", "other") not in got


def test_cells_per_operator():
    recs = [cell_rec("u", 34.0, -118.2, cell_id="c1"),
            cell_rec("u", 34.0, -118.2, cell_id="c2"),
            cell_rec("u", 34.0, -118.2, cell_id="c9", operator="opB",
                     tech="3G")]
    got = cells_per_operator(estimate_towers(recs))
    assert got == {("opA", "LTE"): 2, ("opB", "3G"): 1}


def test_default_cdf_edges_log_spaced():
    edges = default_cdf_edges()
    assert len(edges) == 60
    assert edges[0] == pytest.approx(0.01)
    assert edges[-1] == pytest.approx(30.0)
    ratios = [b / a for a, b in zip(edges, edges[1:])]
    assert max(ratios) == pytest.approx(min(ratios), rel=1e-9)


def test_empirical_cdf_examples():
    assert empirical_cdf([1.0, 2.0, 3.0], [2.0]) == [(2.0, 2 / 3)]
    assert empirical_cdf([0.001, 0.002], [0.01]) == [(0.01, 1.0)]
    got = empirical_cdf([5.0], [1.0, 10.0])
    assert got == [(1.0, 0.0), (10.0, 1.0)]
    with pytest.raises(InputError):
        empirical_cdf([], [1.0])
    with pytest.raises(InputError):
        empirical_cdf([1.0], [2.0, 2.0])  # edges must strictly increase


def test_empirical_cdf_matches_counting_oracle():
    rng = random.Random(13)
    edges = default_cdf_edges()
    for _ in range(100):
        n = rng.randrange(1, 400)
        xs = [rng.lognormvariate(0, 1.5) for _ in range(n)]
        got = empirical_cdf(xs, edges)
        want = oracles.counting_cdf(xs, edges)
        assert len(got) == len(want)
        for (e1, f1), (e2, f2) in zip(got, want):
            assert e1 == e2 and f1 == f2


def test_percentile_nearest_rank():
    xs = list(range(1, 11))  # 1..10
    assert percentile(xs, 0.95) == 10
    assert percentile(xs, 0.90) == 9
    assert percentile(xs, 0.5) == 5
    assert percentile(xs, 1.0) == 10
    assert percentile([7.0], 0.01) == 7.0
    with pytest.raises(InputError):
        percentile([], 0.5)
    with pytest.raises(InputError):
        percentile(xs, 0.0)
    rng = random.Random(21)
    for _ in range(50):
        ys = [rng.uniform(0, 100) for _ in range(rng.randrange(1, 200))]
        q = rng.choice((0.25, 0.5, 0.9, 0.95, 1.0))
        assert percentile(ys, q) == oracles.counting_percentile(ys, q)
