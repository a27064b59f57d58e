"""POI visit detection, app-usage communities, and activity histograms.

A visit is a run of observations inside a POI's radius whose total span
falls inside the category's dwell bounds; runs that overstay the upper bound
are discarded outright (an all-day presence is somebody who lives or works
there, not a shopper). An app community is every uid with strictly more
than the threshold number of records naming the app.
"""

import math
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple

from .model import (ConfigError, GeoPoint, InputError, PipelineConfig,
                    SECONDS_PER_DAY, WEEKDAY_NAMES, great_circle_km, weekday)
from .util import percent

POI_HEADER = "poi_id,category,lat,lon,radius_m"
POI_CATEGORIES = ("mall", "fastfood", "other")

# category -> (min, max) visit duration in minutes
DEFAULT_DWELL_BOUNDS = {
    "mall": (10.0, 360.0),
    "fastfood": (5.0, 120.0),
    "other": (10.0, 360.0),
}

MAX_POI_RADIUS_M = 2000.0


@dataclass(frozen=True)
class POI:
    poi_id: str
    category: str
    center: GeoPoint
    radius_m: float

    def __post_init__(self):
        if self.category not in POI_CATEGORIES:
            raise InputError(f"poi {self.poi_id}: bad category {self.category!r}")
        if not 0.0 < self.radius_m <= MAX_POI_RADIUS_M:
            raise InputError(f"poi {self.poi_id}: radius_m out of (0, 2000]")


class Visit(NamedTuple):
    uid: str
    poi_id: str
    start: int
    end: int
    duration_min: float


class AppCommunity(NamedTuple):
    app_id: str
    members: frozenset
    min_invocations: int


def load_pois(path):
    pois = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            text = line.strip()
            if not text or text == POI_HEADER:
                continue
            parts = text.split(",")
            if len(parts) != 5:
                raise InputError(f"{path}: expected 5 poi columns: {text!r}")
            try:
                center = GeoPoint(float(parts[2]), float(parts[3]))
                radius = float(parts[4])
            except ValueError:
                raise InputError(f"{path}: bad number in poi {parts[0]}") from None
            pois.append(POI(parts[0], parts[1], center, radius))
    seen = set()
    for poi in pois:
        if poi.poi_id in seen:
            raise InputError(f"{path}: duplicate poi id {poi.poi_id}")
        seen.add(poi.poi_id)
    return pois


def parse_bounds(text: str):
    """CLI bounds syntax `mall=10:360,fastfood=5:120` -> category map."""
    bounds = dict(DEFAULT_DWELL_BOUNDS)
    if not text:
        return bounds
    for item in text.split(","):
        key, _, span = item.partition("=")
        lo, _, hi = span.partition(":")
        if key not in POI_CATEGORIES or not lo or not hi:
            raise ConfigError(f"bad dwell bounds item {item!r}")
        try:
            bounds[key] = (float(lo), float(hi))
        except ValueError:
            raise ConfigError(f"bad dwell bounds item {item!r}") from None
    for key, (lo, hi) in bounds.items():
        if not 0 < lo <= hi:
            raise ConfigError(f"bad dwell bounds for {key}: {lo}:{hi}")
    return bounds


def _in_radius_runs(records, poi: POI, gap: int):
    """Yield (start, end) spans of consecutive in-radius observations.

    Runs are built over the in-radius subsequence: a stray jittered point
    outside the radius does not break a run, a silence over the gap does.
    """
    # cheap degree-box prefilter around the POI before exact distances
    radius_km = poi.radius_m / 1000.0
    dlat = radius_km / 111.0 * 1.05
    dlon = radius_km / (111.0 * max(0.05, math.cos(
        math.radians(poi.center.lat)))) * 1.05
    lat0, lon0 = poi.center.lat, poi.center.lon
    run_start = run_end = None
    for rec in records:
        if abs(rec.lat - lat0) > dlat or abs(rec.lon - lon0) > dlon:
            continue
        if great_circle_km(rec.lat, rec.lon, lat0, lon0) * 1000.0 > poi.radius_m:
            continue
        if run_start is not None and rec.ts - run_end <= gap:
            run_end = rec.ts
        else:
            if run_start is not None:
                yield run_start, run_end
            run_start = run_end = rec.ts
    if run_start is not None:
        yield run_start, run_end


def detect_visits(records, pois, bounds, cfg: PipelineConfig):
    """Visits for one user's time-sorted records.

    A run qualifies when its span lies inside the category's duration
    bounds; too-short and too-long runs are both dropped.
    """
    records = list(records)
    uid = records[0].uid if records else ""
    visits = []
    gap = cfg.dwell_gap_seconds
    for poi in pois:
        lo_min, hi_min = bounds.get(poi.category, DEFAULT_DWELL_BOUNDS["other"])
        for run_start, run_end in _in_radius_runs(records, poi, gap):
            duration = (run_end - run_start) / 60.0
            if lo_min <= duration <= hi_min:
                visits.append(Visit(uid, poi.poi_id, run_start, run_end,
                                    duration))
    visits.sort(key=lambda v: (v.start, v.poi_id, v.end))
    return visits


# -- app communities -------------------------------------------------------------


def app_invocation_counts(app_records):
    """Per-app Counter of records per uid (one record = one invocation)."""
    counts = {}
    for rec in app_records:
        per_uid = counts.get(rec.app_id)
        if per_uid is None:
            per_uid = counts[rec.app_id] = Counter()
        per_uid[rec.uid] += 1
    return counts


def extract_app_community(app_records, app_id: str,
                          cfg: PipelineConfig) -> AppCommunity:
    """Users with strictly more than app_min_invocations records for app_id."""
    per_uid = Counter()
    for rec in app_records:
        if rec.app_id == app_id:
            per_uid[rec.uid] += 1
    members = frozenset(uid for uid, n in per_uid.items()
                        if n > cfg.app_min_invocations)
    return AppCommunity(app_id, members, cfg.app_min_invocations)


def community_from_counts(per_uid, app_id: str,
                          cfg: PipelineConfig) -> AppCommunity:
    members = frozenset(uid for uid, n in per_uid.items()
                        if n > cfg.app_min_invocations)
    return AppCommunity(app_id, members, cfg.app_min_invocations)


class RateStats(NamedTuple):
    rates: dict  # uid -> visits per week, every member present
    mean: float
    median: float


def community_visit_rates(members, visits, span_weeks: float) -> RateStats:
    """Visits-per-week rate for every community member (zero visits counts)."""
    if span_weeks <= 0:
        raise ConfigError("span_weeks must be positive")
    per_uid = Counter(v.uid for v in visits if v.uid in members)
    rates = {uid: per_uid.get(uid, 0) / span_weeks for uid in sorted(members)}
    if not rates:
        return RateStats({}, 0.0, 0.0)
    values = sorted(rates.values())
    n = len(values)
    median = (values[n // 2] if n % 2
              else (values[n // 2 - 1] + values[n // 2]) / 2.0)
    return RateStats(rates, sum(values) / n, median)


# -- weekday activity --------------------------------------------------------------


def weekday_uid_sets(records, cfg: PipelineConfig):
    """Map uid -> set of local weekdays (0=Mon) with at least one record."""
    offset = cfg.utc_offset_s
    out = {}
    for rec in records:
        day = (rec.ts + offset) // SECONDS_PER_DAY
        out.setdefault(rec.uid, set()).add(weekday(day))
    return out


def weekday_histogram(records, cfg: PipelineConfig):
    """Share of distinct uids active on each weekday, as percentages.

    Returns (percent list Mon..Sun, active-uid count list, total uids).
    Bars do not sum to anything in particular; a user can appear on all 7.
    """
    sets = weekday_uid_sets(records, cfg)
    counts = [0] * 7
    for days in sets.values():
        for d in days:
            counts[d] += 1
    total = len(sets)
    pcts = [percent(c, total) if total else 0.0 for c in counts]
    return pcts, counts, total


def combine_weekday_counts(parts):
    """Sum (counts, total) pairs from disjoint uid populations."""
    counts = [0] * 7
    total = 0
    for part_counts, part_total in parts:
        for i, c in enumerate(part_counts):
            counts[i] += c
        total += part_total
    pcts = [percent(c, total) if total else 0.0 for c in counts]
    return pcts, counts, total


# -- store-scale drivers -----------------------------------------------------------


def _visits_shard(args):
    store_dir, shard, pois, bounds, cfg = args
    import os

    from . import ingest
    path = os.path.join(store_dir, "parts", shard)
    records, errors = ingest.read_records(path, "location")
    if errors:
        raise InputError(f"corrupt store part {path}: {dict(errors)}")
    visits = []
    current = None
    group = []
    for rec in records:
        if rec.uid != current:
            if group:
                visits.extend(detect_visits(group, pois, bounds, cfg))
            current, group = rec.uid, []
        group.append(rec)
    if group:
        visits.extend(detect_visits(group, pois, bounds, cfg))
    return visits


def visits_for_store(store_dir, pois, bounds, cfg: PipelineConfig,
                     threads: int = 1):
    from . import ingest
    from .util import parallel_map
    meta = ingest.store_meta(store_dir)
    jobs = [(store_dir, shard, pois, bounds, cfg) for shard in meta["shards"]]
    return [v for part in parallel_map(_visits_shard, jobs, threads)
            for v in part]


def _app_counts_shard(args):
    store_dir, shard = args
    import os

    from . import ingest
    path = os.path.join(store_dir, "parts", shard)
    records, errors = ingest.read_records(path, "app")
    if errors:
        raise InputError(f"corrupt store part {path}: {dict(errors)}")
    return app_invocation_counts(records)


def app_counts_for_store(store_dir, threads: int = 1):
    """Per-app uid Counters over a partitioned app store."""
    from . import ingest
    from .util import parallel_map
    meta = ingest.store_meta(store_dir)
    jobs = [(store_dir, shard) for shard in meta["shards"]]
    total = {}
    for part in parallel_map(_app_counts_shard, jobs, threads):
        for app_id, per_uid in part.items():
            bucket = total.get(app_id)
            if bucket is None:
                total[app_id] = Counter(per_uid)
            else:
                bucket.update(per_uid)
    return total


def _weekday_shard(args):
    store_dir, shard, cfg = args
    import os

    from . import ingest
    path = os.path.join(store_dir, "parts", shard)
    records, errors = ingest.read_records(path, "location")
    if errors:
        raise InputError(f"corrupt store part {path}: {dict(errors)}")
    sets = weekday_uid_sets(records, cfg)
    counts = [0] * 7
    for days in sets.values():
        for d in days:
            counts[d] += 1
    return counts, len(sets)


def weekday_counts_for_store(store_dir, cfg: PipelineConfig, threads: int = 1):
    from . import ingest
    from .util import parallel_map
    meta = ingest.store_meta(store_dir)
    jobs = [(store_dir, shard, cfg) for shard in meta["shards"]]
    return combine_weekday_counts(parallel_map(_weekday_shard, jobs, threads))


# -- visits.csv / community csv ------------------------------------------------------

VISITS_HEADER = "uid,poi_id,start,end,duration_min"
COMMUNITY_HEADER = "app_id,uid"


def write_visits(path, visits):
    from .ingest import format_ts
    rows = sorted(visits, key=lambda v: (v.uid, v.start, v.poi_id))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(VISITS_HEADER + "\n")
        for v in rows:
            fh.write(f"{v.uid},{v.poi_id},{format_ts(v.start)},"
                     f"{format_ts(v.end)},{v.duration_min:g}\n")


def read_visits(path):
    from .ingest import parse_ts
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            text = line.strip()
            if not text or text == VISITS_HEADER:
                continue
            parts = text.split(",")
            if len(parts) != 5:
                raise InputError(f"bad visits row: {text!r}")
            out.append(Visit(parts[0], parts[1], parse_ts(parts[2]),
                             parse_ts(parts[3]), float(parts[4])))
    return out


def write_community(path, community: AppCommunity):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(COMMUNITY_HEADER + "\n")
        for uid in sorted(community.members):
            fh.write(f"{community.app_id},{uid}\n")


def read_community(path, min_invocations: int) -> AppCommunity:
    app_id = ""
    members = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            text = line.strip()
            if not text or text == COMMUNITY_HEADER:
                continue
            app_id, _, uid = text.partition(",")
            members.append(uid)
    return AppCommunity(app_id, frozenset(members), min_invocations)


def weekday_name(d: int) -> str:
    return WEEKDAY_NAMES[d]
