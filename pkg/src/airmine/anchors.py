"""Dwell intervals and recurring-anchor detection (home, work, commuters).

A dwell interval is a maximal run of observations that land in one anchor
grid cell with consecutive gaps of at most dwell_gap_max. Home is the cell
holding the user for >= home_min_hours_per_night during >= home_min_nights
night windows; work is the same construction over Mon-Fri workday windows.
All clock math is local time (UTC + configured offset).

Cells are carried as (lat_index, lon_index) int pairs at anchor resolution.
"""

import os
from typing import NamedTuple, Optional, Tuple

from .model import (COHORTS, InputError, PipelineConfig, SECONDS_PER_DAY,
                    day_index, grid_index, is_workday, local_seconds)
from .util import parallel_map

Cell = Tuple[int, int]


class DwellInterval(NamedTuple):
    uid: str
    cell: Cell
    start: int  # epoch seconds UTC
    end: int
    n_obs: int


class UserAnchors(NamedTuple):
    uid: str
    home: Optional[Cell]
    work: Optional[Cell]
    is_consistent: bool
    is_commuter: bool


def build_dwell_intervals(records, cfg: PipelineConfig):
    """Collapse one user's time-sorted records into dwell intervals.

    A gap over dwell_gap_max or a cell change closes the current run; an
    isolated observation becomes a zero-duration interval.
    """
    res = cfg.anchor_resolution
    max_gap = cfg.dwell_gap_seconds
    out = []
    uid = None
    cell = None
    start = end = n_obs = 0
    prev_ts = None
    for rec in records:
        if uid is None:
            uid = rec.uid
        elif rec.uid != uid:
            raise InputError("records for more than one uid")
        if prev_ts is not None and rec.ts < prev_ts:
            raise InputError("records not time-sorted")
        prev_ts = rec.ts
        here = (grid_index(rec.lat, res), grid_index(rec.lon, res))
        if cell is not None and here == cell and rec.ts - end <= max_gap:
            end = rec.ts
            n_obs += 1
        else:
            if cell is not None:
                out.append(DwellInterval(uid, cell, start, end, n_obs))
            cell = here
            start = end = rec.ts
            n_obs = 1
    if cell is not None:
        out.append(DwellInterval(uid, cell, start, end, n_obs))
    return out


def day_coverage(records, cfg: PipelineConfig):
    """Sorted distinct local day indices with at least one observation."""
    offset = cfg.utc_offset_s
    return sorted({(rec.ts + offset) // SECONDS_PER_DAY for rec in records})


def is_consistent(days, cfg: PipelineConfig) -> bool:
    """Strictly more than consistent_min_days distinct days, and no hole of
    more than consistent_max_gap_days consecutive missing days."""
    days = sorted(days)
    if len(days) <= cfg.consistent_min_days:
        return False
    worst = max((b - a - 1 for a, b in zip(days, days[1:])), default=0)
    return worst <= cfg.consistent_max_gap_days


def filter_consistent(coverage_by_uid, cfg: PipelineConfig):
    """coverage_by_uid: map uid -> iterable of local day indices."""
    return {uid for uid, days in coverage_by_uid.items()
            if is_consistent(days, cfg)}


def _window_tally(intervals, cfg: PipelineConfig, window_start_s: int,
                  window_len_s: int, workdays_only: bool):
    """Seconds of dwell per (cell, local day) clipped to the daily window.

    The window attributed to day d starts at d*86400 + window_start_s local
    and runs window_len_s (it may cross midnight into day d+1).
    """
    offset = cfg.utc_offset_s
    tally = {}
    for iv in intervals:
        s = iv.start + offset
        e = iv.end + offset
        d_lo = (s - window_start_s - window_len_s) // SECONDS_PER_DAY
        d_hi = (e - window_start_s) // SECONDS_PER_DAY
        for d in range(d_lo, d_hi + 1):
            if workdays_only and not is_workday(d):
                continue
            w0 = d * SECONDS_PER_DAY + window_start_s
            overlap = min(e, w0 + window_len_s) - max(s, w0)
            if overlap > 0:
                cell_days = tally.setdefault(iv.cell, {})
                cell_days[d] = cell_days.get(d, 0) + overlap
    return tally


def _pick_anchor(tally, min_seconds: int, min_days: int) -> Optional[Cell]:
    """Qualifying cell with the most qualifying days; ties go to the larger
    total in-window dwell, then the lexicographically smallest cell."""
    best = None
    best_key = None
    for cell, per_day in tally.items():
        good_days = sum(1 for secs in per_day.values() if secs >= min_seconds)
        if good_days < min_days:
            continue
        key = (-good_days, -sum(per_day.values()), cell)
        if best_key is None or key < best_key:
            best_key = key
            best = cell
    return best


def detect_home(intervals, cfg: PipelineConfig) -> Optional[Cell]:
    """Cell dwelt in >= home_min_hours_per_night during the night window
    (22:00 of day d to 06:00 of day d+1, attributed to d) on >= home_min_nights
    nights."""
    tally = _window_tally(intervals, cfg, cfg.night_start_s, cfg.night_len_s,
                          workdays_only=False)
    return _pick_anchor(tally, int(round(cfg.home_min_hours_per_night * 3600)),
                        cfg.home_min_nights)


def detect_work(intervals, cfg: PipelineConfig) -> Optional[Cell]:
    """Cell dwelt in >= work_min_hours_per_day inside the Mon-Fri workday
    window on >= work_min_workdays workdays."""
    tally = _window_tally(intervals, cfg, cfg.work_start_s, cfg.work_len_s,
                          workdays_only=True)
    return _pick_anchor(tally, int(round(cfg.work_min_hours_per_day * 3600)),
                        cfg.work_min_workdays)


def classify_commuters(partials):
    """partials: iterable of (uid, home, work, is_consistent).

    A commuter is a consistent user with both anchors in different cells;
    users working from their home cell are excluded.
    """
    out = []
    for uid, home, work, consistent in partials:
        commuter = (bool(consistent) and home is not None
                    and work is not None and home != work)
        out.append(UserAnchors(uid, home, work, bool(consistent), commuter))
    return out


def analyze_user(uid, records, cfg: PipelineConfig):
    """(uid, home, work, is_consistent) for one user's time-sorted records.

    Anchor detection only runs for consistent users: the reduction funnel
    drops sporadic users before looking for homes.
    """
    consistent = is_consistent(day_coverage(records, cfg), cfg)
    home = work = None
    if consistent:
        intervals = build_dwell_intervals(records, cfg)
        home = detect_home(intervals, cfg)
        work = detect_work(intervals, cfg)
    return uid, home, work, consistent


def _analyze_shard(args):
    store_dir, shard, cfg = args
    from . import ingest
    path = os.path.join(store_dir, "parts", shard)
    records, errors = ingest.read_records(path, "location")
    if errors:
        raise InputError(f"corrupt store part {path}: {dict(errors)}")
    out = []
    current = None
    group = []
    for rec in records:
        if rec.uid != current:
            if group:
                out.append(analyze_user(current, group, cfg))
            current, group = rec.uid, []
        group.append(rec)
    if group:
        out.append(analyze_user(current, group, cfg))
    return out


def anchors_for_store(store_dir, cfg: PipelineConfig, threads: int = 1):
    """Run the per-user anchor analysis over a partitioned location store.

    Parallel over shards; output sorted by uid, so bytes downstream do not
    depend on the worker count.
    """
    from . import ingest
    meta = ingest.store_meta(store_dir)
    jobs = [(store_dir, shard, cfg) for shard in meta["shards"]]
    partials = [row for rows in parallel_map(_analyze_shard, jobs, threads)
                for row in rows]
    partials.sort(key=lambda row: row[0])
    return classify_commuters(partials)


# -- work-hours distribution ---------------------------------------------------

WORK_HOURS_BIN_H = 0.5
WORK_HOURS_MAX_H = 16.0
N_WORK_BINS = int(WORK_HOURS_MAX_H / WORK_HOURS_BIN_H)


def daily_work_hours(intervals, work_cell: Cell, cfg: PipelineConfig):
    """In-window hours at the work cell for each workday with any dwell there."""
    tally = _window_tally(intervals, cfg, cfg.work_start_s, cfg.work_len_s,
                          workdays_only=True)
    per_day = tally.get(work_cell, {})
    return [secs / 3600.0 for _, secs in sorted(per_day.items())]


def mean_daily_work_hours(intervals, work_cell: Cell,
                          cfg: PipelineConfig) -> Optional[float]:
    hours = daily_work_hours(intervals, work_cell, cfg)
    if not hours:
        return None
    return sum(hours) / len(hours)


def work_hours_distribution(anchor_rows, cohort_by_uid, intervals_by_uid,
                            cfg: PipelineConfig):
    """Histogram of mean daily work-cell hours per cohort for commuters.

    The mean for a user is taken over workdays with nonzero work-cell dwell.
    Returns {cohort: ([counts per 0.5 h bin from 0 to 16], [uids binned])}.
    """
    hist = {cohort: [0] * N_WORK_BINS for cohort in COHORTS}
    members = {cohort: [] for cohort in COHORTS}
    for row in anchor_rows:
        if not row.is_commuter:
            continue
        intervals = intervals_by_uid.get(row.uid)
        if intervals is None:
            continue
        mean = mean_daily_work_hours(intervals, row.work, cfg)
        if mean is None:
            continue
        cohort = cohort_by_uid.get(row.uid, "unassigned")
        idx = min(int(mean / WORK_HOURS_BIN_H), N_WORK_BINS - 1)
        hist[cohort][idx] += 1
        members[cohort].append(row.uid)
    return hist, members


# -- anchors.csv ----------------------------------------------------------------

ANCHORS_HEADER = ("uid,home_lat_idx,home_lon_idx,work_lat_idx,work_lon_idx,"
                  "is_consistent,is_commuter")


def _cell_fields(cell: Optional[Cell]):
    return ("", "") if cell is None else (str(cell[0]), str(cell[1]))


def write_anchors(path, rows):
    rows = sorted(rows, key=lambda r: r.uid)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(ANCHORS_HEADER + "\n")
        for r in rows:
            fields = (r.uid, *_cell_fields(r.home), *_cell_fields(r.work),
                      str(int(r.is_consistent)), str(int(r.is_commuter)))
            fh.write(",".join(fields) + "\n")


def read_anchors(path):
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            text = line.strip()
            if not text or text == ANCHORS_HEADER:
                continue
            parts = text.split(",")
            if len(parts) != 7:
                raise InputError(f"bad anchors row: {text!r}")
            home = ((int(parts[1]), int(parts[2]))
                    if parts[1] != "" and parts[2] != "" else None)
            work = ((int(parts[3]), int(parts[4]))
                    if parts[3] != "" and parts[4] != "" else None)
            out.append(UserAnchors(parts[0], home, work,
                                   parts[5] == "1", parts[6] == "1"))
    return out


def day_index_local(ts_utc: int, cfg: PipelineConfig) -> int:
    return day_index(local_seconds(ts_utc, cfg.utc_offset))
