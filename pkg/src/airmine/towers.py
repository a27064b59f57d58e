"""Cell-tower centroid estimation and user-to-tower distance distributions.

A tower's position is estimated as the plain centroid of every observation
naming its (operator, cell_id); the known bias of a centroid under
asymmetric coverage is accepted, not corrected. Distance samples from each
observation to its tower's estimate are grouped by operator and the
record's own connection tech.
"""

import math
import os
from bisect import bisect_right
from collections import Counter
from typing import NamedTuple

from .model import GeoPoint, InputError, great_circle_km
from .util import parallel_map


class TowerEstimate(NamedTuple):
    operator: str
    cell_id: str
    tech: str  # majority tech over the cell's records; lexicographic ties
    position: GeoPoint
    n_obs: int
    n_uids: int
    bbox_diag_km: float


def _new_acc():
    # sum_lat, sum_lon, n, lat_min, lat_max, lon_min, lon_max, techs, uids
    return [0.0, 0.0, 0, math.inf, -math.inf, math.inf, -math.inf,
            Counter(), set()]


def accumulate_towers(records, acc=None):
    """Fold tower-bearing records into per-(operator, cell_id) accumulators.

    Wifi records and records without a cell_id are skipped. Accumulators
    from disjoint record sets merge exactly with merge_tower_accs.
    """
    if acc is None:
        acc = {}
    for rec in records:
        if rec.cell_id == "" or rec.conn_type == "wifi":
            continue
        a = acc.get((rec.operator, rec.cell_id))
        if a is None:
            a = acc[(rec.operator, rec.cell_id)] = _new_acc()
        a[0] += rec.lat
        a[1] += rec.lon
        a[2] += 1
        a[3] = min(a[3], rec.lat)
        a[4] = max(a[4], rec.lat)
        a[5] = min(a[5], rec.lon)
        a[6] = max(a[6], rec.lon)
        a[7][rec.tech] += 1
        a[8].add(rec.uid)
    return acc


def merge_tower_accs(parts):
    """Merge per-shard accumulators in the given (fixed) order."""
    total = {}
    for part in parts:
        for key, a in part.items():
            t = total.get(key)
            if t is None:
                total[key] = [a[0], a[1], a[2], a[3], a[4], a[5], a[6],
                              Counter(a[7]), set(a[8])]
            else:
                t[0] += a[0]
                t[1] += a[1]
                t[2] += a[2]
                t[3] = min(t[3], a[3])
                t[4] = max(t[4], a[4])
                t[5] = min(t[5], a[5])
                t[6] = max(t[6], a[6])
                t[7].update(a[7])
                t[8].update(a[8])
    return total


def _finish(acc):
    towers = {}
    for (operator, cell_id), a in acc.items():
        sum_lat, sum_lon, n, lat_min, lat_max, lon_min, lon_max, techs, uids = a
        tech = sorted(techs.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
        towers[(operator, cell_id)] = TowerEstimate(
            operator, cell_id, tech,
            GeoPoint(sum_lat / n, sum_lon / n),
            n, len(uids),
            great_circle_km(lat_min, lon_min, lat_max, lon_max),
        )
    return towers


def estimate_towers(records):
    """Map (operator, cell_id) -> TowerEstimate from app records."""
    return _finish(accumulate_towers(records))


def distance_samples(records, towers):
    """Per-(operator, record tech) lists of km from observation to tower."""
    samples = {}
    for rec in records:
        if rec.cell_id == "" or rec.conn_type == "wifi":
            continue
        est = towers.get((rec.operator, rec.cell_id))
        if est is None:
            raise InputError(
                f"no tower estimate for {rec.operator}/{rec.cell_id}")
        d = great_circle_km(rec.lat, rec.lon, est.position.lat,
                            est.position.lon)
        samples.setdefault((rec.operator, rec.tech), []).append(d)
    return samples


def group_uid_counts(records):
    """Distinct uids per (operator, record tech) among tower-bearing records."""
    uids = {}
    for rec in records:
        if rec.cell_id == "" or rec.conn_type == "wifi":
            continue
        uids.setdefault((rec.operator, rec.tech), set()).add(rec.uid)
    return {key: len(s) for key, s in uids.items()}


def cells_per_operator(towers):
    """Distinct cell counts per (operator, majority tech)."""
    counts = Counter()
    for est in towers.values():
        counts[(est.operator, est.tech)] += 1
    return dict(counts)


# -- distributions ---------------------------------------------------------------

CDF_N_EDGES = 60
CDF_MIN_KM = 0.01
CDF_MAX_KM = 30.0


def default_cdf_edges():
    """Log-spaced edge grid from GPS-noise scale to the largest plausible cell."""
    ratio = CDF_MAX_KM / CDF_MIN_KM
    return [CDF_MIN_KM * ratio ** (i / (CDF_N_EDGES - 1))
            for i in range(CDF_N_EDGES)]


def empirical_cdf(samples, edges):
    """[(edge, fraction of samples <= edge)] over a strictly increasing grid."""
    xs = sorted(samples)
    if not xs:
        raise InputError("empirical_cdf of an empty sample set")
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise InputError("cdf edges must be strictly increasing")
    n = len(xs)
    return [(edge, bisect_right(xs, edge) / n) for edge in edges]


def percentile(samples, q: float) -> float:
    """Nearest-rank percentile, q in (0, 1]."""
    xs = sorted(samples)
    if not xs:
        raise InputError("percentile of an empty sample set")
    if not 0.0 < q <= 1.0:
        raise InputError(f"percentile q {q} outside (0, 1]")
    return xs[max(1, math.ceil(q * len(xs))) - 1]


# -- store-scale drivers -----------------------------------------------------------


def _tower_shard(args):
    store_dir, shard = args
    from . import ingest
    path = os.path.join(store_dir, "parts", shard)
    records, errors = ingest.read_records(path, "app")
    if errors:
        raise InputError(f"corrupt store part {path}: {dict(errors)}")
    return accumulate_towers(records)


def towers_for_store(store_dir, threads: int = 1):
    from . import ingest
    meta = ingest.store_meta(store_dir)
    jobs = [(store_dir, shard) for shard in meta["shards"]]
    parts = parallel_map(_tower_shard, jobs, threads)
    return _finish(merge_tower_accs(parts))


def _distance_shard(args):
    store_dir, shard, towers = args
    from . import ingest
    path = os.path.join(store_dir, "parts", shard)
    records, errors = ingest.read_records(path, "app")
    if errors:
        raise InputError(f"corrupt store part {path}: {dict(errors)}")
    uids = {}
    for rec in records:
        if rec.cell_id == "" or rec.conn_type == "wifi":
            continue
        uids.setdefault((rec.operator, rec.tech), set()).add(rec.uid)
    return distance_samples(records, towers), uids


def distances_for_store(store_dir, towers, threads: int = 1):
    """(samples per (operator, tech), distinct-uid sets per group), store-wide.

    Sample order is shard order then record order, independent of threads.
    """
    from . import ingest
    meta = ingest.store_meta(store_dir)
    jobs = [(store_dir, shard, towers) for shard in meta["shards"]]
    samples = {}
    group_uids = {}
    for part_samples, part_uids in parallel_map(_distance_shard, jobs, threads):
        for key, values in part_samples.items():
            samples.setdefault(key, []).extend(values)
        for key, uid_set in part_uids.items():
            group_uids.setdefault(key, set()).update(uid_set)
    return samples, group_uids
