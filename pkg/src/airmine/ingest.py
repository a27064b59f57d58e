"""Parse, validate, hash, and partition the two raw record streams.

Input is plain CSV, one record per line, header optional:

  location: uid,ts,lat,lon
  app:      uid,hour_ts,lat,lon,app_id,conn_type,operator,cell_id,tech,bytes_up,bytes_down

Bad lines never abort a run; they are skipped and counted per error class.
The partitioned store groups records by uid prefix shard, sorted by
(uid, timestamp) with input order breaking ties, so every downstream stage
sees the same bytes no matter how many workers parsed the input.
"""

import hashlib
import json
import os
from collections import Counter
from typing import NamedTuple, Optional

from .model import (GeoPoint, InputError, SECONDS_PER_DAY, civil_from_days,
                    days_from_civil)

LOCATION_HEADER = "uid,ts,lat,lon"
APP_HEADER = ("uid,hour_ts,lat,lon,app_id,conn_type,operator,cell_id,tech,"
              "bytes_up,bytes_down")

CONN_TYPES = ("cellular", "wifi", "other")
TECHS = ("LTE", "3G", "other")

# error classes tallied by the readers; kinds, not free text, so counts
# aggregate cleanly across shards
ERR_COLUMNS = "columns"
ERR_UID = "uid"
ERR_TIMESTAMP = "timestamp"
ERR_NUMBER = "number"
ERR_RANGE = "range"
ERR_NEGATIVE = "negative"
ERR_ENUM = "enum"
ERR_FIELD = "field"


class ParseError(ValueError):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


# -- timestamps ----------------------------------------------------------------

_MDAYS = (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)


def _days_in_month(year: int, month: int) -> int:
    if month == 2 and year % 4 == 0 and (year % 100 != 0 or year % 400 == 0):
        return 29
    return _MDAYS[month - 1]


def parse_ts(text: str) -> int:
    """ISO-8601 UTC timestamp -> epoch seconds.

    Hand-rolled fast path for the canonical YYYY-MM-DDTHH:MM:SSZ layout
    (fromisoformat on this interpreter rejects the Z suffix and is several
    times slower); anything else falls back to the stdlib parser.
    """
    if (len(text) == 20 and text[19] == "Z" and text[4] == "-"
            and text[7] == "-" and text[10] in "T " and text[13] == ":"
            and text[16] == ":"):
        try:
            y = int(text[0:4])
            mo = int(text[5:7])
            d = int(text[8:10])
            h = int(text[11:13])
            mi = int(text[14:16])
            s = int(text[17:19])
        except ValueError:
            raise ParseError(ERR_TIMESTAMP, f"bad timestamp {text!r}") from None
        if (1 <= mo <= 12 and 1 <= d <= _days_in_month(y, mo)
                and h < 24 and mi < 60 and s < 60):
            return (days_from_civil(y, mo, d) * SECONDS_PER_DAY
                    + h * 3600 + mi * 60 + s)
        raise ParseError(ERR_TIMESTAMP, f"impossible date/time {text!r}")
    from datetime import datetime, timezone
    try:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise ParseError(ERR_TIMESTAMP, f"bad timestamp {text!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_ts(ts: int) -> str:
    days, rem = divmod(ts, SECONDS_PER_DAY)
    y, mo, d = civil_from_days(days)
    h, rem = divmod(rem, 3600)
    mi, s = divmod(rem, 60)
    return f"{y:04d}-{mo:02d}-{d:02d}T{h:02d}:{mi:02d}:{s:02d}Z"


# -- records -------------------------------------------------------------------


class ObservationRecord(NamedTuple):
    """One location sample: second-precision timestamp, 4-decimal position."""

    uid: str
    ts: int
    lat: float
    lon: float

    def point(self) -> GeoPoint:
        return GeoPoint(self.lat, self.lon)

    def canonical(self) -> str:
        return f"{self.uid},{format_ts(self.ts)},{self.lat:.4f},{self.lon:.4f}"


class AppObservation(NamedTuple):
    """One hour-grouped application/connection sample."""

    uid: str
    ts: int
    lat: float
    lon: float
    app_id: str
    conn_type: str
    operator: str
    cell_id: str
    tech: str
    bytes_up: int
    bytes_down: int

    def point(self) -> GeoPoint:
        return GeoPoint(self.lat, self.lon)

    def has_tower(self) -> bool:
        return self.cell_id != "" and self.conn_type != "wifi"

    def canonical(self) -> str:
        return (f"{self.uid},{format_ts(self.ts)},{self.lat:.4f},"
                f"{self.lon:.4f},{self.app_id},{self.conn_type},"
                f"{self.operator},{self.cell_id},{self.tech},"
                f"{self.bytes_up},{self.bytes_down}")


def hash_uid(raw_id: str, salt: str) -> str:
    """One-way keyed digest of a device identifier (sha256 of salt||raw_id)."""
    if not raw_id:
        raise InputError("empty raw id")
    return hashlib.sha256((salt + raw_id).encode("utf-8")).hexdigest()


def _clean_uid(text: str, salt: Optional[str]) -> str:
    if not text:
        raise ParseError(ERR_UID, "empty uid")
    return hash_uid(text, salt) if salt is not None else text


def _parse_coord(text: str, name: str, limit: float, half_open: bool) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(ERR_NUMBER, f"bad {name} {text!r}") from None
    if value != value or value in (float("inf"), float("-inf")):
        raise ParseError(ERR_NUMBER, f"non-finite {name}")
    if value < -limit or (value >= limit if half_open else value > limit):
        raise ParseError(ERR_RANGE, f"{name} {value} out of range")
    # canonical 4-decimal precision; normalize -0.0 away
    return round(value, 4) + 0.0


def _parse_bytes(text: str, name: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ParseError(ERR_NUMBER, f"bad {name} {text!r}") from None
    if value < 0:
        raise ParseError(ERR_NEGATIVE, f"{name} is negative")
    return value


def parse_location_record(line: str, salt: Optional[str] = None) -> ObservationRecord:
    parts = line.split(",")
    if len(parts) != 4:
        raise ParseError(ERR_COLUMNS, f"expected 4 columns, got {len(parts)}")
    return ObservationRecord(
        _clean_uid(parts[0], salt),
        parse_ts(parts[1]),
        _parse_coord(parts[2], "lat", 90.0, False),
        _parse_coord(parts[3], "lon", 180.0, True),
    )


def parse_app_record(line: str, salt: Optional[str] = None) -> AppObservation:
    parts = line.split(",")
    if len(parts) != 11:
        raise ParseError(ERR_COLUMNS, f"expected 11 columns, got {len(parts)}")
    ts = parse_ts(parts[1])
    if ts % 3600 != 0:
        raise ParseError(ERR_TIMESTAMP, "hour_ts not on an hour boundary")
    conn_type = parts[5]
    if conn_type not in CONN_TYPES:
        raise ParseError(ERR_ENUM, f"bad conn_type {conn_type!r}")
    tech = parts[8]
    if tech not in TECHS:
        raise ParseError(ERR_ENUM, f"bad tech {tech!r}")
    for idx, name in ((4, "app_id"), (6, "operator")):
        if not parts[idx]:
            raise ParseError(ERR_FIELD, f"empty {name}")
    return AppObservation(
        _clean_uid(parts[0], salt),
        ts,
        _parse_coord(parts[2], "lat", 90.0, False),
        _parse_coord(parts[3], "lon", 180.0, True),
        parts[4],
        conn_type,
        parts[6],
        parts[7],
        tech,
        _parse_bytes(parts[9], "bytes_up"),
        _parse_bytes(parts[10], "bytes_down"),
    )


KINDS = {
    "location": (parse_location_record, LOCATION_HEADER),
    "app": (parse_app_record, APP_HEADER),
}


def read_records(path, kind: str, salt: Optional[str] = None):
    """Parse one CSV file; returns (records, Counter of error kinds)."""
    if kind not in KINDS:
        raise InputError(f"unknown record kind {kind!r}")
    parse, header = KINDS[kind]
    records = []
    errors = Counter()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            text = line.strip()
            if not text or text == header:
                continue
            try:
                records.append(parse(text, salt))
            except ParseError as err:
                errors[err.kind] += 1
    return records, errors


def partition_by_user(records):
    """Group records by uid, each group time-sorted with stable input-order ties.

    The union of the groups is exactly the input multiset.
    """
    by_uid = {}
    for rec in records:
        by_uid.setdefault(rec.uid, []).append(rec)
    for recs in by_uid.values():
        recs.sort(key=lambda r: r.ts)
    return by_uid


# -- partitioned store ---------------------------------------------------------
#
# Layout:  <dir>/meta.json  +  <dir>/parts/<xx>.csv  where xx is the first
# two hex chars of sha256(uid).  Each part is header + canonical rows sorted
# by (uid, ts); a uid lives in exactly one part, so iterating parts in name
# order visits every user exactly once in a reproducible order.

N_SHARD_CHARS = 2


def shard_of(uid: str) -> str:
    return hashlib.sha256(uid.encode("utf-8")).hexdigest()[:N_SHARD_CHARS]


def _parse_chunk(args):
    kind, salt, lines = args
    parse, header = KINDS[kind]
    entries = []
    errors = Counter()
    for line in lines:
        text = line.strip()
        if not text or text == header:
            continue
        try:
            rec = parse(text, salt)
        except ParseError as err:
            errors[err.kind] += 1
            continue
        entries.append((shard_of(rec.uid), rec.canonical()))
    return entries, errors


def _chunks(paths, size):
    batch = []
    for path in paths:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                batch.append(line)
                if len(batch) >= size:
                    yield batch
                    batch = []
    if batch:
        yield batch


def build_store(paths, out_dir, kind: str, salt: Optional[str] = None,
                threads: int = 1, chunk_lines: int = 100_000) -> dict:
    """Ingest CSV files into a partitioned store; returns the meta dict.

    Streams input in bounded-memory chunks:  pass 1 appends canonical rows
    to per-shard spill files in input order, pass 2 sorts each (small) shard
    by (uid, ts) and rewrites it with a header.  Chunk parsing may fan out to
    worker processes; spill writes happen in input order either way, so the
    final bytes do not depend on the worker count.
    """
    if kind not in KINDS:
        raise InputError(f"unknown record kind {kind!r}")
    _, header = KINDS[kind]
    parts_dir = os.path.join(out_dir, "parts")
    os.makedirs(parts_dir, exist_ok=True)

    spill = {}
    errors = Counter()
    n_records = 0

    def write_entries(entries):
        nonlocal n_records
        for shard, row in entries:
            fh = spill.get(shard)
            if fh is None:
                fh = open(os.path.join(parts_dir, shard + ".csv.tmp"),
                          "w", encoding="utf-8")
                spill[shard] = fh
            fh.write(row)
            fh.write("\n")
            n_records += 1

    chunk_args = ((kind, salt, chunk) for chunk in _chunks(paths, chunk_lines))
    if threads <= 1:
        for args in chunk_args:
            entries, errs = _parse_chunk(args)
            errors.update(errs)
            write_entries(entries)
    else:
        import multiprocessing
        with multiprocessing.Pool(processes=threads) as pool:
            for entries, errs in pool.imap(_parse_chunk, chunk_args):
                errors.update(errs)
                write_entries(entries)
    for fh in spill.values():
        fh.close()

    n_uids = 0
    shards = sorted(spill)
    for shard in shards:
        tmp_path = os.path.join(parts_dir, shard + ".csv.tmp")
        with open(tmp_path, "r", encoding="utf-8") as fh:
            rows = fh.read().splitlines()
        # canonical timestamps are fixed-width ISO, so text order is time order
        rows.sort(key=lambda row: (row.split(",", 2)[:2]))
        with open(os.path.join(parts_dir, shard + ".csv"), "w",
                  encoding="utf-8") as fh:
            fh.write(header)
            fh.write("\n")
            fh.write("\n".join(rows))
            fh.write("\n")
        os.unlink(tmp_path)
        n_uids += sum(1 for i, row in enumerate(rows)
                      if i == 0 or row.split(",", 1)[0] != rows[i - 1].split(",", 1)[0])

    meta = {
        "kind": kind,
        "schema": header,
        "n_records": n_records,
        "n_uids": n_uids,
        "rejected": dict(sorted(errors.items())),
        "shards": [shard + ".csv" for shard in shards],
    }
    with open(os.path.join(out_dir, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return meta


def store_meta(store_dir) -> dict:
    with open(os.path.join(store_dir, "meta.json"), "r", encoding="utf-8") as fh:
        return json.load(fh)


def iter_store_users(store_dir):
    """Yield (uid, time-sorted records) per user, in stable store order."""
    meta = store_meta(store_dir)
    parse, _ = KINDS[meta["kind"]]
    for shard in meta["shards"]:
        path = os.path.join(store_dir, "parts", shard)
        records, errors = read_records(path, meta["kind"])
        if errors:
            raise InputError(f"corrupt store part {path}: {dict(errors)}")
        current = None
        group = []
        for rec in records:
            if rec.uid != current:
                if group:
                    yield current, group
                current, group = rec.uid, []
            group.append(rec)
        if group:
            yield current, group


def store_uids(store_dir):
    return [uid for uid, _ in iter_store_users(store_dir)]
