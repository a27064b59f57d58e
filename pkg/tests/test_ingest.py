import random

import pytest

from airmine import ingest
from airmine.ingest import (ObservationRecord, ParseError,
                            build_store, format_ts, hash_uid,
                            iter_store_users, parse_app_record,
                            parse_location_record, parse_ts,
                            partition_by_user, read_records, store_meta)
from airmine.model import InputError


def test_hash_uid_sha256_vector():
    # FIPS 180-2 "abc" digest; empty salt means plain sha256 of the id
    assert hash_uid("abc", "") == ("ba7816bf8f01cfea414140de5dae2223"
                                   "b00361a396177a9cb410ff61f20015ad")
    assert hash_uid("abc", "pepper") != hash_uid("abc", "")
    assert hash_uid("abc", "pepper") == hash_uid("abc", "pepper")
    with pytest.raises(InputError):
        hash_uid("", "salt")


@pytest.mark.parametrize("text,want", [
    ("1970-01-01T00:00:00Z", 0),
    ("1970-01-02T00:00:00Z", 86400),
    ("2015-03-02T22:30:00Z", 1425335400),
    ("2015-03-02T22:30:00+00:00", 1425335400),
    ("2015-03-02 22:30:00", 1425335400),  # naive treated as UTC
    ("2016-02-29T12:00:00Z", 1456747200),  # leap day
])
def test_parse_ts(text, want):
    assert parse_ts(text) == want


@pytest.mark.parametrize("text", [
    "2015-02-29T00:00:00Z",   # not a leap year
    "2015-13-01T00:00:00Z",
    "2015-00-10T00:00:00Z",
    "2015-04-31T00:00:00Z",
    "not a time",
    "",
])
def test_parse_ts_rejects(text):
    with pytest.raises(ParseError):
        parse_ts(text)


def test_format_ts_round_trip():
    rng = random.Random(1)
    for _ in range(100):
        ts = rng.randrange(0, 2**31)
        assert parse_ts(format_ts(ts)) == ts


def test_parse_location_record():
    rec = parse_location_record("u1,2015-03-02T22:30:00Z,34.05217,-118.24368")
    assert rec.uid == "u1"
    assert rec.ts == 1425335400
    # coordinates are rounded to the 1e-4 deg wire precision
    assert rec.lat == 34.0522 and rec.lon == -118.2437


@pytest.mark.parametrize("line,kind", [
    ("u1,2015-03-02T22:30:00Z,34.05", ingest.ERR_COLUMNS),
    ("u1,2015-03-02T22:30:00Z,34.05,-118.2,extra", ingest.ERR_COLUMNS),
    (",2015-03-02T22:30:00Z,34.05,-118.2", ingest.ERR_UID),
    ("u1,yesterday,34.05,-118.2", ingest.ERR_TIMESTAMP),
    ("u1,2015-03-02T22:30:00Z,abc,-118.2", ingest.ERR_NUMBER),
    ("u1,2015-03-02T22:30:00Z,91.0,-118.2", ingest.ERR_RANGE),
    ("u1,2015-03-02T22:30:00Z,34.05,180.0", ingest.ERR_RANGE),
    ("u1,2015-03-02T22:30:00Z,nan,-118.2", ingest.ERR_NUMBER),
])
def test_parse_location_errors(line, kind):
    with pytest.raises(ParseError) as err:
        parse_location_record(line)
    assert err.value.kind == kind


GOOD_APP = ("u1,2015-03-02T22:00:00Z,34.05,-118.2,maps,cellular,"
            "opA,c17,LTE,100,2000")


def test_parse_app_record():
    rec = parse_app_record(GOOD_APP)
    assert rec.app_id == "maps" and rec.operator == "opA"
    assert rec.cell_id == "c17" and rec.tech == "LTE"
    assert rec.bytes_up == 100 and rec.bytes_down == 2000
    assert rec.has_tower()
    # wifi rows have no usable tower even when a cell id is present
    wifi = parse_app_record(GOOD_APP.replace("cellular", "wifi"))
    assert not wifi.has_tower()


@pytest.mark.parametrize("mangle,kind", [
    (lambda s: s.replace("22:00:00", "22:30:00"), ingest.ERR_TIMESTAMP),
    (lambda s: s.replace(",maps,", ",,"), ingest.ERR_FIELD),
    (lambda s: s.replace(",opA,", ",,"), ingest.ERR_FIELD),
    (lambda s: s.replace("cellular", "5g"), ingest.ERR_ENUM),
    (lambda s: s.replace("LTE", "6G"), ingest.ERR_ENUM),
    (lambda s: s.replace(",100,", ",-1,"), ingest.ERR_NEGATIVE),
    (lambda s: s + ",extra", ingest.ERR_COLUMNS),
])
def test_parse_app_errors(mangle, kind):
    with pytest.raises(ParseError) as err:
        parse_app_record(mangle(GOOD_APP))
    assert err.value.kind == kind


def test_app_record_empty_cell_id_is_legal():
    rec = parse_app_record(GOOD_APP.replace(",c17,", ",,"))
    assert rec.cell_id == "" and not rec.has_tower()


def test_canonical_round_trip():
    rec = parse_location_record("u9,2015-06-07T01:02:03Z,1.23456,-4.56789")
    again = parse_location_record(rec.canonical())
    assert again == rec
    app = parse_app_record(GOOD_APP)
    assert parse_app_record(app.canonical()) == app


def test_partition_by_user_is_permutation_invariant():
    rng = random.Random(5)
    recs = [ObservationRecord(f"u{i % 3}", rng.randrange(0, 10**6),
                              1.0, 2.0) for i in range(60)]
    base = partition_by_user(recs)
    shuffled = recs[:]
    rng.shuffle(shuffled)
    other = partition_by_user(shuffled)
    assert set(base) == set(other)
    for uid in base:
        assert [r.ts for r in base[uid]] == [r.ts for r in other[uid]]
        assert base[uid] == sorted(base[uid], key=lambda r: r.ts)


def _write_loc_csv(path, rows, header=True):
    with open(path, "w") as fh:
        if header:
            fh.write(ingest.LOCATION_HEADER + "\n")
        for row in rows:
            fh.write(row + "\n")


def test_read_records_counts_rejects(tmp_path):
    p = tmp_path / "in.csv"
    _write_loc_csv(p, [
        "u1,2015-03-02T22:30:00Z,34.05,-118.2",
        "u1,bogus,34.05,-118.2",
        "u2,2015-03-02T22:31:00Z,95.0,-118.2",
        "",
        "u2,2015-03-02T22:32:00Z,34.06,-118.3",
    ])
    recs, rejected = read_records(str(p), "location")
    assert len(recs) == 2
    assert rejected == {ingest.ERR_TIMESTAMP: 1, ingest.ERR_RANGE: 1}


def test_build_store_and_iteration(tmp_path):
    p = tmp_path / "in.csv"
    rows = []
    rng = random.Random(11)
    uids = [f"user{i}" for i in range(9)]
    for i in range(400):
        uid = uids[rng.randrange(len(uids))]
        ts = 1425335400 + rng.randrange(0, 86400 * 5)
        rows.append(f"{uid},{format_ts(ts)},34.05,-118.2")
    _write_loc_csv(p, rows)
    store = tmp_path / "store"
    meta = build_store([str(p)], str(store), "location", salt="s3")
    assert meta["n_records"] == 400
    assert meta["n_uids"] == 9
    assert meta["rejected"] == {}

    seen = []
    total = 0
    for uid, recs in iter_store_users(str(store)):
        seen.append(uid)
        total += len(recs)
        assert [r.ts for r in recs] == sorted(r.ts for r in recs)
        assert all(r.uid == uid for r in recs)
        assert len(uid) == 64  # salted ids come out hashed
    assert total == 400
    assert len(set(seen)) == 9
    assert store_meta(str(store))["kind"] == "location"


def test_build_store_thread_count_invariant(tmp_path):
    p = tmp_path / "in.csv"
    rng = random.Random(2)
    rows = [f"u{rng.randrange(20)},{format_ts(1425335400 + rng.randrange(10**6))},"
            f"{rng.uniform(-1, 1):.5f},{rng.uniform(-1, 1):.5f}"
            for _ in range(3000)]
    _write_loc_csv(p, rows)
    a = tmp_path / "a"
    b = tmp_path / "b"
    build_store([str(p)], str(a), "location", threads=1, chunk_lines=500)
    build_store([str(p)], str(b), "location", threads=4, chunk_lines=500)
    files_a = sorted(str(f.relative_to(a)) for f in a.rglob("*") if f.is_file())
    files_b = sorted(str(f.relative_to(b)) for f in b.rglob("*") if f.is_file())
    assert files_a == files_b
    for name in files_a:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_build_store_rejects_unknown_kind(tmp_path):
    with pytest.raises(InputError):
        build_store([], str(tmp_path / "s"), "sightings")
