import csv
import json
import os
import time

import pytest

from airmine import ingest, synth
from airmine.model import PipelineConfig

# the city every acceptance check mines: big enough for tight statistics,
# anchored off cell boundaries, offset timezone to catch UTC/local mixups
MAIN_CITY = synth.SynthConfig(seed=11, n_users=1000, span_days=60,
                              tower_obs=10000, utc_offset=-8.0)
SMALL_CITY = synth.SynthConfig(seed=5, n_users=100, span_days=45,
                               utc_offset=-8.0)


@pytest.fixture(scope="session")
def main_city(tmp_path_factory):
    root = tmp_path_factory.mktemp("main_city")
    out = synth.generate(MAIN_CITY, str(root / "city"))
    timings = {}
    t0 = time.monotonic()
    ingest.build_store([out["location"]], str(root / "loc_store"),
                       "location", threads=2)
    timings["ingest_s"] = time.monotonic() - t0
    ingest.build_store([out["app"]], str(root / "app_store"), "app")
    return {
        "root": str(root),
        "loc_store": str(root / "loc_store"),
        "app_store": str(root / "app_store"),
        "census": out["census"],
        "pois": out["pois"],
        "truth": synth.load_truth(out["truth"]),
        "cfg": MAIN_CITY,
        "timings": timings,
    }


@pytest.fixture(scope="session")
def small_city(tmp_path_factory):
    root = tmp_path_factory.mktemp("small_city")
    out = synth.generate(SMALL_CITY, str(root / "city"))
    ingest.build_store([out["location"]], str(root / "loc_store"), "location")
    ingest.build_store([out["app"]], str(root / "app_store"), "app")
    return {
        "root": str(root),
        "city": str(root / "city"),
        "loc_store": str(root / "loc_store"),
        "app_store": str(root / "app_store"),
        "census": out["census"],
        "pois": out["pois"],
        "truth": synth.load_truth(out["truth"]),
        "cfg": SMALL_CITY,
    }


@pytest.fixture(scope="session")
def pipe_cfg():
    # must agree with the synth cities' timezone
    return PipelineConfig(utc_offset=-8.0)


def read_csv_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def tree_bytes(root):
    """path -> file bytes for every regular file under root."""
    out = {}
    for dirpath, _, names in os.walk(root):
        for name in names:
            p = os.path.join(dirpath, name)
            with open(p, "rb") as fh:
                out[os.path.relpath(p, root)] = fh.read()
    return out
