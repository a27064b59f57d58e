"""k-anonymous aggregate rows and deterministic report serialization.

Every published aggregate is an AggregateRow carrying the distinct-uid count
of the group it describes; k_suppress drops rows under the threshold and
reports only how many were dropped, never which. Reports serialize with a
sorted row order, shortest round-trip float formatting, and a `# key=value`
metadata header, so identical inputs give byte-identical files.
"""

import csv
import json
from typing import NamedTuple

from .model import ConfigError, InputError


class AggregateRow(NamedTuple):
    group: tuple    # ((dimension, value), ...) same dimensions on every row
    n_uids: int     # distinct users the row describes
    metrics: tuple  # ((name, numeric value), ...)


def make_row(group_pairs, n_uids, metric_pairs) -> AggregateRow:
    if n_uids < 1:
        raise InputError("aggregate row must describe at least one uid")
    return AggregateRow(tuple(group_pairs), int(n_uids), tuple(metric_pairs))


def k_suppress(rows, k: int):
    """(rows with n_uids >= k, number suppressed). Idempotent."""
    if k < 1:
        raise ConfigError("k must be at least 1")
    kept = [row for row in rows if row.n_uids >= k]
    return kept, len(rows) - len(kept)


def _sort_value(value):
    # numbers before strings, so mixed columns still order deterministically
    if isinstance(value, bool):
        return (0, float(value))
    if isinstance(value, (int, float)):
        return (0, float(value))
    return (1, str(value))


def _ordered(rows):
    return sorted(rows, key=lambda r: tuple(_sort_value(v) for _, v in r.group))


def _fmt(value) -> str:
    # repr of a float is the shortest string that round-trips
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _schema(rows):
    dims = [name for name, _ in rows[0].group]
    metrics = [name for name, _ in rows[0].metrics]
    for row in rows:
        if [n for n, _ in row.group] != dims or [n for n, _ in row.metrics] != metrics:
            raise InputError("aggregate rows disagree on column schema")
    return dims, metrics


def emit_report(path, rows, meta, fmt: str = "csv"):
    """Write suppressed rows to `path`; meta pairs go into the header."""
    rows = _ordered(rows)
    if rows:
        dims, metrics = _schema(rows)
    else:
        dims, metrics = [], []
    meta_items = sorted((str(k), str(v)) for k, v in dict(meta).items())
    try:
        if fmt == "csv":
            with open(path, "w", encoding="utf-8", newline="") as fh:
                for key, value in meta_items:
                    fh.write(f"# {key}={value}\n")
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(dims + ["n_uids"] + metrics)
                for row in rows:
                    writer.writerow([_fmt(v) for _, v in row.group]
                                    + [str(row.n_uids)]
                                    + [_fmt(v) for _, v in row.metrics])
        elif fmt == "json":
            doc = {
                "meta": dict(meta_items),
                "dimensions": dims,
                "metrics": metrics,
                "rows": [{"group": [[n, v] for n, v in row.group],
                          "n_uids": row.n_uids,
                          "metrics": [[n, v] for n, v in row.metrics]}
                         for row in rows],
            }
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(doc, fh, indent=2, sort_keys=True)
                fh.write("\n")
        else:
            raise ConfigError(f"unknown report format {fmt!r}")
    except OSError as err:
        raise InputError(f"cannot write report {path}: {err}") from None
    return path


def _sniff(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_report(path):
    """Parse a report back into (rows, meta). CSV or JSON by content."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.read(1)
    if first == "{":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        rows = [AggregateRow(tuple((n, v) for n, v in r["group"]), r["n_uids"],
                             tuple((n, v) for n, v in r["metrics"]))
                for r in doc["rows"]]
        return rows, dict(doc["meta"])

    meta = {}
    header = None
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for record in csv.reader(fh):
            if not record:
                continue
            if record[0].startswith("# "):
                key, _, value = record[0][2:].partition("=")
                meta[key] = value
                continue
            if header is None:
                header = record
                continue
            rows.append(record)
    if header is None:
        return [], meta
    split = header.index("n_uids")
    dims = header[:split]
    metrics = header[split + 1:]
    parsed = []
    for record in rows:
        group = tuple((dims[i], _sniff(record[i])) for i in range(len(dims)))
        n_uids = int(record[split])
        mvals = tuple((metrics[j], _sniff(record[split + 1 + j]))
                      for j in range(len(metrics)))
        parsed.append(AggregateRow(group, n_uids, mvals))
    return parsed, meta
