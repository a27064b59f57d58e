"""Subcommand driver wiring the stages into one reduction pipeline.

Per-user intermediates (partitioned stores, anchors.csv, cohorts.csv,
visits.csv, community.csv) carry hashed uids and stay inside the working
directory; everything under reports/ is aggregated and k-suppressed. The
run manifest records config hash, input counts, the user funnel, and
per-report suppression tallies; it contains no timestamps or worker counts,
so identical runs produce identical bytes.
"""

import argparse
import dataclasses
import json
import os
import sys

from . import __version__, anchors, cohorts, ingest, poi_apps, report, synth, towers
from .model import (COHORTS, ConfigError, InputError, PipelineConfig,
                    WEEKDAY_NAMES)
from .util import config_hash, load_config, percent, read_key_values


class PipelineError(RuntimeError):
    pass


def _pipeline_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    return cfg


def _k_value(args, cfg: PipelineConfig) -> int:
    return args.k if args.k is not None else cfg.k_anonymity


def _report_meta(cfg: PipelineConfig, k: int, extra=()):
    meta = {"config_hash": config_hash(cfg), "k": k, "tool_version": __version__}
    meta.update(dict(extra))
    return meta


# -- aggregate builders ----------------------------------------------------------


def cohort_count_rows(assignments):
    by_label = {}
    for a in assignments.values():
        by_label.setdefault(a.label, set()).add(a.uid)
    homed = sum(len(uids) for label, uids in by_label.items()
                if label != "unassigned")
    rows = []
    for label in COHORTS:
        uids = by_label.get(label, ())
        if not uids:
            continue
        share = percent(len(uids), homed) if label != "unassigned" and homed else 0.0
        rows.append(report.make_row((("cohort", label),), len(uids),
                                    (("share_pct", share),)))
    return rows


def weekday_rows(pcts, counts):
    rows = []
    for d, name in enumerate(WEEKDAY_NAMES):
        if counts[d] < 1:
            continue
        rows.append(report.make_row((("weekday", name),), counts[d],
                                    (("active_pct", pcts[d]),)))
    return rows


def poi_visit_rows(visits):
    by_poi = {}
    for v in visits:
        uids, durations = by_poi.setdefault(v.poi_id, (set(), []))
        uids.add(v.uid)
        durations.append(v.duration_min)
    rows = []
    for poi_id in sorted(by_poi):
        uids, durations = by_poi[poi_id]
        mean = sum(durations) / len(durations)
        rows.append(report.make_row(
            (("poi_id", poi_id),), len(uids),
            (("n_visits", len(durations)),
             ("mean_duration_min", round(mean, 2)))))
    return rows


def community_rows(app_counts, visits, span_weeks, cfg: PipelineConfig):
    rows = []
    for app_id in sorted(app_counts):
        community = poi_apps.community_from_counts(app_counts[app_id],
                                                   app_id, cfg)
        if not community.members:
            continue
        stats = poi_apps.community_visit_rates(community.members, visits,
                                               span_weeks)
        rows.append(report.make_row(
            (("app_id", app_id),), len(community.members),
            (("mean_visits_per_week", round(stats.mean, 3)),
             ("median_visits_per_week", round(stats.median, 3)))))
    return rows


def work_hours_rows(hist):
    rows = []
    for cohort in COHORTS:
        for b, count in enumerate(hist.get(cohort, ())):
            if count < 1:
                continue
            rows.append(report.make_row(
                (("cohort", cohort),
                 ("bin_lo_h", b * anchors.WORK_HOURS_BIN_H)),
                count, ()))
    return rows


def tower_rows(tower_map):
    rows = []
    for key in sorted(tower_map):
        est = tower_map[key]
        rows.append(report.make_row(
            (("operator", est.operator), ("cell_id", est.cell_id),
             ("tech", est.tech)),
            est.n_uids,
            (("lat", round(est.position.lat, 6)),
             ("lon", round(est.position.lon, 6)),
             ("n_obs", est.n_obs),
             ("bbox_diag_km", round(est.bbox_diag_km, 4)))))
    return rows


def opcount_rows(tower_map, group_uids):
    cells = towers.cells_per_operator(tower_map)
    rows = []
    for key in sorted(cells):
        operator, tech = key
        n_uids = group_uids.get(key, 0)
        if n_uids < 1:
            continue
        rows.append(report.make_row(
            (("operator", operator), ("tech", tech)), n_uids,
            (("n_cells", cells[key]),)))
    return rows


def write_cdf_csv(path, samples, group_uids, k: int, meta):
    """Pinned plottable schema operator,tech,edge_km,fraction; groups under
    k distinct uids are dropped whole and only counted."""
    edges = towers.default_cdf_edges()
    kept = [key for key in sorted(samples)
            if group_uids.get(key, 0) >= k and samples[key]]
    suppressed = len(samples) - len(kept)
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in sorted(dict(meta).items()):
            fh.write(f"# {key}={value}\n")
        fh.write(f"# suppressed_groups={suppressed}\n")
        fh.write("operator,tech,edge_km,fraction\n")
        for operator, tech in kept:
            for edge, fraction in towers.empirical_cdf(
                    samples[(operator, tech)], edges):
                fh.write(f"{operator},{tech},{edge!r},{fraction!r}\n")
    return suppressed


def write_distances_csv(path, samples, group_uids, k: int, meta):
    kept = [key for key in sorted(samples) if group_uids.get(key, 0) >= k]
    suppressed = len(samples) - len(kept)
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in sorted(dict(meta).items()):
            fh.write(f"# {key}={value}\n")
        fh.write(f"# suppressed_groups={suppressed}\n")
        fh.write("operator,tech,km\n")
        for operator, tech in kept:
            for km in samples[(operator, tech)]:
                fh.write(f"{operator},{tech},{km!r}\n")
    return suppressed


def write_tower_outputs(paths, tower_map, samples, group_uids,
                        cfg: PipelineConfig, k: int):
    """paths: dict with towers/distances/cdf/opcounts file paths."""
    meta = _report_meta(cfg, k)
    suppressed = {}
    kept, n_sup = report.k_suppress(tower_rows(tower_map), k)
    report.emit_report(paths["towers"], kept,
                       dict(meta, suppressed_rows=n_sup))
    suppressed["towers"] = n_sup
    kept, n_sup = report.k_suppress(opcount_rows(tower_map, group_uids), k)
    report.emit_report(paths["opcounts"], kept,
                       dict(meta, suppressed_rows=n_sup))
    suppressed["opcounts"] = n_sup
    suppressed["cdf_groups"] = write_cdf_csv(paths["cdf"], samples,
                                             group_uids, k, meta)
    suppressed["distance_groups"] = write_distances_csv(
        paths["distances"], samples, group_uids, k, meta)
    return suppressed


# -- pipeline ---------------------------------------------------------------------


def _span_weeks_of_store(loc_store):
    """Study span in weeks from the location data's own time range."""
    # track min/max while streaming users once; per-user records are sorted
    lo = hi = None
    for _, records in ingest.iter_store_users(loc_store):
        if records:
            first = records[0].ts
            last = records[-1].ts
            lo = first if lo is None or first < lo else lo
            hi = last if hi is None or last > hi else hi
    if lo is None or hi <= lo:
        return 0.0
    return (hi - lo) / (7 * 86400.0)


def run_pipeline(cfg: PipelineConfig, loc_store, app_store, census_path,
                 pois_path, out_dir, threads: int = 1, k=None,
                 bounds_text: str = "") -> dict:
    """ingest(ed stores) -> anchors -> cohorts -> poi/apps -> towers -> reports."""
    k = k if k is not None else cfg.k_anonymity
    reports_dir = os.path.join(out_dir, "reports")
    os.makedirs(reports_dir, exist_ok=True)
    manifest = {
        "tool_version": __version__,
        "config_hash": config_hash(cfg),
        "k": k,
        "inputs": {
            "location_store": {"path": loc_store,
                               **ingest.store_meta(loc_store)},
            "app_store": {"path": app_store, **ingest.store_meta(app_store)},
            "census": census_path,
            "pois": pois_path,
        },
        "stages": {},
        "reports": {},
    }
    meta = _report_meta(cfg, k)

    def stage(name, fn):
        try:
            return fn()
        except Exception as err:
            manifest["failed_stage"] = name
            write_manifest(out_dir, manifest)
            raise PipelineError(f"stage {name} failed: {err}") from err

    # anchors
    anchor_rows = stage("anchors", lambda: anchors.anchors_for_store(
        loc_store, cfg, threads))
    anchors_path = os.path.join(out_dir, "anchors.csv")
    anchors.write_anchors(anchors_path, anchor_rows)
    manifest["stages"]["anchors"] = {"rows": len(anchor_rows)}

    # cohorts
    districts = stage("cohorts", lambda: cohorts.load_census(census_path))
    assignments = stage("cohorts", lambda: cohorts.assign_cohorts(
        anchor_rows, districts, cfg))
    cohorts_path = os.path.join(out_dir, "cohorts.csv")
    cohorts.write_cohorts(cohorts_path, assignments)
    manifest["stages"]["cohorts"] = {
        "districts": len(districts),
        "eligible_districts": len(cohorts.filter_districts(districts, cfg)),
        "rows": len(assignments),
    }

    # the reduction funnel; each count is a subset of the one before
    consistent = [r for r in anchor_rows if r.is_consistent]
    homed = [r for r in consistent if r.home is not None]
    in_district = [r for r in homed
                   if assignments[r.uid].district_id is not None]
    employed = [r for r in in_district if r.work is not None]
    commuter_rows = [r for r in employed if r.is_commuter]
    manifest["funnel"] = {
        "users": len(anchor_rows),
        "consistent": len(consistent),
        "homed": len(homed),
        "homed_in_district": len(in_district),
        "employed": len(employed),
        "commuters": len(commuter_rows),
    }

    kept, n_sup = report.k_suppress(cohort_count_rows(assignments), k)
    report.emit_report(os.path.join(reports_dir, "cohort_counts.csv"), kept,
                       dict(meta, suppressed_rows=n_sup))
    manifest["reports"]["cohort_counts.csv"] = {"rows": len(kept),
                                                "suppressed": n_sup}

    # POI visits and weekday activity
    pois = stage("poi", lambda: poi_apps.load_pois(pois_path))
    bounds = poi_apps.parse_bounds(bounds_text)
    visits = stage("poi", lambda: poi_apps.visits_for_store(
        loc_store, pois, bounds, cfg, threads))
    visits_path = os.path.join(out_dir, "visits.csv")
    poi_apps.write_visits(visits_path, visits)
    manifest["stages"]["visits"] = {"rows": len(visits)}

    kept, n_sup = report.k_suppress(poi_visit_rows(visits), k)
    report.emit_report(os.path.join(reports_dir, "poi_visits.csv"), kept,
                       dict(meta, suppressed_rows=n_sup))
    manifest["reports"]["poi_visits.csv"] = {"rows": len(kept),
                                             "suppressed": n_sup}

    pcts, counts, n_active = stage("poi", lambda: (
        poi_apps.weekday_counts_for_store(loc_store, cfg, threads)))
    kept, n_sup = report.k_suppress(weekday_rows(pcts, counts), k)
    report.emit_report(os.path.join(reports_dir, "weekday_activity.csv"),
                       kept, dict(meta, suppressed_rows=n_sup))
    manifest["reports"]["weekday_activity.csv"] = {"rows": len(kept),
                                                   "suppressed": n_sup}

    # app communities and their visit rates
    app_counts = stage("community", lambda: poi_apps.app_counts_for_store(
        app_store, threads))
    span_weeks = stage("community", lambda: _span_weeks_of_store(loc_store))
    if span_weeks > 0:
        rows = community_rows(app_counts, visits, span_weeks, cfg)
    else:
        rows = []
    kept, n_sup = report.k_suppress(rows, k)
    report.emit_report(os.path.join(reports_dir, "app_communities.csv"),
                       kept, dict(meta, suppressed_rows=n_sup,
                                  span_weeks=round(span_weeks, 3)))
    manifest["reports"]["app_communities.csv"] = {"rows": len(kept),
                                                  "suppressed": n_sup}

    # work-hours histogram per cohort (commuters only)
    def _work_hist():
        intervals_by_uid = {}
        commuter_uids = {r.uid for r in commuter_rows}
        for uid, records in ingest.iter_store_users(loc_store):
            if uid in commuter_uids:
                intervals_by_uid[uid] = anchors.build_dwell_intervals(
                    records, cfg)
        cohort_by_uid = {uid: a.label for uid, a in assignments.items()}
        hist, _ = anchors.work_hours_distribution(
            commuter_rows, cohort_by_uid, intervals_by_uid, cfg)
        return hist

    hist = stage("workhours", _work_hist)
    kept, n_sup = report.k_suppress(work_hours_rows(hist), k)
    report.emit_report(os.path.join(reports_dir, "work_hours.csv"), kept,
                       dict(meta, suppressed_rows=n_sup))
    manifest["reports"]["work_hours.csv"] = {"rows": len(kept),
                                             "suppressed": n_sup}

    # towers
    tower_map = stage("towers", lambda: towers.towers_for_store(
        app_store, threads))
    samples, group_uid_sets = stage("towers", lambda: (
        towers.distances_for_store(app_store, tower_map, threads)))
    group_uids = {key: len(uids) for key, uids in group_uid_sets.items()}
    tower_paths = {name: os.path.join(reports_dir, name + ".csv")
                   for name in ("towers", "distances", "cdf", "opcounts")}
    suppressed = stage("towers", lambda: write_tower_outputs(
        tower_paths, tower_map, samples, group_uids, cfg, k))
    manifest["stages"]["towers"] = {"cells": len(tower_map)}
    for name, n_sup in sorted(suppressed.items()):
        manifest["reports"][name + ".csv"] = {"suppressed": n_sup}

    write_manifest(out_dir, manifest)
    return manifest


def write_manifest(out_dir, manifest):
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# -- commands ---------------------------------------------------------------------


def cmd_synth(args):
    cfg = (synth.SynthConfig.from_dict(read_key_values(args.config))
           if args.config else synth.SynthConfig())
    summary = synth.generate(cfg, args.out, args.threads)
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_ingest(args):
    meta = ingest.build_store(args.inputs, args.out, args.kind,
                              salt=args.salt, threads=args.threads)
    print(json.dumps({"kind": meta["kind"], "n_records": meta["n_records"],
                      "n_uids": meta["n_uids"],
                      "rejected": meta["rejected"]}, sort_keys=True))
    return 0


def cmd_anchors(args):
    cfg = _pipeline_config(args)
    rows = anchors.anchors_for_store(args.store, cfg, args.threads)
    anchors.write_anchors(args.out, rows)
    n_home = sum(1 for r in rows if r.home is not None)
    n_comm = sum(1 for r in rows if r.is_commuter)
    print(json.dumps({"users": len(rows), "homed": n_home,
                      "commuters": n_comm}, sort_keys=True))
    return 0


def cmd_cohorts(args):
    cfg = _pipeline_config(args)
    rows = anchors.read_anchors(args.anchors)
    districts = cohorts.load_census(args.census)
    assignments = cohorts.assign_cohorts(rows, districts, cfg)
    cohorts.write_cohorts(args.out, assignments)
    tally = {}
    for a in assignments.values():
        tally[a.label] = tally.get(a.label, 0) + 1
    print(json.dumps(tally, sort_keys=True))
    return 0


def cmd_poi(args):
    cfg = _pipeline_config(args)
    pois = poi_apps.load_pois(args.pois)
    bounds = poi_apps.parse_bounds(args.bounds)
    visits = poi_apps.visits_for_store(args.store, pois, bounds, cfg,
                                       args.threads)
    poi_apps.write_visits(args.out, visits)
    print(json.dumps({"visits": len(visits),
                      "visitors": len({v.uid for v in visits})},
                     sort_keys=True))
    return 0


def cmd_community(args):
    cfg = _pipeline_config(args)
    if args.min is not None:
        cfg = dataclasses.replace(cfg, app_min_invocations=args.min)
    counts = poi_apps.app_counts_for_store(args.store, args.threads)
    community = poi_apps.community_from_counts(
        counts.get(args.app, {}), args.app, cfg)
    poi_apps.write_community(args.out, community)
    print(json.dumps({"app_id": args.app, "members": len(community.members)},
                     sort_keys=True))
    return 0


def cmd_towers(args):
    cfg = _pipeline_config(args)
    k = _k_value(args, cfg)
    tower_map = towers.towers_for_store(args.store, args.threads)
    samples, group_uid_sets = towers.distances_for_store(
        args.store, tower_map, args.threads)
    group_uids = {key: len(uids) for key, uids in group_uid_sets.items()}
    names = ("towers", "distances", "cdf", "opcounts")
    if "," in args.out:
        parts = args.out.split(",")
        if len(parts) != 4:
            raise ConfigError("--out needs 4 comma-separated paths or a directory")
        paths = dict(zip(names, parts))
    else:
        os.makedirs(args.out, exist_ok=True)
        paths = {name: os.path.join(args.out, name + ".csv")
                 for name in names}
    suppressed = write_tower_outputs(paths, tower_map, samples, group_uids,
                                     cfg, k)
    print(json.dumps({"cells": len(tower_map), "suppressed": suppressed},
                     sort_keys=True))
    return 0


def cmd_report(args):
    cfg = _pipeline_config(args)
    manifest = run_pipeline(cfg, args.loc_store, args.app_store, args.census,
                            args.pois, args.out, threads=args.threads,
                            k=args.k, bounds_text=args.bounds)
    print(json.dumps({"funnel": manifest["funnel"]}, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value pipeline config file")
    common.add_argument("--threads", type=int, default=1,
                        help="worker processes (default 1)")
    common.add_argument("--k", type=int, default=None,
                        help="k-anonymity threshold override")
    common.add_argument("--salt", default=None,
                        help="hashing salt for raw device ids")

    parser = argparse.ArgumentParser(
        prog="airmine",
        description="Mine home/work anchors, cohorts, POI visits, app "
                    "communities, and tower positions from smartphone logs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common],
                       help="generate a synthetic city with ground truth")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("ingest", parents=[common],
                       help="parse CSVs into a partitioned store")
    p.add_argument("--kind", choices=("location", "app"), required=True)
    p.add_argument("--in", dest="inputs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("anchors", parents=[common],
                       help="detect homes, workplaces, commuters")
    p.add_argument("--store", required=True)
    p.add_argument("--out", default="anchors.csv")
    p.set_defaults(fn=cmd_anchors)

    p = sub.add_parser("cohorts", parents=[common],
                       help="assign census districts and income cohorts")
    p.add_argument("--anchors", required=True)
    p.add_argument("--census", required=True)
    p.add_argument("--out", default="cohorts.csv")
    p.set_defaults(fn=cmd_cohorts)

    p = sub.add_parser("poi", parents=[common],
                       help="detect bounded-duration POI visits")
    p.add_argument("--store", required=True)
    p.add_argument("--pois", required=True)
    p.add_argument("--bounds", default="",
                   help="e.g. mall=10:360,fastfood=5:120")
    p.add_argument("--out", default="visits.csv")
    p.set_defaults(fn=cmd_poi)

    p = sub.add_parser("community", parents=[common],
                       help="extract an app-usage community")
    p.add_argument("--store", required=True)
    p.add_argument("--app", required=True)
    p.add_argument("--min", type=int, default=None,
                   help="invocation threshold (strictly more than)")
    p.add_argument("--out", default="community.csv")
    p.set_defaults(fn=cmd_community)

    p = sub.add_parser("towers", parents=[common],
                       help="estimate tower centroids and distance CDFs")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True,
                   help="directory, or towers,distances,cdf,opcounts paths")
    p.set_defaults(fn=cmd_towers)

    p = sub.add_parser("report", parents=[common],
                       help="run the full pipeline and emit k-anonymous reports")
    p.add_argument("--loc-store", required=True)
    p.add_argument("--app-store", required=True)
    p.add_argument("--census", required=True)
    p.add_argument("--pois", required=True)
    p.add_argument("--bounds", default="")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, InputError, PipelineError, OSError) as err:
        print(f"airmine: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
