"""Census districts, point-in-polygon location, and income cohorts.

Districts come from a CSV with an inline polygon column (semicolon-separated
"lon lat" vertex pairs). Cohort thresholds are strict: poor means median
income under poor_income_max, rich means over rich_income_min; incomes equal
to a threshold land in the middle class.
"""

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

from .model import (COHORT_MIDDLE, COHORT_POOR, COHORT_RICH,
                    COHORT_UNASSIGNED, GeoPoint, InputError, PipelineConfig)

CENSUS_HEADER = "district_id,name,kind,population,median_income,polygon"
DISTRICT_KINDS = ("town", "neighborhood")


@dataclass(frozen=True)
class CensusDistrict:
    district_id: str
    name: str
    kind: str
    population: int
    median_income: float
    ring: Tuple[Tuple[float, float], ...]  # (lon, lat), closed: first == last
    ambiguous: bool
    area_deg2: float
    bbox: Tuple[float, float, float, float]  # lon_min, lat_min, lon_max, lat_max


class CohortAssignment(NamedTuple):
    uid: str
    district_id: Optional[str]
    median_income: Optional[float]
    label: str


def shoelace_area(ring) -> float:
    """Unsigned polygon area in squared degrees (planar shoelace formula)."""
    total = 0.0
    for (x1, y1), (x2, y2) in zip(ring, ring[1:]):
        total += x1 * y2 - x2 * y1
    return abs(total) / 2.0


def _orient(ax, ay, bx, by, cx, cy) -> int:
    v = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return 0 if v == 0 else (1 if v > 0 else -1)


def _segments_cross(p1, p2, p3, p4) -> bool:
    """True when the open segments p1p2 and p3p4 properly intersect."""
    o1 = _orient(*p1, *p2, *p3)
    o2 = _orient(*p1, *p2, *p4)
    o3 = _orient(*p3, *p4, *p1)
    o4 = _orient(*p3, *p4, *p2)
    return o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4)


def _validate_ring(ring, where: str):
    if len(ring) < 4:  # closed ring: triangle has 4 vertices
        raise InputError(f"{where}: polygon needs at least 3 distinct vertices")
    for lon, lat in ring:
        if not (math.isfinite(lon) and math.isfinite(lat)):
            raise InputError(f"{where}: non-finite polygon vertex")
    if shoelace_area(ring) == 0.0:
        raise InputError(f"{where}: degenerate zero-area polygon")
    n = len(ring) - 1
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue  # first and last edges are adjacent on the ring
            if _segments_cross(ring[i], ring[i + 1], ring[j], ring[j + 1]):
                raise InputError(f"{where}: self-intersecting polygon")


def parse_polygon(text: str):
    """`lon lat;lon lat;...` -> validated closed vertex ring."""
    verts = []
    for part in text.split(";"):
        pieces = part.split()
        if len(pieces) != 2:
            raise InputError(f"bad polygon vertex {part!r}")
        try:
            verts.append((float(pieces[0]), float(pieces[1])))
        except ValueError:
            raise InputError(f"bad polygon vertex {part!r}") from None
    if verts and verts[0] != verts[-1]:
        verts.append(verts[0])
    ring = tuple(verts)
    _validate_ring(ring, f"polygon {text[:40]!r}")
    return ring


def format_polygon(ring) -> str:
    return ";".join(f"{lon:g} {lat:g}" for lon, lat in ring[:-1])


def make_district(district_id, name, kind, population, median_income,
                  ring, ambiguous=False) -> CensusDistrict:
    if kind not in DISTRICT_KINDS:
        raise InputError(f"district {district_id}: bad kind {kind!r}")
    if population < 0:
        raise InputError(f"district {district_id}: negative population")
    _validate_ring(ring, f"district {district_id}")
    lons = [v[0] for v in ring]
    lats = [v[1] for v in ring]
    return CensusDistrict(district_id, name, kind, int(population),
                          float(median_income), ring, bool(ambiguous),
                          shoelace_area(ring),
                          (min(lons), min(lats), max(lons), max(lats)))


def load_census(path):
    """Read the census CSV; an optional trailing `ambiguous` column (0/1)
    marks districts whose boundary is not well defined."""
    districts = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0] == "district_id":
                continue
            if len(row) not in (6, 7):
                raise InputError(f"{path}: expected 6 or 7 census columns")
            ambiguous = len(row) == 7 and row[6].strip() == "1"
            try:
                population = int(row[3])
                income = float(row[4])
            except ValueError:
                raise InputError(f"{path}: bad number in district {row[0]}") from None
            districts.append(make_district(row[0], row[1], row[2], population,
                                           income, parse_polygon(row[5]),
                                           ambiguous))
    seen = set()
    for d in districts:
        if d.district_id in seen:
            raise InputError(f"{path}: duplicate district id {d.district_id}")
        seen.add(d.district_id)
    return districts


def point_in_polygon(lon: float, lat: float, ring) -> bool:
    """Even-odd ray casting; edge-touching points are implementation-defined."""
    inside = False
    for (x1, y1), (x2, y2) in zip(ring, ring[1:]):
        if (y1 > lat) != (y2 > lat):
            x_cross = x1 + (lat - y1) * (x2 - x1) / (y2 - y1)
            if x_cross > lon:
                inside = not inside
    return inside


def locate_district(p: GeoPoint, districts) -> Optional[str]:
    """District containing the point; overlaps resolve to the smallest area
    (the most specific district, e.g. a neighborhood inside its town)."""
    best = None
    best_key = None
    for d in districts:
        lon_min, lat_min, lon_max, lat_max = d.bbox
        if not (lon_min <= p.lon <= lon_max and lat_min <= p.lat <= lat_max):
            continue
        if point_in_polygon(p.lon, p.lat, d.ring):
            key = (d.area_deg2, d.district_id)
            if best_key is None or key < best_key:
                best_key = key
                best = d.district_id
    return best


def filter_districts(districts, cfg: PipelineConfig):
    """Drop under-populated and ambiguous districts."""
    return [d for d in districts
            if d.population >= cfg.district_population_min and not d.ambiguous]


def cohort_label(median_income: Optional[float], cfg: PipelineConfig) -> str:
    if median_income is None:
        return COHORT_UNASSIGNED
    if median_income < cfg.poor_income_max:
        return COHORT_POOR
    if median_income > cfg.rich_income_min:
        return COHORT_RICH
    return COHORT_MIDDLE


def assign_cohorts(anchor_rows, districts, cfg: PipelineConfig):
    """Map uid -> CohortAssignment for every anchors row.

    A user's location is the center of the home cell; users without a home,
    or homed outside every eligible district, stay unassigned.
    """
    eligible = filter_districts(districts, cfg)
    by_id = {d.district_id: d for d in eligible}
    out = {}
    for row in anchor_rows:
        district_id = None
        if row.home is not None:
            res = cfg.anchor_resolution
            center = GeoPoint((row.home[0] + 0.5) * res,
                              (row.home[1] + 0.5) * res)
            district_id = locate_district(center, eligible)
        if district_id is None:
            out[row.uid] = CohortAssignment(row.uid, None, None,
                                            COHORT_UNASSIGNED)
        else:
            income = by_id[district_id].median_income
            out[row.uid] = CohortAssignment(row.uid, district_id, income,
                                            cohort_label(income, cfg))
    return out


# -- cohorts.csv ----------------------------------------------------------------

COHORTS_HEADER = "uid,district_id,median_income,cohort"


def write_cohorts(path, assignments):
    rows = sorted(assignments.values() if isinstance(assignments, dict)
                  else assignments, key=lambda a: a.uid)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(COHORTS_HEADER + "\n")
        for a in rows:
            district = a.district_id if a.district_id is not None else ""
            income = f"{a.median_income:g}" if a.median_income is not None else ""
            fh.write(f"{a.uid},{district},{income},{a.label}\n")


def read_cohorts(path):
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            text = line.strip()
            if not text or text == COHORTS_HEADER:
                continue
            parts = text.split(",")
            if len(parts) != 4:
                raise InputError(f"bad cohorts row: {text!r}")
            uid, district, income, label = parts
            out[uid] = CohortAssignment(
                uid,
                district or None,
                float(income) if income else None,
                label,
            )
    return out
