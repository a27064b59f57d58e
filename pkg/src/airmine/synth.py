"""Seeded synthetic city with planted, exactly recoverable ground truth.

Roles are planted by user-index block, not sampled, so every count in the
truth file is exact:

  [commuters | homeworkers | homebodies | nomads | drifters]

Homed users sleep at a fixed home cell every night (22:30-05:30 local,
comfortably above the residence thresholds); commuters add Mon-Fri office
blocks whose length depends on their home district's income band;
homeworkers put the office block at the home cell; nomads rotate their
night cell every five nights so no cell ever reaches the residence floor;
drifters ping once every nine days, which breaks the consistency filter.

Planted anchor cells sit at cell centers, several jitter radii from every
cell boundary, so recovery under default thresholds is exact rather than
statistical. Each user draws from an own RNG stream derived from
(seed, index); output bytes are identical for any worker count.
"""

import hashlib
import json
import math
import os
import random
from dataclasses import dataclass, fields
from typing import NamedTuple

from .model import (ANCHOR_RESOLUTION, COHORT_MIDDLE, COHORT_POOR,
                    COHORT_RICH, COHORT_UNASSIGNED, ConfigError,
                    EARTH_RADIUS_KM, SECONDS_PER_DAY, days_from_civil,
                    weekday)
from .ingest import APP_HEADER, LOCATION_HEADER, format_ts, hash_uid
from .util import parallel_map

KM_PER_DEG_LAT = EARTH_RADIUS_KM * math.pi / 180.0

ROLE_COMMUTER = "commuter"
ROLE_HOMEWORKER = "homeworker"
ROLE_HOMEBODY = "homebody"
ROLE_NOMAD = "nomad"
ROLE_DRIFTER = "drifter"

INCOME_CYCLE = (35000.0, 60000.0, 90000.0)
COHORT_BY_INCOME = {35000.0: COHORT_POOR, 60000.0: COHORT_MIDDLE,
                    90000.0: COHORT_RICH}
# richer cohort works shorter days
WORK_HOURS_BY_INCOME = {35000.0: 9.0, 60000.0: 8.0, 90000.0: 7.0}
WORK_HOURS_DEFAULT = 8.0

LOW_POPULATION = 3000  # planted under the default district floor

NIGHT_START_S = int(22.5 * 3600)   # 22:30, inside the 22:00-06:00 window
NIGHT_END_S = int(29.5 * 3600)     # 05:30 next day
VISIT_OBS_STEP_S = 300
USERS_PER_BATCH = 100


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 1
    n_users: int = 200
    span_days: int = 45
    start_date: str = "2015-03-02"  # a Monday
    utc_offset: float = 0.0         # hours; local = UTC + offset
    gps_jitter_m: float = 10.0
    obs_rate_active: float = 3.0    # observations per active hour
    fraction_homed: float = 0.9
    fraction_commuters: float = 0.25
    fraction_homeworkers: float = 0.15
    fraction_nomads: float = 0.05
    district_grid: int = 3
    district_size_deg: float = 0.02
    origin_lat: float = 34.0
    origin_lon: float = -118.3
    n_offices: int = 25
    n_towers: int = 4
    tower_obs: int = 2000
    tower_radius_km: float = 2.0
    community_frac: float = 0.3
    light_frac: float = 0.2
    salt: str = "synth"

    def __post_init__(self):
        for name in ("fraction_homed", "fraction_commuters",
                     "fraction_homeworkers", "fraction_nomads",
                     "community_frac", "light_frac"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")
        if self.fraction_commuters + self.fraction_homeworkers > self.fraction_homed + 1e-9:
            raise ConfigError("commuters + homeworkers exceed fraction_homed")
        if self.fraction_nomads > 1.0 - self.fraction_homed + 1e-9:
            raise ConfigError("fraction_nomads exceeds the non-homed share")
        if self.n_users < 0 or self.span_days < 1:
            raise ConfigError("n_users must be >= 0 and span_days >= 1")
        if self.obs_rate_active <= 0 or self.gps_jitter_m < 0:
            raise ConfigError("bad obs_rate_active / gps_jitter_m")
        if self.district_grid < 1 or self.district_size_deg <= 0:
            raise ConfigError("bad district layout")
        if self.n_towers < 0 or self.tower_obs < 0 or self.tower_radius_km <= 0:
            raise ConfigError("bad tower layout")
        parts = self.start_date.split("-")
        if len(parts) != 3:
            raise ConfigError(f"bad start_date {self.start_date!r}")

    @property
    def day0(self) -> int:
        y, m, d = (int(p) for p in self.start_date.split("-"))
        return days_from_civil(y, m, d)

    @classmethod
    def from_dict(cls, raw: dict) -> "SynthConfig":
        typed = {}
        by_name = {f.name: f for f in fields(cls)}
        for key, value in raw.items():
            f = by_name.get(key)
            if f is None:
                raise ConfigError(f"unknown synth config key: {key}")
            try:
                if f.type in (int, "int"):
                    typed[key] = int(value)
                elif f.type in (float, "float"):
                    typed[key] = float(value)
                else:
                    typed[key] = str(value)
            except (TypeError, ValueError):
                raise ConfigError(f"bad value for {key}: {value!r}") from None
        return cls(**typed)


class DistrictSpec(NamedTuple):
    district_id: str
    name: str
    population: int
    income: float
    lat0: float
    lon0: float
    size: float
    cell0: tuple  # (lat_idx, lon_idx) of the SW anchor cell


class PoiSpec(NamedTuple):
    poi_id: str
    category: str
    lat: float
    lon: float
    radius_m: float
    rates: tuple     # ((selector, visits per week), ...) first match wins
    dur_lo: int      # planted visit duration bounds, minutes
    dur_hi: int


class TowerSpec(NamedTuple):
    operator: str
    cell_id: str
    tech: str
    lat: float
    lon: float
    radius_km: float
    n_obs: int


class AppSpec(NamedTuple):
    app_id: str
    member_lo: int   # user index range [lo, hi) of planted heavy users
    member_hi: int
    light_lo: int    # index range of light (sub-threshold) users
    light_hi: int


class City(NamedTuple):
    cfg: SynthConfig
    uids: tuple
    roles: tuple
    districts: tuple
    offices: tuple      # office cells (lat_idx, lon_idx)
    nomad_lat_idx: int
    nomad_lon_base: int
    drifter_lat_idx: int
    pois: tuple
    towers: tuple
    apps: tuple
    slot_pool: tuple    # ((local day, start second), ...)
    n_commuters: int
    n_homeworkers: int
    n_homed: int
    n_nomads: int
    cells_per_district: int
    base_cell: tuple


def _stream(seed: int, label: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{label}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def build_city(cfg: SynthConfig) -> City:
    n = cfg.n_users
    n_commuters = int(round(cfg.fraction_commuters * n))
    n_homeworkers = int(round(cfg.fraction_homeworkers * n))
    n_homed = int(round(cfg.fraction_homed * n))
    n_nomads = int(round(cfg.fraction_nomads * n))
    if n_commuters + n_homeworkers > n_homed or n_homed + n_nomads > n:
        raise ConfigError("role blocks exceed n_users after rounding")

    uids = tuple(hash_uid(f"user{i:06d}", cfg.salt) for i in range(n))
    roles = []
    for i in range(n):
        if i < n_commuters:
            roles.append(ROLE_COMMUTER)
        elif i < n_commuters + n_homeworkers:
            roles.append(ROLE_HOMEWORKER)
        elif i < n_homed:
            roles.append(ROLE_HOMEBODY)
        elif i < n_homed + n_nomads:
            roles.append(ROLE_NOMAD)
        else:
            roles.append(ROLE_DRIFTER)

    res = ANCHOR_RESOLUTION
    cells = int(round(cfg.district_size_deg / res))
    if cells < 8:
        raise ConfigError("district_size_deg too small for interior placement")
    base_cell = (int(round(cfg.origin_lat / res)),
                 int(round(cfg.origin_lon / res)))

    districts = []
    g = cfg.district_grid
    for r in range(g):
        for c in range(g):
            i = r * g + c
            income = INCOME_CYCLE[i % len(INCOME_CYCLE)]
            population = LOW_POPULATION if i % 7 == 5 else 5000 + 997 * i
            lat0 = cfg.origin_lat + r * cfg.district_size_deg
            lon0 = cfg.origin_lon + c * cfg.district_size_deg
            districts.append(DistrictSpec(
                f"d{i:02d}", f"District {i:02d}", population, income,
                lat0, lon0, cfg.district_size_deg,
                (base_cell[0] + r * cells, base_cell[1] + c * cells)))

    # office strip north of the districts, nomad band to the west,
    # drifter band to the south; all clear of district and POI cells
    office_lat = base_cell[0] + g * cells + 10
    offices = tuple((office_lat, base_cell[1] + 3 * k)
                    for k in range(cfg.n_offices))
    nomad_lat_idx = base_cell[0] - 12
    nomad_lon_base = base_cell[1] - 8
    drifter_lat_idx = base_cell[0] - 30

    # POIs at least 1 km east of the district grid
    poi_lon0 = cfg.origin_lon + g * cfg.district_size_deg + 0.02
    poi_lat = cfg.origin_lat + 0.01
    pois = (
        PoiSpec("mall_a", "mall", poi_lat, poi_lon0, 150.0,
                (("community:app_a", 3.0), ("all", 1.8)), 37, 97),
        PoiSpec("mall_b", "mall", poi_lat + 0.01, poi_lon0 + 0.01, 150.0,
                (("all", 1.5),), 37, 97),
        PoiSpec("ff_a", "fastfood", poi_lat + 0.02, poi_lon0 + 0.02, 60.0,
                (("cohort:poor", 2.0), ("all", 1.0)), 10, 38),
    )

    tech_cycle = (("opA", "LTE"), ("opA", "3G"), ("opB", "LTE"), ("opB", "3G"))
    towers = tuple(
        TowerSpec(tech_cycle[t % 4][0], f"c{t:03d}", tech_cycle[t % 4][1],
                  cfg.origin_lat - 0.10 - 0.06 * t,
                  cfg.origin_lon + 0.06 * t,
                  cfg.tower_radius_km, cfg.tower_obs)
        for t in range(cfg.n_towers))

    cs = int(round(cfg.community_frac * n))
    ls = int(round(cfg.light_frac * n))
    apps = (
        AppSpec("app_a", 0, min(cs, n), min(cs, n), min(cs + ls, n)),
        AppSpec("app_b", min(cs, n), min(2 * cs, n),
                min(2 * cs, n), min(2 * cs + ls, n)),
    )

    day0 = cfg.day0
    slots = []
    for d in range(cfg.span_days):
        slots.append((d, int(18.5 * 3600)))        # evening, every day
        if weekday(day0 + d) >= 5:                 # weekend daytime
            slots.append((d, 10 * 3600))
            slots.append((d, 14 * 3600))

    return City(cfg, uids, tuple(roles), tuple(districts), offices,
                nomad_lat_idx, nomad_lon_base, drifter_lat_idx, pois, towers,
                apps, tuple(slots), n_commuters, n_homeworkers, n_homed,
                n_nomads, cells, base_cell)


# -- per-user planting -----------------------------------------------------------


def _disc_offset(rng: random.Random, lat: float, radius_km: float):
    """Uniform point in a disc: (dlat, dlon) degrees for a radius in km."""
    r = radius_km * math.sqrt(rng.random())
    theta = rng.random() * 2.0 * math.pi
    dlat = r * math.sin(theta) / KM_PER_DEG_LAT
    dlon = r * math.cos(theta) / (KM_PER_DEG_LAT * math.cos(math.radians(lat)))
    return dlat, dlon


def _cell_center(cell):
    return ((cell[0] + 0.5) * ANCHOR_RESOLUTION,
            (cell[1] + 0.5) * ANCHOR_RESOLUTION)


def _home_cell(city: City, idx: int, rng: random.Random):
    d = city.districts[idx % len(city.districts)]
    margin = 2
    cells = city.cells_per_district
    off_lat = rng.randrange(margin, cells - margin)
    off_lon = rng.randrange(margin, cells - margin)
    return (d.cell0[0] + off_lat, d.cell0[1] + off_lon), d


def _match_rate(rates, cohort: str, communities) -> float:
    for selector, rate in rates:
        if selector == "all":
            return rate
        kind, _, value = selector.partition(":")
        if kind == "cohort" and cohort == value:
            return rate
        if kind == "community" and value in communities:
            return rate
    return 0.0


def _plan_visits(city: City, idx: int, cohort: str, communities,
                 rng: random.Random):
    """[(poi, local day, start second, duration minutes)] for one user."""
    if city.roles[idx] == ROLE_DRIFTER:
        return []
    weeks = city.cfg.span_days / 7.0
    wanted = []
    for poi in city.pois:
        rate = _match_rate(poi.rates, cohort, communities)
        count = int(rate * weeks + 0.5)
        for _ in range(count):
            wanted.append((poi, rng.randint(poi.dur_lo, poi.dur_hi)))
    if not wanted:
        return []
    if len(wanted) > len(city.slot_pool):
        raise ConfigError("visit rates exceed available schedule slots")
    slots = rng.sample(city.slot_pool, len(wanted))
    return [(poi, day, start_s, dur)
            for (poi, dur), (day, start_s) in zip(wanted, slots)]


class _UserPlan(NamedTuple):
    idx: int
    uid: str
    role: str
    home: tuple      # cell or None
    work: tuple      # cell or None
    district_id: str  # "" when none
    cohort: str
    communities: tuple
    visits: tuple    # ((poi_id, start ts utc, duration min), ...)


def _emit_block(lines, uid: str, base_local_s: int, start_s: int, end_s: int,
                lat: float, lon: float, step_s: int, jitter_m: float,
                utc_off_s: int, rng: random.Random):
    """Observations every step_s from start to end plus the exact endpoint."""
    t = start_s
    while t < end_s:
        _emit_point(lines, uid, base_local_s + t, lat, lon, jitter_m,
                    utc_off_s, rng)
        t += step_s
    _emit_point(lines, uid, base_local_s + end_s, lat, lon, jitter_m,
                utc_off_s, rng)


def _emit_point(lines, uid: str, local_ts: int, lat: float, lon: float,
                jitter_m: float, utc_off_s: int, rng: random.Random):
    if jitter_m > 0:
        dlat, dlon = _disc_offset(rng, lat, jitter_m / 1000.0)
    else:
        dlat = dlon = 0.0
    ts = local_ts - utc_off_s
    lines.append(f"{uid},{format_ts(ts)},{lat + dlat:.4f},{lon + dlon:.4f}")


def _generate_user(city: City, idx: int):
    cfg = city.cfg
    rng = _stream(cfg.seed, f"user:{idx}")
    uid = city.uids[idx]
    role = city.roles[idx]
    utc_off_s = int(round(cfg.utc_offset * 3600))
    step_s = int(round(3600.0 / cfg.obs_rate_active))
    jitter = cfg.gps_jitter_m
    day0 = cfg.day0
    loc_lines = []
    app_lines = []

    home = work = None
    district_id = ""
    cohort = COHORT_UNASSIGNED
    district = None
    if role in (ROLE_COMMUTER, ROLE_HOMEWORKER, ROLE_HOMEBODY):
        home, district = _home_cell(city, idx, rng)
        district_id = district.district_id
        if district.population >= 5000:
            cohort = COHORT_BY_INCOME[district.income]
    if role == ROLE_COMMUTER:
        work = city.offices[rng.randrange(len(city.offices))]
    elif role == ROLE_HOMEWORKER:
        work = home

    communities = tuple(app.app_id for app in city.apps
                        if app.member_lo <= idx < app.member_hi)

    # nightly presence at home (or the rotating nomad cells)
    if role in (ROLE_COMMUTER, ROLE_HOMEWORKER, ROLE_HOMEBODY, ROLE_NOMAD):
        if role == ROLE_NOMAD:
            runs = (cfg.span_days + 4) // 5
            n_rot = max(2, (runs + 1) // 2)  # every cell stays under 15 nights
            rot = [(city.nomad_lat_idx,
                    city.nomad_lon_base - 2 * ((idx % 37) * 5 + j))
                   for j in range(n_rot)]
        for d in range(cfg.span_days):
            if role == ROLE_NOMAD:
                cell = rot[(d // 5) % len(rot)]
            else:
                cell = home
            lat, lon = _cell_center(cell)
            _emit_block(loc_lines, uid, (day0 + d) * SECONDS_PER_DAY,
                        NIGHT_START_S, NIGHT_END_S, lat, lon, step_s, jitter,
                        utc_off_s, rng)

    # Mon-Fri office block; length keyed to the home district's income band
    if role in (ROLE_COMMUTER, ROLE_HOMEWORKER):
        hours = WORK_HOURS_BY_INCOME.get(district.income, WORK_HOURS_DEFAULT)
        start_s = int(round((8.0 + (10.0 - hours) / 2.0) * 3600))
        end_s = start_s + int(round(hours * 3600))
        lat, lon = _cell_center(work)
        for d in range(cfg.span_days):
            if weekday(day0 + d) < 5:
                _emit_block(loc_lines, uid, (day0 + d) * SECONDS_PER_DAY,
                            start_s, end_s, lat, lon, step_s, jitter,
                            utc_off_s, rng)

    if role == ROLE_DRIFTER:
        lat = (city.drifter_lat_idx + 0.5) * ANCHOR_RESOLUTION
        lon = (city.base_cell[1] + 2 * (idx % 50) + 0.5) * ANCHOR_RESOLUTION
        for d in range(0, cfg.span_days, 9):
            _emit_point(loc_lines, uid,
                        (day0 + d) * SECONDS_PER_DAY + 12 * 3600,
                        lat, lon, jitter, utc_off_s, rng)

    # POI visits in non-overlapping schedule slots
    visits = []
    for poi, day, start_s, dur in _plan_visits(city, idx, cohort,
                                               communities, rng):
        base = (day0 + day) * SECONDS_PER_DAY
        _emit_block(loc_lines, uid, base, start_s, start_s + dur * 60,
                    poi.lat, poi.lon, VISIT_OBS_STEP_S, jitter, utc_off_s, rng)
        visits.append((poi.poi_id, base + start_s - utc_off_s, dur))
    visits.sort(key=lambda v: (v[1], v[0]))

    # app invocations: heavy for community members, light for the next block
    if home is not None:
        app_lat, app_lon = _cell_center(home)
    else:
        app_lat = (city.drifter_lat_idx + 0.5) * ANCHOR_RESOLUTION
        app_lon = (city.base_cell[1] + 0.5) * ANCHOR_RESOLUTION
    total_hours = cfg.span_days * 24
    hour0 = day0 * 24
    for app in city.apps:
        if app.member_lo <= idx < app.member_hi:
            n_inv = rng.randint(101, 220)
        elif app.light_lo <= idx < app.light_hi:
            n_inv = rng.randint(5, 100)
        else:
            continue
        for _ in range(n_inv):
            ts = (hour0 + rng.randrange(total_hours)) * 3600
            up = rng.randrange(0, 200_000)
            down = rng.randrange(0, 2_000_000)
            app_lines.append(
                f"{uid},{format_ts(ts)},{app_lat:.4f},{app_lon:.4f},"
                f"{app.app_id},wifi,wifi0,,other,{up},{down}")

    plan = _UserPlan(idx, uid, role, home, work, district_id, cohort,
                     communities, tuple(visits))
    return loc_lines, app_lines, plan


def _generate_batch(args):
    cfg, lo, hi = args
    city = build_city(cfg)
    loc_lines = []
    app_lines = []
    plans = []
    for idx in range(lo, hi):
        ll, al, plan = _generate_user(city, idx)
        loc_lines.extend(ll)
        app_lines.extend(al)
        plans.append(plan)
    return loc_lines, app_lines, plans


def _tower_lines(city: City):
    cfg = city.cfg
    lines = []
    if cfg.n_users == 0:
        return lines
    hour0 = cfg.day0 * 24
    total_hours = cfg.span_days * 24
    for t_i, tw in enumerate(city.towers):
        rng = _stream(cfg.seed, f"tower:{t_i}")
        for k in range(tw.n_obs):
            uid = city.uids[k % cfg.n_users]
            ts = (hour0 + rng.randrange(total_hours)) * 3600
            dlat, dlon = _disc_offset(rng, tw.lat, tw.radius_km)
            up = rng.randrange(0, 200_000)
            down = rng.randrange(0, 2_000_000)
            lines.append(
                f"{uid},{format_ts(ts)},{tw.lat + dlat:.4f},{tw.lon + dlon:.4f},"
                f"background,cellular,{tw.operator},{tw.cell_id},{tw.tech},"
                f"{up},{down}")
    return lines


# -- truth and artifacts -----------------------------------------------------------


def _poly(lat0, lon0, size):
    lat1 = lat0 + size
    lon1 = lon0 + size
    return (f"{lon0:g} {lat0:g};{lon1:g} {lat0:g};"
            f"{lon1:g} {lat1:g};{lon0:g} {lat1:g}")


def _truth(city: City, plans):
    cfg = city.cfg
    users = {}
    communities = {app.app_id: [] for app in city.apps}
    visits = {}
    in_district = 0
    employed_in = 0
    commuters_in = 0
    for plan in plans:
        users[plan.uid] = {
            "index": plan.idx,
            "role": plan.role,
            "home": list(plan.home) if plan.home else None,
            "work": list(plan.work) if plan.work else None,
            "district": plan.district_id or None,
            "cohort": plan.cohort,
            "communities": list(plan.communities),
            "n_visits": {},
        }
        assigned = plan.cohort != COHORT_UNASSIGNED
        if plan.home is not None and assigned:
            in_district += 1
            if plan.work is not None:
                employed_in += 1
                if plan.work != plan.home:
                    commuters_in += 1
        for app_id in plan.communities:
            communities[app_id].append(plan.uid)
        if plan.visits:
            visits[plan.uid] = [[poi_id, format_ts(ts), dur]
                                for poi_id, ts, dur in plan.visits]
            counts = users[plan.uid]["n_visits"]
            for poi_id, _, _ in plan.visits:
                counts[poi_id] = counts.get(poi_id, 0) + 1

    n = cfg.n_users
    n_drifters = n - city.n_homed - city.n_nomads
    truth = {
        "seed": cfg.seed,
        "span_days": cfg.span_days,
        "start_date": cfg.start_date,
        "utc_offset": cfg.utc_offset,
        "funnel": {
            "users": n,
            "consistent": n - n_drifters,
            "homed": city.n_homed,
            "homed_in_district": in_district,
            "employed": employed_in,
            "commuters": commuters_in,
        },
        "counts": {
            "commuters": city.n_commuters,
            "homeworkers": city.n_homeworkers,
            "homebodies": city.n_homed - city.n_commuters - city.n_homeworkers,
            "nomads": city.n_nomads,
            "drifters": n_drifters,
        },
        "users": users,
        "communities": {k: sorted(v) for k, v in communities.items()},
        "visits": visits,
        "towers": {
            f"{tw.operator}/{tw.cell_id}": {
                "operator": tw.operator,
                "cell_id": tw.cell_id,
                "tech": tw.tech,
                "lat": tw.lat,
                "lon": tw.lon,
                "radius_km": tw.radius_km,
                "n_obs": tw.n_obs,
            } for tw in city.towers
        },
        "districts": {
            d.district_id: {
                "population": d.population,
                "income": d.income,
                "cohort": COHORT_BY_INCOME[d.income],
                "eligible": d.population >= 5000,
            } for d in city.districts
        },
    }
    return truth


def generate(cfg: SynthConfig, out_dir, threads: int = 1) -> dict:
    """Write location.csv, app.csv, census.csv, pois.csv, truth.json.

    Deterministic for a given config: per-user RNG streams and ordered batch
    merge make the bytes independent of the worker count.
    """
    os.makedirs(out_dir, exist_ok=True)
    city = build_city(cfg)
    n = cfg.n_users

    loc_path = os.path.join(out_dir, "location.csv")
    app_path = os.path.join(out_dir, "app.csv")
    plans = []
    batches = [(cfg, lo, min(lo + USERS_PER_BATCH, n))
               for lo in range(0, n, USERS_PER_BATCH)]
    n_loc = n_app = 0
    with open(loc_path, "w", encoding="utf-8") as loc_fh, \
         open(app_path, "w", encoding="utf-8") as app_fh:
        loc_fh.write(LOCATION_HEADER + "\n")
        app_fh.write(APP_HEADER + "\n")
        for loc_lines, app_lines, batch_plans in parallel_map(
                _generate_batch, batches, threads):
            for line in loc_lines:
                loc_fh.write(line + "\n")
            for line in app_lines:
                app_fh.write(line + "\n")
            plans.extend(batch_plans)
            n_loc += len(loc_lines)
            n_app += len(app_lines)
        tower_lines = _tower_lines(city)
        for line in tower_lines:
            app_fh.write(line + "\n")
        n_app += len(tower_lines)

    census_path = os.path.join(out_dir, "census.csv")
    with open(census_path, "w", encoding="utf-8") as fh:
        fh.write("district_id,name,kind,population,median_income,polygon\n")
        for d in city.districts:
            fh.write(f"{d.district_id},{d.name},town,{d.population},"
                     f"{d.income:g},{_poly(d.lat0, d.lon0, d.size)}\n")

    pois_path = os.path.join(out_dir, "pois.csv")
    with open(pois_path, "w", encoding="utf-8") as fh:
        fh.write("poi_id,category,lat,lon,radius_m\n")
        for poi in city.pois:
            fh.write(f"{poi.poi_id},{poi.category},{poi.lat:.6f},"
                     f"{poi.lon:.6f},{poi.radius_m:g}\n")

    truth = _truth(city, plans)
    truth_path = os.path.join(out_dir, "truth.json")
    with open(truth_path, "w", encoding="utf-8") as fh:
        json.dump(truth, fh, indent=2, sort_keys=True)
        fh.write("\n")

    return {
        "location": loc_path,
        "app": app_path,
        "census": census_path,
        "pois": pois_path,
        "truth": truth_path,
        "n_location_records": n_loc,
        "n_app_records": n_app,
        "n_users": n,
    }


def load_truth(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
