"""Core domain types and geodesic/grid/clock arithmetic shared by all stages.

Everything here is a pure function of its inputs and safe to call from any
number of workers.
"""

import math
from dataclasses import dataclass, fields

EARTH_RADIUS_KM = 6371.0

ANCHOR_RESOLUTION = 0.001
RAW_RESOLUTION = 0.0001


class InputError(ValueError):
    """Invalid or empty input to a library operation."""


class ConfigError(ValueError):
    """Inconsistent or unparseable configuration."""


@dataclass(frozen=True)
class GeoPoint:
    """A WGS-ish point: lat in [-90, 90], lon in [-180, 180), both finite."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise InputError(f"non-finite coordinate ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise InputError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon < 180.0:
            raise InputError(f"longitude {self.lon} outside [-180, 180)")


@dataclass(frozen=True)
class GridCell:
    """Half-open box [i*res, (i+1)*res) x [j*res, (j+1)*res) in degrees."""

    resolution: float
    lat_index: int
    lon_index: int

    def corner(self) -> GeoPoint:
        """Lower-left (south-west) corner of the cell."""
        return GeoPoint(self.lat_index * self.resolution,
                        self.lon_index * self.resolution)

    def center(self) -> GeoPoint:
        return GeoPoint((self.lat_index + 0.5) * self.resolution,
                        (self.lon_index + 0.5) * self.resolution)


def grid_index(value: float, resolution: float) -> int:
    """Floor-toward-negative-infinity grid index of a coordinate.

    The naive floor(value / resolution) misplaces values that are exact cell
    corners but not exactly representable (e.g. 0.029 / 0.001); the correction
    below returns the unique i with i*res <= value < (i+1)*res under float
    arithmetic, which makes corner round-trips exact.
    """
    idx = math.floor(value / resolution)
    if (idx + 1) * resolution <= value:
        idx += 1
    elif idx * resolution > value:
        idx -= 1
    return idx


def quantize(p: GeoPoint, resolution: float) -> GridCell:
    """Quantize a point to the grid cell containing it."""
    if not (isinstance(resolution, (int, float)) and resolution > 0
            and math.isfinite(resolution)):
        raise InputError(f"resolution must be a positive number, got {resolution}")
    return GridCell(resolution, grid_index(p.lat, resolution),
                    grid_index(p.lon, resolution))


def great_circle_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Haversine distance in km on a sphere of radius 6371.0 km."""
    rlat1 = math.radians(lat1)
    rlat2 = math.radians(lat2)
    dlat = rlat2 - rlat1
    dlon = math.radians(lon2 - lon1)
    a = (math.sin(dlat / 2.0) ** 2
         + math.cos(rlat1) * math.cos(rlat2) * math.sin(dlon / 2.0) ** 2)
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(a)))


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    return great_circle_km(a.lat, a.lon, b.lat, b.lon)


def centroid(points) -> GeoPoint:
    """Component-wise arithmetic mean of a non-empty list of points.

    Acceptable at city scale (inputs spanning < 5 degrees); documented
    approximation vs. a 3D unit-vector mean.
    """
    pts = list(points)
    if not pts:
        raise InputError("centroid of an empty point list")
    n = len(pts)
    return GeoPoint(sum(p.lat for p in pts) / n, sum(p.lon for p in pts) / n)


# -- local clock helpers -----------------------------------------------------
#
# Local time = UTC + fixed configured offset (no DST table). Day indices are
# days since the epoch in local time; weekday 0 is Monday.

SECONDS_PER_DAY = 86400


def local_seconds(ts_utc: int, utc_offset_hours: float) -> int:
    return ts_utc + int(round(utc_offset_hours * 3600))

def day_index(ts_local: int) -> int:
    return ts_local // SECONDS_PER_DAY


def weekday(day: int) -> int:
    """0=Monday .. 6=Sunday for a local day index (1970-01-01 was a Thursday)."""
    return (day + 3) % 7


def is_workday(day: int) -> bool:
    return weekday(day) < 5


def day_to_date(day: int) -> str:
    """ISO date string for a local day index."""
    y, m, d = civil_from_days(day)
    return f"{y:04d}-{m:02d}-{d:02d}"


def days_from_civil(y: int, m: int, d: int) -> int:
    """Days since 1970-01-01 for a proleptic Gregorian date."""
    y -= m <= 2
    era = (y if y >= 0 else y - 399) // 400
    yoe = y - era * 400
    doy = (153 * (m + (-3 if m > 2 else 9)) + 2) // 5 + d - 1
    doe = yoe * 365 + yoe // 4 - yoe // 100 + doy
    return era * 146097 + doe - 719468


def civil_from_days(z: int):
    """Inverse of days_from_civil: (year, month, day)."""
    z += 719468
    era = (z if z >= 0 else z - 146096) // 146097
    doe = z - era * 146097
    yoe = (doe - doe // 1460 + doe // 36524 - doe // 146096) // 365
    y = yoe + era * 400
    doy = doe - (365 * yoe + yoe // 4 - yoe // 100)
    mp = (5 * doy + 2) // 153
    d = doy - (153 * mp + 2) // 5 + 1
    m = mp + (3 if mp < 10 else -9)
    return y + (m <= 2), m, d


# -- pipeline configuration ---------------------------------------------------

WEEKDAY_NAMES = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")

COHORT_POOR = "poor"
COHORT_MIDDLE = "middle"
COHORT_RICH = "rich"
COHORT_UNASSIGNED = "unassigned"
COHORTS = (COHORT_POOR, COHORT_MIDDLE, COHORT_RICH, COHORT_UNASSIGNED)


@dataclass(frozen=True)
class PipelineConfig:
    """Every numeric threshold the analysis stages consult.

    Night and workday windows are local-time; a night starting at 22:00 of
    day d runs to 06:00 of day d+1 and is attributed to day d. Workdays are
    Monday-Friday.
    """

    anchor_resolution: float = ANCHOR_RESOLUTION
    raw_resolution: float = RAW_RESOLUTION
    night_start_hour: float = 22.0
    night_end_hour: float = 6.0
    work_start_hour: float = 8.0
    work_end_hour: float = 18.0
    home_min_hours_per_night: float = 2.0
    home_min_nights: int = 15
    work_min_hours_per_day: float = 4.0
    work_min_workdays: int = 30
    consistent_min_days: int = 30
    consistent_max_gap_days: int = 7
    dwell_gap_max: float = 30.0  # minutes
    poor_income_max: float = 45000.0
    rich_income_min: float = 75000.0
    district_population_min: int = 5000
    app_min_invocations: int = 100
    k_anonymity: int = 20
    utc_offset: float = 0.0  # hours

    def __post_init__(self):
        for name in ("home_min_nights", "work_min_workdays", "consistent_min_days",
                     "consistent_max_gap_days", "district_population_min",
                     "app_min_invocations", "k_anonymity"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("anchor_resolution", "raw_resolution", "dwell_gap_max",
                     "home_min_hours_per_night", "work_min_hours_per_day"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if not self.poor_income_max < self.rich_income_min:
            raise ConfigError("poor_income_max must be below rich_income_min")
        for name in ("night_start_hour", "night_end_hour",
                     "work_start_hour", "work_end_hour"):
            if not 0.0 <= getattr(self, name) < 24.0:
                raise ConfigError(f"{name} must be in [0, 24)")
        if self.work_end_hour <= self.work_start_hour:
            raise ConfigError("workday window must not wrap midnight")
        if not -14.0 <= self.utc_offset <= 14.0:
            raise ConfigError("utc_offset outside plausible range")

    # window geometry in seconds-of-day; the night window may wrap midnight
    @property
    def dwell_gap_seconds(self) -> int:
        return int(round(self.dwell_gap_max * 60))

    @property
    def night_start_s(self) -> int:
        return int(round(self.night_start_hour * 3600))

    @property
    def night_len_s(self) -> int:
        start = int(round(self.night_start_hour * 3600))
        end = int(round(self.night_end_hour * 3600))
        return end - start if end > start else SECONDS_PER_DAY - start + end

    @property
    def work_start_s(self) -> int:
        return int(round(self.work_start_hour * 3600))

    @property
    def work_len_s(self) -> int:
        return int(round(self.work_end_hour * 3600)) - self.work_start_s

    @property
    def utc_offset_s(self) -> int:
        return int(round(self.utc_offset * 3600))

    def to_lines(self) -> list:
        """Canonical key=value serialization (sorted; used for hashing)."""
        out = []
        for f in sorted(fields(self), key=lambda f: f.name):
            v = getattr(self, f.name)
            out.append(f"{f.name}={v!r}" if isinstance(v, float) else f"{f.name}={v}")
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        typed = {}
        by_name = {f.name: f for f in fields(cls)}
        for key, value in raw.items():
            f = by_name.get(key)
            if f is None:
                raise ConfigError(f"unknown pipeline config key: {key}")
            try:
                typed[key] = (int(value) if f.type in (int, "int")
                              else float(value))
            except (TypeError, ValueError):
                raise ConfigError(f"bad value for {key}: {value!r}") from None
        return cls(**typed)
