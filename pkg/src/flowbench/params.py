"""Per-variant parameter tables and Latin hypercube design-point sampling.

The seven dataset variants share one parameter vocabulary; each variant fixes
some parameters and opens ranges for others. Ranges live in ``variants.cfg``
(human editable, units in its comments) and are loaded once per process.

Sampling is stratified: every continuous parameter range is divided into n
equal sub-ranges and each sub-range receives exactly one sample, at a uniform
position inside it. Categorical parameters cycle their labels through a
seeded permutation so label counts stay balanced.
"""

from __future__ import annotations

import configparser
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import FeasibilityError, FlowbenchError

VARIANT_IDS = ("base", "rotated", "range", "topology", "dynamic", "full", "mesh")

#: Minimum clearance between an object and any wall or other object, mm.
MIN_DISTANCE_MM = 30.0
#: Opening width of the two small wall inlets, mm.
INLET_WIDTH_MM = 20.0
#: Arclength along the straight walls at which the elbow bend begins, mm.
ELBOW_START_MM = 800.0

_POSITION_PARAMS = ("Object1xPos", "Object1yFactor", "Object2xPos", "Object2yFactor")


@dataclass(frozen=True)
class ParamRange:
    """One parameter's admissible values for a given variant.

    ``lo == hi`` encodes a fixed parameter. Categorical parameters carry a
    label tuple and ignore ``lo``/``hi``.
    """

    name: str
    lo: float = 0.0
    hi: float = 0.0
    kind: str = "continuous"  # "continuous" | "categorical"
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("continuous", "categorical"):
            raise ValueError(f"unknown range kind {self.kind!r}")
        if self.kind == "continuous" and self.lo > self.hi:
            raise ValueError(f"{self.name}: lo {self.lo} > hi {self.hi}")
        if self.kind == "categorical" and not self.labels:
            raise ValueError(f"{self.name}: categorical range without labels")

    @property
    def degenerate(self) -> bool:
        return self.kind == "continuous" and self.lo == self.hi

    def contains(self, value, tol: float = 1e-9) -> bool:
        if self.kind == "categorical":
            return value in self.labels
        span = max(abs(self.lo), abs(self.hi), 1.0)
        return self.lo - tol * span <= float(value) <= self.hi + tol * span


@dataclass(frozen=True)
class DatasetVariant:
    """A benchmark variant: parameter table id plus mesh-resolution factor."""

    id: str
    mesh_resolution_factor: float = 1.0

    def __post_init__(self):
        if self.id not in VARIANT_IDS:
            raise ValueError(f"unknown variant {self.id!r}")


VARIANTS: dict[str, DatasetVariant] = {
    vid: DatasetVariant(vid, 2.0 if vid == "mesh" else 1.0) for vid in VARIANT_IDS
}


def get_variant(name: str | DatasetVariant) -> DatasetVariant:
    if isinstance(name, DatasetVariant):
        return name
    key = name.strip().lower()
    if key not in VARIANTS:
        raise FlowbenchError(f"unknown variant {name!r}; options: {', '.join(VARIANT_IDS)}")
    return VARIANTS[key]


@dataclass
class DesignPoint:
    """One sampled parameter vector defining a single simulation."""

    variant: DatasetVariant | None
    index: int
    values: dict[str, float | str] = field(default_factory=dict)
    rng_seed: int = 0

    def __getitem__(self, name: str):
        return self.values[name]

    def get(self, name: str, default=None):
        return self.values.get(name, default)

    @property
    def object_ids(self) -> list[int]:
        """Indices (1-based) of the objects present in this design point."""
        return [i for i in (1, 2) if f"Object{i}Type" in self.values]

    def to_json(self) -> str:
        payload = {
            "variant": self.variant.id,
            "index": self.index,
            "rng_seed": self.rng_seed,
            "values": self.values,
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DesignPoint":
        payload = json.loads(text)
        return cls(
            variant=get_variant(payload["variant"]),
            index=int(payload["index"]),
            values=dict(payload["values"]),
            rng_seed=int(payload["rng_seed"]),
        )


# ---------------------------------------------------------------------------
# Range table loading


def _parse_entry(name: str, raw: str) -> ParamRange:
    parts = raw.split()
    if not parts:
        raise FlowbenchError(f"empty range entry for {name}")
    try:
        numbers = [float(p) for p in parts]
    except ValueError:
        return ParamRange(name, kind="categorical", labels=tuple(parts))
    if len(numbers) == 1:
        return ParamRange(name, numbers[0], numbers[0])
    if len(numbers) == 2:
        return ParamRange(name, numbers[0], numbers[1])
    raise FlowbenchError(f"range entry for {name} has {len(numbers)} numbers; expected 1 or 2")


def load_range_tables(path: str | Path | None = None) -> dict[str, dict[str, ParamRange]]:
    """Parse the variant range config into per-variant ordered range maps."""
    parser = configparser.ConfigParser()
    if path is None:
        text = resources.files("flowbench").joinpath("variants.cfg").read_text()
    else:
        text = Path(path).read_text()
    parser.read_string(text)

    tables: dict[str, dict[str, ParamRange]] = {}

    def build(section: str) -> dict[str, ParamRange]:
        if section in tables:
            return tables[section]
        if section not in parser:
            raise FlowbenchError(f"variant section [{section}] missing from range config")
        items = dict(parser[section])
        base: dict[str, ParamRange] = {}
        parent = items.pop("inherit", None)
        if parent:
            base = dict(build(parent.strip()))
        for key, raw in items.items():
            # configparser lowercases keys; recover canonical casing.
            name = _CANONICAL_NAMES.get(key, key)
            base[name] = _parse_entry(name, raw)
        tables[section] = base
        return base

    for vid in VARIANT_IDS:
        build(vid)
    return {vid: tables[vid] for vid in VARIANT_IDS}


_ALL_PARAM_NAMES = (
    "DomainLength", "DomainHeight", "DomainElbowAngle", "DomainElbowRadius",
    "DomainOrientation", "Inlet2xPos", "Inlet2Angle", "Inlet3xPos", "Inlet3Angle",
    "Object1Type", "Object1xPos", "Object1yFactor", "Object1Angle", "Object1Radius",
    "Object2Type", "Object2xPos", "Object2yFactor", "Object2Angle", "Object2Radius",
    "Inlet1v", "Inlet2vMean", "Inlet2vAmplitude", "Inlet2vFrequency", "Inlet2T",
    "Inlet3vMean", "Inlet3vAmplitude", "Inlet3vFrequency", "Inlet3T",
    "Object1T", "Object2T", "ThermalConductivity", "HeatCapacity",
)
_CANONICAL_NAMES = {name.lower(): name for name in _ALL_PARAM_NAMES}

_TABLES: dict[str, dict[str, ParamRange]] | None = None


def _tables() -> dict[str, dict[str, ParamRange]]:
    global _TABLES
    if _TABLES is None:
        _TABLES = load_range_tables()
    return _TABLES


def variant_ranges(variant: str | DatasetVariant) -> list[ParamRange]:
    """Complete ordered parameter list for a variant, bounds from the config.

    Fixed parameters appear as degenerate ranges (lo == hi); parameters not
    applicable to the variant are absent.
    """
    v = get_variant(variant)
    table = _tables()[v.id]
    ordered = [table[name] for name in _ALL_PARAM_NAMES if name in table]
    # Anything in the config that is not in the canonical ordering still ships.
    extras = [r for name, r in table.items() if name not in _ALL_PARAM_NAMES]
    return ordered + extras


# ---------------------------------------------------------------------------
# Latin hypercube sampling


def _rng_for(seed: int, *salt: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0x7FFFFFFF, *salt]))


def lhs_sample(
    ranges: list[ParamRange],
    n: int,
    seed: int,
    variant: str | DatasetVariant | None = None,
) -> list[DesignPoint]:
    """Draw n stratified design points over the given ranges.

    Each continuous range is cut into n equal sub-ranges; every sub-range
    receives exactly one sample at an independently uniform position inside
    it, and sub-range assignment is permuted independently per parameter.
    Deterministic in (ranges, n, seed).
    """
    if n < 1:
        raise FlowbenchError("empty request: n must be >= 1")
    rng = _rng_for(seed)
    columns: dict[str, list] = {}
    for r in ranges:
        if r.kind == "categorical":
            reps = -(-n // len(r.labels))  # ceil
            pool = (list(r.labels) * reps)[:n]
            order = rng.permutation(n)
            columns[r.name] = [pool[i] for i in order]
        elif r.degenerate:
            rng.permutation(n)  # keep the stream layout identical either way
            rng.random(n)
            columns[r.name] = [r.lo] * n
        else:
            perm = rng.permutation(n)
            offsets = rng.random(n)
            width = (r.hi - r.lo) / n
            columns[r.name] = [r.lo + (int(s) + u) * width for s, u in zip(perm, offsets)]
    v = get_variant(variant) if variant is not None else None
    points = []
    for i in range(n):
        values = {name: col[i] for name, col in columns.items()}
        points.append(DesignPoint(variant=v, index=i, values=values, rng_seed=int(seed)))
    return points


def stratum_of(r: ParamRange, value: float, n: int) -> int:
    """Sub-range index a continuous value falls into when split n ways."""
    if r.degenerate:
        return 0
    width = (r.hi - r.lo) / n
    return min(n - 1, max(0, int((float(value) - r.lo) / width)))


# ---------------------------------------------------------------------------
# Feasibility


def validate_design_point(dp: DesignPoint) -> list[str]:
    """Check ranges and the object/inlet clearance rules.

    Returns a list of human-readable violations; empty means the point is
    feasible. Never raises for bad values.
    """
    from . import geometry  # local import; geometry depends on this module

    violations: list[str] = []
    table = _tables()[dp.variant.id]
    for name, r in table.items():
        if name not in dp.values:
            violations.append(f"missing parameter {name}")
        elif not r.contains(dp.values[name]):
            violations.append(f"{name}={dp.values[name]!r} outside range [{r.lo}, {r.hi}]")
    if violations:
        return violations

    height = float(dp["DomainHeight"])
    placements = []
    for i in dp.object_ids:
        try:
            poly = geometry.object_polygon_mm(dp, i)
        except FeasibilityError as exc:
            violations.append(f"Object{i}: {exc}")
            continue
        placements.append((i, poly))
        xs = poly[:, 0]
        ys = poly[:, 1]
        gap = MIN_DISTANCE_MM - 1e-9
        if xs.min() < gap or xs.max() > ELBOW_START_MM - gap:
            violations.append(f"Object{i} closer than {MIN_DISTANCE_MM} mm to an end wall")
        if ys.min() < gap or ys.max() > height - gap:
            violations.append(f"Object{i} closer than {MIN_DISTANCE_MM} mm to a side wall")

    if len(placements) == 2:
        from shapely.geometry import Polygon

        (ia, pa), (ib, pb) = placements
        dist = Polygon(pa).distance(Polygon(pb))
        if dist < MIN_DISTANCE_MM - 1e-9:
            violations.append(
                f"object gap below {MIN_DISTANCE_MM} mm (Object{ia}/Object{ib}: {dist:.2f} mm)")

    half = INLET_WIDTH_MM / 2
    for i in (2, 3):
        x = float(dp[f"Inlet{i}xPos"])
        if x - half < 1e-9:
            violations.append(f"Inlet{i} opening overlaps the upstream corner")
        if x + half > ELBOW_START_MM - 1e-9:
            violations.append(f"Inlet{i} opening overlaps the elbow arc")
    return violations


def sample_design_points(variant: str | DatasetVariant, n: int, seed: int) -> list[DesignPoint]:
    """LHS sample plus feasibility repair.

    Infeasible points redraw their object-position coordinates inside their
    originally assigned strata (up to 100 attempts), then with the stratum
    constraint relaxed. Deterministic in (variant, n, seed).
    """
    v = get_variant(variant)
    ranges = {r.name: r for r in variant_ranges(v)}
    points = lhs_sample(list(ranges.values()), n, seed, v)
    for dp in points:
        if not validate_design_point(dp):
            continue
        rng = _rng_for(seed, dp.index, 1)
        redraw = [ranges[name] for name in _POSITION_PARAMS if name in dp.values]
        ok = False
        for attempt in range(1000):
            for r in redraw:
                if r.degenerate:
                    continue
                width = (r.hi - r.lo) / n
                if attempt < 100:
                    s = stratum_of(r, float(dp.values[r.name]), n)
                    dp.values[r.name] = r.lo + (s + rng.random()) * width
                else:
                    dp.values[r.name] = r.lo + rng.random() * (r.hi - r.lo)
            if not validate_design_point(dp):
                ok = True
                break
        if not ok:
            raise FeasibilityError(
                f"could not repair design point {dp.index} of variant {v.id} "
                f"after 1000 redraws: {validate_design_point(dp)}")
    return points


# ---------------------------------------------------------------------------
# Design-point list files (line-delimited JSON records)


def write_design_points(points: list[DesignPoint], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for dp in points:
            fh.write(dp.to_json() + "\n")
    return path


def read_design_points(path: str | Path) -> list[DesignPoint]:
    points = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                points.append(DesignPoint.from_json(line))
    return points
