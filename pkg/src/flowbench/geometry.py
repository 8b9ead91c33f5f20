"""Parametric 2D domain construction: channel, elbow, wall inlets, obstacles.

Coordinates inside a :class:`DomainOutline` are meters; the parameter tables
and the placement helpers speak mm (the units of the range config). The
unrotated channel runs along +x from the upstream end at x = 0; the elbow
(when present) starts at wall arclength ELBOW_START_MM and bends upward,
preserving the 1600 mm centerline length. Whole-domain rotation is applied
last.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FeasibilityError
from .params import (
    DesignPoint,
    ELBOW_START_MM,
    INLET_WIDTH_MM,
    MIN_DISTANCE_MM,
)

MM = 1e-3  # mm -> m

TAG_WALL = "Wall"
TAG_INLET1 = "Inlet1"
TAG_INLET2 = "Inlet2"
TAG_INLET3 = "Inlet3"
TAG_OUTLET = "Outlet"


def object_wall_tag(object_id: int) -> str:
    return f"ObjectWall{object_id}"


@dataclass(frozen=True)
class ShapeSpec:
    """Obstacle shape: a cylinder or one of ten four-digit-series airfoils."""

    kind: str  # "cylinder" | "airfoil"
    radius_mm: float  # cylinder radius; for airfoils half the chord
    family: int = 0
    angle_deg: float = 0.0

    @classmethod
    def from_design_point(cls, dp: DesignPoint, object_id: int) -> "ShapeSpec":
        label = str(dp[f"Object{object_id}Type"])
        radius = float(dp[f"Object{object_id}Radius"])
        if label == "cylinder":
            return cls("cylinder", radius)
        if label.startswith("airfoil"):
            return cls("airfoil", radius, family=int(label[len("airfoil"):]),
                       angle_deg=float(dp.get(f"Object{object_id}Angle", 0.0)))
        raise FeasibilityError(f"unknown object type {label!r}")


@dataclass(frozen=True)
class LineSegment:
    p0: tuple[float, float]
    p1: tuple[float, float]
    tag: str


@dataclass(frozen=True)
class ArcSegment:
    """Circular arc from theta0 to theta1 (radians, linear sweep, either sign)."""

    center: tuple[float, float]
    radius: float
    theta0: float
    theta1: float
    tag: str

    def point(self, theta: float) -> tuple[float, float]:
        return (self.center[0] + self.radius * math.cos(theta),
                self.center[1] + self.radius * math.sin(theta))


Segment = LineSegment | ArcSegment


@dataclass
class DomainOutline:
    """Closed outer loop (CCW) plus clockwise interior hole loops, tagged."""

    outer: list[Segment]
    holes: list[list[Segment]]
    orientation_deg: float = 0.0


# ---------------------------------------------------------------------------
# Placement


def object_y_position(y_factor: float, domain_height: float, object_height: float) -> float:
    """Vertical center position (mm) keeping 30 mm clearance at both walls.

    ``object_height`` is the object's half vertical extent (center to edge),
    so y_factor 0 puts the lower edge exactly MIN_DISTANCE_MM off the bottom
    wall and y_factor 1 mirrors that at the top.
    """
    if domain_height <= 0 or object_height <= 0:
        raise FeasibilityError("domain height and object height must be positive")
    usable = domain_height - 2.0 * object_height - 2.0 * MIN_DISTANCE_MM
    if usable < 0:
        raise FeasibilityError(
            f"object of half-height {object_height} mm cannot keep "
            f"{MIN_DISTANCE_MM} mm clearance in a {domain_height} mm channel")
    return MIN_DISTANCE_MM + object_height + y_factor * usable


# ---------------------------------------------------------------------------
# Airfoil profiles

# Ten four-digit-series (max camber, camber position, thickness) combinations
# with increasing camber and thickness. Families 0..4 serve the five-shape
# variants; 5..9 extend to ten.
AIRFOIL_FAMILIES = (
    (0.00, 0.40, 0.08),
    (0.00, 0.40, 0.12),
    (0.02, 0.40, 0.08),
    (0.02, 0.40, 0.12),
    (0.04, 0.40, 0.10),
    (0.04, 0.40, 0.14),
    (0.06, 0.35, 0.10),
    (0.06, 0.45, 0.14),
    (0.08, 0.40, 0.12),
    (0.09, 0.45, 0.16),
)

# Profiles are truncated at this chord fraction and closed with a short blunt
# trailing-edge cap, then rescaled to full chord. Sharp trailing edges would
# put sub-20-degree input angles in the outline, which the quality mesher
# cannot honor.
_TE_CUT = 0.975


def airfoil_profile(family: int, chord: float, angle_deg: float, n_points: int = 48) -> np.ndarray:
    """Closed simple polyline of a four-digit-series airfoil.

    Scaled so the extent along the chord direction equals ``chord``, then
    rotated by the angle of attack about the quarter-chord point. Returns an
    (N, 2) array; the ring closes implicitly (last vertex connects to first).
    Positive angle pitches the leading edge up.
    """
    if not 0 <= family < len(AIRFOIL_FAMILIES):
        raise FeasibilityError(f"airfoil family {family} outside 0..{len(AIRFOIL_FAMILIES) - 1}")
    if n_points < 16:
        raise FeasibilityError("airfoil profile needs n_points >= 16")
    m, p, t = AIRFOIL_FAMILIES[family]

    half = max(8, n_points // 2)
    beta = np.linspace(0.0, math.pi, half)
    x = 0.5 * (1.0 - np.cos(beta)) * _TE_CUT  # cosine spacing, LE cluster

    yt = 5.0 * t * (0.2969 * np.sqrt(x) - 0.1260 * x - 0.3516 * x**2
                    + 0.2843 * x**3 - 0.1036 * x**4)
    if m > 0:
        yc = np.where(x < p,
                      m / p**2 * (2 * p * x - x**2),
                      m / (1 - p)**2 * ((1 - 2 * p) + 2 * p * x - x**2))
        dyc = np.where(x < p,
                       2 * m / p**2 * (p - x),
                       2 * m / (1 - p)**2 * (p - x))
    else:
        yc = np.zeros_like(x)
        dyc = np.zeros_like(x)
    theta = np.arctan(dyc)

    xu = x - yt * np.sin(theta)
    yu = yc + yt * np.cos(theta)
    xl = x + yt * np.sin(theta)
    yl = yc - yt * np.cos(theta)

    # Upper surface TE->LE, then lower surface LE->TE; the ring closure edge
    # is the blunt trailing-edge cap. Skip the duplicated LE point.
    pts = np.concatenate([
        np.stack([xu[::-1], yu[::-1]], axis=1),
        np.stack([xl[1:], yl[1:]], axis=1),
    ])

    # Uniform rescale so the extent along the chord axis is exactly `chord`
    # (truncation and camber both perturb the raw extent slightly).
    x_lo, x_hi = float(pts[:, 0].min()), float(pts[:, 0].max())
    pts[:, 0] -= x_lo
    pts *= chord / (x_hi - x_lo)

    a = math.radians(angle_deg)
    # Positive angle of attack = leading edge up = clockwise rotation of the
    # geometry for flow along +x.
    rot = np.array([[math.cos(a), math.sin(a)], [-math.sin(a), math.cos(a)]])
    anchor = np.array([0.25 * chord, 0.0])
    return (pts - anchor) @ rot.T + anchor


def _polyline_ring(pts: np.ndarray) -> np.ndarray:
    """Drop consecutive duplicates and an explicit closing vertex, if any."""
    keep = [0]
    for i in range(1, len(pts)):
        if not np.allclose(pts[i], pts[keep[-1]], atol=1e-12):
            keep.append(i)
    ring = pts[keep]
    if np.allclose(ring[0], ring[-1], atol=1e-12):
        ring = ring[:-1]
    return ring


def _ring_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def object_polygon_mm(dp: DesignPoint, object_id: int, n_points: int = 48) -> np.ndarray:
    """Object outline in mm, placed in the unrotated channel, CCW."""
    shape = ShapeSpec.from_design_point(dp, object_id)
    height = float(dp["DomainHeight"])
    x_pos = float(dp[f"Object{object_id}xPos"])
    y_factor = float(dp[f"Object{object_id}yFactor"])

    if shape.kind == "cylinder":
        half_height = shape.radius_mm
        y_pos = object_y_position(y_factor, height, half_height)
        ang = np.linspace(0.0, 2.0 * math.pi, max(n_points, 24), endpoint=False)
        return np.stack([x_pos + shape.radius_mm * np.cos(ang),
                         y_pos + shape.radius_mm * np.sin(ang)], axis=1)

    pts = airfoil_profile(shape.family, 2.0 * shape.radius_mm, shape.angle_deg, n_points)
    pts = _polyline_ring(pts)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    half_height = (hi[1] - lo[1]) / 2.0
    y_pos = object_y_position(y_factor, height, half_height)
    center = (lo + hi) / 2.0
    pts = pts - center + np.array([x_pos, y_pos])
    if _ring_area(pts) < 0:
        pts = pts[::-1]
    return pts


# ---------------------------------------------------------------------------
# Outline construction


def _hole_from_polygon(pts_m: np.ndarray, tag: str) -> list[Segment]:
    """Clockwise LineSegment loop from a CCW polygon in meters."""
    ring = pts_m[::-1]  # CW
    segs = []
    for i in range(len(ring)):
        a = tuple(ring[i])
        b = tuple(ring[(i + 1) % len(ring)])
        segs.append(LineSegment(a, b, tag))
    return segs


def _split_wall(p0, p1, openings, wall_tag, base_y, length):
    """Split a straight wall [p0,p1] by tagged inlet openings along its run.

    ``openings`` is a list of (start_arclength, end_arclength, tag) measured
    from p0 in meters; returns segments in order from p0 to p1.
    """
    (x0, y0), (x1, y1) = p0, p1
    dx, dy = (x1 - x0) / length, (y1 - y0) / length
    marks = [0.0]
    tags = []
    pos = 0.0
    for s, e, tag in sorted(openings):
        if s > pos:
            tags.append(wall_tag)
            marks.append(s)
        tags.append(tag)
        marks.append(e)
        pos = e
    if pos < length:
        tags.append(wall_tag)
        marks.append(length)
    segs = []
    for i, tag in enumerate(tags):
        a = (x0 + dx * marks[i], y0 + dy * marks[i])
        b = (x0 + dx * marks[i + 1], y0 + dy * marks[i + 1])
        segs.append(LineSegment(a, b, tag))
    return segs


def build_outline(dp: DesignPoint) -> DomainOutline:
    """Domain outline for a validated design point, rotation applied.

    Channel of centerline length 1600 mm and height 400 mm; Inlet1 spans the
    upstream end and the Outlet the downstream end; Inlet2/Inlet3 are 20 mm
    openings on the top/bottom wall centered at their xPos (wall arclength
    from the upstream end); the elbow, when the variant has one, starts at
    arclength 800 mm and bends upward by the elbow angle, its inner radius
    given by the design point.
    """
    length = float(dp["DomainLength"]) * MM
    height = float(dp["DomainHeight"]) * MM
    elbow_deg = float(dp.get("DomainElbowAngle", 0.0))
    elbow_radius = float(dp.get("DomainElbowRadius", 0.0)) * MM
    straight = ELBOW_START_MM * MM

    half_w = (INLET_WIDTH_MM / 2.0) * MM
    x2 = float(dp["Inlet2xPos"]) * MM
    x3 = float(dp["Inlet3xPos"]) * MM
    top_openings = [(x2 - half_w, x2 + half_w, TAG_INLET2)]
    bottom_openings = [(x3 - half_w, x3 + half_w, TAG_INLET3)]

    beta = math.radians(elbow_deg)
    use_elbow = beta > 1e-12 and elbow_radius > 0.0

    outer: list[Segment] = []
    if not use_elbow:
        # Plain rectangle; keep the full centerline length.
        outer += _split_wall((0.0, 0.0), (length, 0.0), bottom_openings, TAG_WALL, 0.0, length)
        outer.append(LineSegment((length, 0.0), (length, height), TAG_OUTLET))
        outer += _split_wall((length, height), (0.0, height),
                             [(length - e, length - s, t) for s, e, t in top_openings],
                             TAG_WALL, height, length)
        outer.append(LineSegment((0.0, height), (0.0, 0.0), TAG_INLET1))
    else:
        center = (straight, height + elbow_radius)  # bend upward, inner wall on top
        r_in = elbow_radius
        r_out = elbow_radius + height
        centerline_r = elbow_radius + height / 2.0
        tail = length - straight - centerline_r * beta
        if tail < 0:
            raise FeasibilityError(
                "elbow consumes more centerline than the channel provides")
        direction = (math.cos(beta), math.sin(beta))

        def arc_pt(r, th):
            return (center[0] + r * math.sin(th), center[1] - r * math.cos(th))

        # CCW loop: bottom wall, outer arc, outer tail, outlet, inner tail
        # (reversed), inner arc (reversed), top wall (reversed), inlet1.
        outer += _split_wall((0.0, 0.0), (straight, 0.0), bottom_openings,
                             TAG_WALL, 0.0, straight)
        outer.append(ArcSegment(center, r_out, -math.pi / 2.0, -math.pi / 2.0 + beta, TAG_WALL))
        q_out0 = arc_pt(r_out, beta)
        q_out1 = (q_out0[0] + tail * direction[0], q_out0[1] + tail * direction[1])
        outer.append(LineSegment(q_out0, q_out1, TAG_WALL))
        q_in0 = arc_pt(r_in, beta)
        q_in1 = (q_in0[0] + tail * direction[0], q_in0[1] + tail * direction[1])
        outer.append(LineSegment(q_out1, q_in1, TAG_OUTLET))
        outer.append(LineSegment(q_in1, q_in0, TAG_WALL))
        outer.append(ArcSegment(center, r_in, -math.pi / 2.0 + beta, -math.pi / 2.0, TAG_WALL))
        outer += _split_wall((straight, height), (0.0, height),
                             [(straight - e, straight - s, t) for s, e, t in top_openings],
                             TAG_WALL, height, straight)
        outer.append(LineSegment((0.0, height), (0.0, 0.0), TAG_INLET1))

    holes: list[list[Segment]] = []
    for i in dp.object_ids:
        poly_m = object_polygon_mm(dp, i) * MM
        holes.append(_hole_from_polygon(poly_m, object_wall_tag(i)))

    outline = DomainOutline(outer=outer, holes=holes, orientation_deg=0.0)
    theta = float(dp.get("DomainOrientation", 0.0))
    if abs(theta) > 0:
        outline = rotate_outline(outline, theta)
    return outline


def rotate_outline(outline: DomainOutline, theta_deg: float) -> DomainOutline:
    """Rigid rotation of every vertex about the origin; tags preserved."""
    a = math.radians(theta_deg)
    c, s = math.cos(a), math.sin(a)

    def rot_pt(p):
        return (p[0] * c - p[1] * s, p[0] * s + p[1] * c)

    def rot_seg(seg: Segment) -> Segment:
        if isinstance(seg, LineSegment):
            return LineSegment(rot_pt(seg.p0), rot_pt(seg.p1), seg.tag)
        return ArcSegment(rot_pt(seg.center), seg.radius,
                          seg.theta0 + a, seg.theta1 + a, seg.tag)

    return DomainOutline(
        outer=[rot_seg(s) for s in outline.outer],
        holes=[[rot_seg(s) for s in loop] for loop in outline.holes],
        orientation_deg=outline.orientation_deg + theta_deg,
    )


# ---------------------------------------------------------------------------
# Discretization for meshing / plotting


def sample_segment(seg: Segment, max_len: float) -> list[tuple[float, float]]:
    """Points subdividing a segment at spacing <= max_len, excluding its end."""
    if isinstance(seg, LineSegment):
        dist = math.hypot(seg.p1[0] - seg.p0[0], seg.p1[1] - seg.p0[1])
        n = max(1, math.ceil(dist / max_len - 1e-9))
        return [(seg.p0[0] + (seg.p1[0] - seg.p0[0]) * i / n,
                 seg.p0[1] + (seg.p1[1] - seg.p0[1]) * i / n) for i in range(n)]
    sweep = abs(seg.theta1 - seg.theta0)
    arclen = seg.radius * sweep
    n = max(2, math.ceil(arclen / max_len - 1e-9))
    return [seg.point(seg.theta0 + (seg.theta1 - seg.theta0) * i / n) for i in range(n)]


@dataclass
class SampledOutline:
    """Piecewise-linear rendering of an outline: the mesher's input."""

    points: list[tuple[float, float]]
    segments: list[tuple[int, int, str]]
    # Per-segment curve support for midpoint snapping: (cx, cy, r) or None.
    curves: list[tuple[float, float, float] | None]
    hole_seeds: list[tuple[float, float]]


def sample_outline(outline: DomainOutline, max_len: float,
                   min_inlet_subsegments: int = 2) -> SampledOutline:
    """Discretize outline loops into a tagged planar straight-line graph.

    Inlet2/Inlet3 openings always get at least ``min_inlet_subsegments``
    subsegments so an interior node exists to carry the inflow condition at
    coarse resolutions.
    """
    from shapely.geometry import Polygon

    points: list[tuple[float, float]] = []
    segments: list[tuple[int, int, str]] = []
    curves: list[tuple[float, float, float] | None] = []
    index: dict[tuple[float, float], int] = {}

    def add_point(p) -> int:
        key = (round(p[0], 12), round(p[1], 12))
        if key not in index:
            index[key] = len(points)
            points.append((float(p[0]), float(p[1])))
        return index[key]

    def add_loop(loop: list[Segment]):
        loop_pts: list[tuple[int, Segment]] = []
        for seg in loop:
            eff_len = max_len
            if seg.tag in (TAG_INLET2, TAG_INLET3) and isinstance(seg, LineSegment):
                width = math.hypot(seg.p1[0] - seg.p0[0], seg.p1[1] - seg.p0[1])
                eff_len = min(eff_len, width / min_inlet_subsegments)
            for p in sample_segment(seg, eff_len):
                loop_pts.append((add_point(p), seg))
        for i, (a, seg) in enumerate(loop_pts):
            b = loop_pts[(i + 1) % len(loop_pts)][0]
            if a == b:
                continue
            segments.append((a, b, seg.tag))
            if isinstance(seg, ArcSegment):
                curves.append((seg.center[0], seg.center[1], seg.radius))
            else:
                curves.append(None)

    add_loop(outline.outer)
    seeds = []
    for loop in outline.holes:
        start = len(segments)
        add_loop(loop)
        ring = []
        for a, b, _tag in segments[start:]:
            ring.append(points[a])
        seed = Polygon(ring).representative_point()
        seeds.append((seed.x, seed.y))
    return SampledOutline(points, segments, curves, seeds)


def outline_polygon(outline: DomainOutline, max_len: float = 5e-3):
    """Shapely polygon of the outline (holes subtracted), for validation."""
    from shapely.geometry import Polygon

    sampled = sample_outline(outline, max_len)
    n_outer_segs = 0
    ring = []
    for (a, b, _t), _c in zip(sampled.segments, sampled.curves):
        ring.append(sampled.points[a])
        n_outer_segs += 1
        if b == 0:  # outer loop closes back on the first point
            break
    hole_rings = []
    i = n_outer_segs
    while i < len(sampled.segments):
        start_pt = sampled.segments[i][0]
        hole = []
        while i < len(sampled.segments):
            a, b, _t = sampled.segments[i]
            hole.append(sampled.points[a])
            i += 1
            if b == start_pt:
                break
        hole_rings.append(hole)
    return Polygon(ring, hole_rings)


def export_outline(outline: DomainOutline, path: str | Path) -> Path:
    """Plain-text dump of the segment list with tags, for debugging."""
    path = Path(path)
    lines = [f"# orientation_deg {outline.orientation_deg!r}"]

    def fmt(loop, label):
        lines.append(f"loop {label}")
        for seg in loop:
            if isinstance(seg, LineSegment):
                lines.append(f"line {seg.p0[0]!r} {seg.p0[1]!r} "
                             f"{seg.p1[0]!r} {seg.p1[1]!r} {seg.tag}")
            else:
                lines.append(f"arc {seg.center[0]!r} {seg.center[1]!r} {seg.radius!r} "
                             f"{seg.theta0!r} {seg.theta1!r} {seg.tag}")

    fmt(outline.outer, "outer")
    for i, hole in enumerate(outline.holes):
        fmt(hole, f"hole{i}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
