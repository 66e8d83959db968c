"""Vascular phantom as an occupancy grid, plus the navigation fields derived from it.

Geometry conventions used across the package:
- Grid cells are indexed [row, col] = [y, x]; cell (i, j) has its center at
  ((i + 0.5) * resolution, (j + 0.5) * resolution) in mm, x right, y up-or-down
  agnostic (renderers decide).
- All distances are mm. The distance transform is exact Euclidean: squared
  distances are computed as exact integers in cell units and scaled by the
  resolution only at the end, so an O(N^2) brute-force scan must agree bit for
  bit on the integer squared values.
- Everything here is immutable after construction and safe to share between
  concurrently running trials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyGridError,
    InfeasibleSpecError,
    InvalidParamsError,
    MalformedImageError,
    OutOfBoundsError,
)

FREE_PIXEL_THRESHOLD = 128  # PGM value >= threshold maps to free
FAR_AWAY_MM = 1.0e6  # sentinel arc distance when a path has no bifurcation vertex


# ---------------------------------------------------------------------------
# occupancy grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OccupancyGrid:
    """Binary workspace map. ``occupied[row, col]`` is True on walls.

    The boundary ring is always occupied so the workspace is closed and the
    distance transform always has at least one site.
    """

    occupied: np.ndarray  # bool, shape (height, width)
    resolution: float  # mm per cell

    def __post_init__(self) -> None:
        if self.occupied.size == 0:
            raise EmptyGridError("grid has no cells")
        if self.resolution <= 0:
            raise InvalidParamsError(f"resolution must be > 0, got {self.resolution}")
        self.occupied.setflags(write=False)

    @property
    def height(self) -> int:
        return self.occupied.shape[0]

    @property
    def width(self) -> int:
        return self.occupied.shape[1]

    @property
    def width_mm(self) -> float:
        return self.width * self.resolution

    @property
    def height_mm(self) -> float:
        return self.height * self.resolution

    def cell_of(self, pos: np.ndarray) -> tuple[int, int]:
        """(row, col) of the cell containing a position in mm. Raises outside."""
        x, y = float(pos[0]), float(pos[1])
        if not (0.0 <= x < self.width_mm and 0.0 <= y < self.height_mm):
            raise OutOfBoundsError(f"position ({x}, {y}) outside grid")
        return min(int(y / self.resolution), self.height - 1), min(
            int(x / self.resolution), self.width - 1
        )

    def in_bounds(self, pos: np.ndarray) -> bool:
        x, y = float(pos[0]), float(pos[1])
        return 0.0 <= x < self.width_mm and 0.0 <= y < self.height_mm

    def is_free(self, pos: np.ndarray) -> bool:
        r, c = self.cell_of(pos)
        return not bool(self.occupied[r, c])

    def cell_center(self, row: int, col: int) -> np.ndarray:
        return np.array(
            [(col + 0.5) * self.resolution, (row + 0.5) * self.resolution]
        )


def _close_boundary(occ: np.ndarray) -> np.ndarray:
    occ = occ.copy()
    occ[0, :] = True
    occ[-1, :] = True
    occ[:, 0] = True
    occ[:, -1] = True
    return occ


def grid_from_mask(free_mask: np.ndarray, resolution: float) -> OccupancyGrid:
    """Build a grid from a boolean free-space mask; boundary forced occupied."""
    return OccupancyGrid(_close_boundary(~free_mask.astype(bool)), resolution)


# ---------------------------------------------------------------------------
# PGM ingestion / export
# ---------------------------------------------------------------------------


def _pgm_tokens(data: bytes):
    """Yield whitespace-separated header tokens, skipping '#' comments."""
    i = 0
    n = len(data)
    while i < n:
        c = data[i : i + 1]
        if c in b" \t\r\n":
            i += 1
            continue
        if c == b"#":
            while i < n and data[i : i + 1] not in b"\r\n":
                i += 1
            continue
        j = i
        while j < n and data[j : j + 1] not in b" \t\r\n":
            j += 1
        yield data[i:j], j
        i = j


def load_grid(data: bytes, resolution: float) -> OccupancyGrid:
    """Parse PGM bytes (P2 ASCII or P5 binary) into an occupancy grid.

    Pixel >= 128 maps to free, everything else occupied; the boundary ring is
    forced occupied afterwards.
    """
    if resolution <= 0:
        raise InvalidParamsError(f"resolution must be > 0, got {resolution}")
    tokens = _pgm_tokens(data)
    try:
        magic, _ = next(tokens)
    except StopIteration:
        raise MalformedImageError("empty file") from None
    if magic not in (b"P2", b"P5"):
        raise MalformedImageError(f"unsupported magic {magic!r}")
    try:
        w_tok, _ = next(tokens)
        h_tok, _ = next(tokens)
        max_tok, max_end = next(tokens)
        width, height, maxval = int(w_tok), int(h_tok), int(max_tok)
    except (StopIteration, ValueError):
        raise MalformedImageError("truncated or non-numeric header") from None
    if width <= 0 or height <= 0:
        raise EmptyGridError(f"non-positive dimensions {width}x{height}")
    if not 0 < maxval < 65536:
        raise MalformedImageError(f"maxval {maxval} out of range")

    if magic == b"P5":
        payload = data[max_end + 1 :]  # single whitespace byte after maxval
        bytes_per = 2 if maxval > 255 else 1
        need = width * height * bytes_per
        if len(payload) < need:
            raise MalformedImageError("truncated pixel payload")
        dtype = ">u2" if bytes_per == 2 else np.uint8
        pixels = np.frombuffer(payload[:need], dtype=dtype).astype(np.int32)
    else:
        try:
            pixels = np.array(
                [int(tok) for tok, _ in tokens][: width * height], dtype=np.int32
            )
        except ValueError:
            raise MalformedImageError("non-numeric pixel token") from None
        if pixels.size < width * height:
            raise MalformedImageError("truncated pixel list")
    free = (pixels >= FREE_PIXEL_THRESHOLD).reshape(height, width)
    return grid_from_mask(free, resolution)


def export_pgm(values: np.ndarray, blocked: np.ndarray | None = None) -> bytes:
    """Min-max scale a 2D field to 0..255 and encode as binary PGM (P5).

    ``blocked`` cells (non-finite values included) render as 0.
    """
    vals = np.asarray(values, dtype=float)
    mask = np.isfinite(vals)
    if blocked is not None:
        mask &= ~blocked
    scaled = np.zeros(vals.shape, dtype=np.uint8)
    if mask.any():
        lo = float(vals[mask].min())
        hi = float(vals[mask].max())
        span = hi - lo
        if span <= 0:
            scaled[mask] = 255
        else:
            scaled[mask] = np.round((vals[mask] - lo) / span * 255).astype(np.uint8)
    h, w = vals.shape
    return b"P5\n%d %d\n255\n" % (w, h) + scaled.tobytes()


def grid_to_pgm(grid: OccupancyGrid) -> bytes:
    """Occupancy as PGM: free = 255, occupied = 0."""
    px = np.where(grid.occupied, 0, 255).astype(np.uint8)
    h, w = px.shape
    return b"P5\n%d %d\n255\n" % (w, h) + px.tobytes()


# ---------------------------------------------------------------------------
# exact Euclidean distance transform
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DistanceField:
    """Exact Euclidean distance to the nearest occupied cell center.

    ``sq_cells`` holds exact integer squared distances in cell units;
    ``dist`` is the same field scaled to mm. Zero exactly on occupied cells.
    """

    sq_cells: np.ndarray  # int64, shape (height, width)
    dist: np.ndarray  # float64 mm
    resolution: float

    def __post_init__(self) -> None:
        self.sq_cells.setflags(write=False)
        self.dist.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.dist.shape

    def sample(self, pos: np.ndarray) -> float:
        """Bilinear interpolation of the mm field at a continuous position.

        Scalar fast path: this runs several times per arm per tick.
        """
        h, w = self.dist.shape
        u = float(pos[0]) / self.resolution - 0.5
        v = float(pos[1]) / self.resolution - 0.5
        if u < 0.0:
            u = 0.0
        elif u > w - 1.0:
            u = w - 1.0
        if v < 0.0:
            v = 0.0
        elif v > h - 1.0:
            v = h - 1.0
        if w == 1 or h == 1:
            return float(self.dist[int(v) % h, int(u) % w])
        i0 = min(int(u), w - 2)
        j0 = min(int(v), h - 2)
        fu = u - i0
        fv = v - j0
        d = self.dist
        return float(
            d[j0, i0] * (1 - fu) * (1 - fv)
            + d[j0, i0 + 1] * fu * (1 - fv)
            + d[j0 + 1, i0] * (1 - fu) * fv
            + d[j0 + 1, i0 + 1] * fu * fv
        )

    def sample_many(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized bilinear sampling; positions clamped to the cell-center lattice."""
        h, w = self.dist.shape
        u = pts[:, 0] / self.resolution - 0.5
        v = pts[:, 1] / self.resolution - 0.5
        u = np.clip(u, 0.0, w - 1.0)
        v = np.clip(v, 0.0, h - 1.0)
        i0 = np.minimum(u.astype(int), w - 2) if w > 1 else np.zeros(len(u), dtype=int)
        j0 = np.minimum(v.astype(int), h - 2) if h > 1 else np.zeros(len(v), dtype=int)
        fu = u - i0
        fv = v - j0
        d = self.dist
        if w == 1 or h == 1:  # degenerate strip grids
            return d[j0.astype(int) % h, i0.astype(int) % w]
        return (
            d[j0, i0] * (1 - fu) * (1 - fv)
            + d[j0, i0 + 1] * fu * (1 - fv)
            + d[j0 + 1, i0] * (1 - fu) * fv
            + d[j0 + 1, i0 + 1] * fu * fv
        )

    def gradient(self, pos: np.ndarray) -> np.ndarray:
        """Central-difference gradient of the interpolated field (unit: mm/mm)."""
        h = self.resolution / 2.0
        x = float(pos[0])
        y = float(pos[1])
        gx = (self.sample((x + h, y)) - self.sample((x - h, y))) / (2 * h)
        gy = (self.sample((x, y + h)) - self.sample((x, y - h))) / (2 * h)
        return np.array([gx, gy])


def _edt_1d_sq(f: np.ndarray) -> np.ndarray:
    """Lower envelope of parabolas: d[i] = min_j (i-j)^2 + f[j], exact on ints."""
    n = len(f)
    d = np.empty(n, dtype=np.int64)
    v = np.empty(n, dtype=np.int64)  # parabola sites
    z = np.empty(n + 1, dtype=np.float64)  # envelope breakpoints
    k = 0
    v[0] = 0
    z[0] = -np.inf
    z[1] = np.inf
    for q in range(1, n):
        s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]))
        while s <= z[k]:
            k -= 1
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]))
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        d[q] = (q - v[k]) * (q - v[k]) + f[v[k]]
    return d


def distance_transform(grid: OccupancyGrid) -> DistanceField:
    """Exact two-pass Euclidean distance transform (squared ints, then mm)."""
    occ = grid.occupied
    h, w = occ.shape
    # Column pass: per-cell count of rows to the nearest occupied cell in the
    # same column (boundary closure guarantees one exists).
    big = h + w + 1
    g = np.where(occ, 0, big).astype(np.int64)
    for r in range(1, h):
        g[r] = np.minimum(g[r], g[r - 1] + 1)
    for r in range(h - 2, -1, -1):
        g[r] = np.minimum(g[r], g[r + 1] + 1)
    sq = np.empty((h, w), dtype=np.int64)
    g2 = g * g
    for r in range(h):
        sq[r] = _edt_1d_sq(g2[r])
    dist = grid.resolution * np.sqrt(sq.astype(np.float64))
    return DistanceField(sq_cells=sq, dist=dist, resolution=grid.resolution)


def nearest_occupied_center(grid: OccupancyGrid, pos: np.ndarray) -> np.ndarray:
    """Center of the occupied cell nearest to ``pos``. Brute force; used as the
    zero-gradient fallback for wall normals, so it runs rarely."""
    rows, cols = np.nonzero(grid.occupied)
    cx = (cols + 0.5) * grid.resolution
    cy = (rows + 0.5) * grid.resolution
    d2 = (cx - pos[0]) ** 2 + (cy - pos[1]) ** 2
    k = int(np.argmin(d2))
    return np.array([cx[k], cy[k]])


def wall_normal(field: DistanceField, grid: OccupancyGrid, pos: np.ndarray) -> np.ndarray:
    """Unit vector pointing away from the nearest wall at ``pos``.

    Normalized gradient of the interpolated distance field; degenerate
    zero-gradient points fall back to the direction from the nearest occupied
    cell center.
    """
    grad = field.gradient(pos)
    norm = float(np.hypot(grad[0], grad[1]))
    if norm > 1e-9:
        return grad / norm
    away = np.asarray(pos, dtype=float) - nearest_occupied_center(grid, pos)
    norm = float(np.hypot(away[0], away[1]))
    if norm > 1e-12:
        return away / norm
    return np.array([1.0, 0.0])  # pos exactly on an occupied center; arbitrary but fixed


# ---------------------------------------------------------------------------
# costmap
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CostMap:
    """Per-cell traversal cost >= base on free cells, +inf on occupied cells."""

    cost: np.ndarray  # float64; np.inf marks blocked
    resolution: float

    def __post_init__(self) -> None:
        self.cost.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.cost.shape

    @property
    def min_free_cost(self) -> float:
        finite = self.cost[np.isfinite(self.cost)]
        return float(finite.min()) if finite.size else math.inf


def build_costmap(
    field: DistanceField,
    occupied: np.ndarray,
    base: float = 1.0,
    wall_weight: float = 10.0,
    decay_mm: float = 1.0,
) -> CostMap:
    """cost = base + wall_weight * exp(-dist / decay_mm) on free cells.

    Strictly decreasing in wall distance (for wall_weight > 0), finite
    everywhere free, +inf on occupied cells.
    """
    if base <= 0 or wall_weight < 0 or decay_mm <= 0:
        raise InvalidParamsError(
            f"need base > 0, wall_weight >= 0, decay_mm > 0; "
            f"got {base}, {wall_weight}, {decay_mm}"
        )
    cost = base + wall_weight * np.exp(-field.dist / decay_mm)
    cost[occupied] = np.inf
    return CostMap(cost=cost, resolution=field.resolution)


# ---------------------------------------------------------------------------
# procedural tree phantom
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TreeSpec:
    """Parameters of the procedural branching phantom.

    A straight trunk bifurcates ``branch_count`` times; at each bifurcation one
    child terminates in a target stub while the other continues deeper, so the
    three task tiers get targets behind one, two, ... bifurcations. Channel
    width shrinks by ``narrowing`` per generation.
    """

    trunk_width_mm: float = 5.0
    branch_count: int = 3
    narrowing: float = 0.78
    turn_angle_deg: float = 35.0
    trunk_len_mm: float = 10.0
    branch_len_mm: float = 8.0
    length_decay: float = 0.9
    width_mm: float = 34.0
    height_mm: float = 27.0
    resolution_mm: float = 0.5


@dataclass(frozen=True)
class TreeLayout:
    """Generated phantom plus the navigation landmarks the harness needs."""

    grid: OccupancyGrid
    inlet: np.ndarray  # start of the trunk, in free space
    targets: list[np.ndarray] = field(default_factory=list)  # one per generation
    segments: list[tuple[np.ndarray, np.ndarray, float]] = field(default_factory=list)


def _carve_segments(
    segments: list[tuple[np.ndarray, np.ndarray, float]],
    spec: TreeSpec,
) -> OccupancyGrid:
    """Rasterize thick segments (stadium shapes) into a free-space mask."""
    res = spec.resolution_mm
    w = int(round(spec.width_mm / res))
    h = int(round(spec.height_mm / res))
    xs = (np.arange(w) + 0.5) * res
    ys = (np.arange(h) + 0.5) * res
    gx, gy = np.meshgrid(xs, ys)
    free = np.zeros((h, w), dtype=bool)
    for p0, p1, width in segments:
        d = p1 - p0
        seg_len2 = float(d @ d)
        if seg_len2 < 1e-12:
            dist2 = (gx - p0[0]) ** 2 + (gy - p0[1]) ** 2
        else:
            t = np.clip(((gx - p0[0]) * d[0] + (gy - p0[1]) * d[1]) / seg_len2, 0.0, 1.0)
            dist2 = (gx - (p0[0] + t * d[0])) ** 2 + (gy - (p0[1] + t * d[1])) ** 2
        free |= dist2 <= (width / 2.0) ** 2
    return grid_from_mask(free, res)


def generate_tree_layout(spec: TreeSpec, seed: int) -> TreeLayout:
    """Deterministic branching-phantom layout for a given (spec, seed)."""
    if spec.trunk_width_mm < 2 * spec.resolution_mm:
        raise InfeasibleSpecError("trunk narrower than two cells")
    if spec.branch_count < 1:
        raise InfeasibleSpecError("need at least one bifurcation")
    narrowest = spec.trunk_width_mm * spec.narrowing**spec.branch_count
    if narrowest < spec.resolution_mm:
        raise InfeasibleSpecError(
            f"deepest channel {narrowest:.3f} mm narrower than one cell"
        )

    rng = np.random.default_rng(seed)
    segments: list[tuple[np.ndarray, np.ndarray, float]] = []
    targets: list[np.ndarray] = []

    def unit(angle: float) -> np.ndarray:
        return np.array([math.sin(angle), math.cos(angle)])  # 0 rad = +y

    start = np.array([9.0, 2.0])
    heading = 0.0
    width = spec.trunk_width_mm
    tip = start + unit(heading) * spec.trunk_len_mm
    segments.append((start.copy(), tip.copy(), width))
    inlet = start + unit(heading) * (width / 2.0 + spec.resolution_mm)

    # the main route keeps turning the same way, so the deepest channel runs
    # toward horizontal and the route stays inside the manipulator workspace
    turn = math.radians(spec.turn_angle_deg)
    branch_len = spec.branch_len_mm
    for gen in range(1, spec.branch_count + 1):
        width *= spec.narrowing
        jitter = 1.0 + 0.15 * (rng.random() - 0.5)
        # terminal child: ends in this tier's target
        term_heading = heading - turn * 1.25 * jitter
        term_tip = tip + unit(term_heading) * branch_len
        segments.append((tip.copy(), term_tip, width))
        targets.append(term_tip - unit(term_heading) * (width / 2.0))
        cont_heading = heading + turn * jitter
        cont_tip = tip + unit(cont_heading) * branch_len
        segments.append((tip.copy(), cont_tip, width))
        if gen == spec.branch_count:
            # deepest generation: the continuing child's end replaces the stub
            # as this tier's target (longest route)
            targets[-1] = cont_tip - unit(cont_heading) * (width / 2.0)
            break
        tip = cont_tip
        heading = cont_heading
        branch_len *= spec.length_decay

    grid = _carve_segments(segments, spec)
    if not grid.is_free(inlet):
        raise InfeasibleSpecError("inlet rasterized into a wall; widen the trunk")
    return TreeLayout(grid=grid, inlet=inlet, targets=targets, segments=segments)


def generate_tree_phantom(spec: TreeSpec, seed: int) -> OccupancyGrid:
    """Occupancy grid of the procedural branching phantom (see TreeSpec)."""
    return generate_tree_layout(spec, seed).grid


# ---------------------------------------------------------------------------
# per-pose safety metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SafetySnapshot:
    """Spatial risk summary for one pose against one plan.

    ``occlusion_iou`` is the geometric visible fraction of the rod footprint
    under the manipulator-tip disks; 1.0 means fully visible.
    ``bifurcation_dist`` is ``FAR_AWAY_MM`` when the plan has no branch vertex.
    """

    min_wall_dist: float  # mm
    occlusion_iou: float  # in [0, 1]
    curvature: float  # 1/mm of the local planned path
    bifurcation_dist: float  # mm of arc to the nearest branch-flagged vertex


def rod_sample_points(head: np.ndarray, tail: np.ndarray, spacing: float) -> np.ndarray:
    """Head, tail, and midpoints at most ``spacing`` apart along the rod."""
    length = float(np.hypot(*(head - tail)))
    n = max(2, int(math.ceil(length / spacing)) + 1)
    t = np.linspace(0.0, 1.0, n)
    return tail[None, :] + t[:, None] * (head - tail)[None, :]


OCCLUSION_SAMPLES = 33  # fixed rod sampling count keeps the ratio deterministic


def occlusion_ratio(
    head: np.ndarray,
    tail: np.ndarray,
    occluders: list[tuple[np.ndarray, float]],
) -> float:
    """Visible fraction of the rod under occluder disks (1.0 = unobstructed)."""
    t = np.linspace(0.0, 1.0, OCCLUSION_SAMPLES)
    pts = tail[None, :] + t[:, None] * (head - tail)[None, :]
    covered = np.zeros(len(pts), dtype=bool)
    for center, radius in occluders:
        d2 = (pts[:, 0] - center[0]) ** 2 + (pts[:, 1] - center[1]) ** 2
        covered |= d2 <= radius * radius
    return float(1.0 - covered.mean())


def _circumscribed_curvature(p0: np.ndarray, p1: np.ndarray, p2: np.ndarray) -> float:
    """1/R of the circle through three points; 0 when collinear or degenerate."""
    a = float(np.hypot(*(p1 - p0)))
    b = float(np.hypot(*(p2 - p1)))
    c = float(np.hypot(*(p2 - p0)))
    if a < 1e-9 or b < 1e-9 or c < 1e-9:
        return 0.0
    area2 = abs(
        (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1])
    )
    return 2.0 * area2 / (a * b * c)


def safety_snapshot(field, robot, plan, occluders) -> SafetySnapshot:
    """Per-tick safety signals: wall clearance, visibility, curvature, branch arc.

    ``robot`` needs .head/.tail (mm); ``plan`` is a DualArmPlan whose source
    path supplies curvature and branch flags. Raises OutOfBounds when a rod
    endpoint leaves the grid.
    """
    h, w = field.shape
    for p in (robot.head, robot.tail):
        if not (
            0.0 <= p[0] < w * field.resolution and 0.0 <= p[1] < h * field.resolution
        ):
            raise OutOfBoundsError(f"rod endpoint {p} outside grid")

    pts = rod_sample_points(robot.head, robot.tail, field.resolution)
    min_wall = float(field.sample_many(pts).min())

    iou = occlusion_ratio(robot.head, robot.tail, occluders)

    path = plan.source
    mid = 0.5 * (robot.head + robot.tail)
    wp = path.waypoints
    d2 = (wp[:, 0] - mid[0]) ** 2 + (wp[:, 1] - mid[1]) ** 2
    i = int(np.argmin(d2))
    if len(wp) >= 3:
        lo = max(0, i - 2)
        hi = min(len(wp) - 1, i + 2)
        mid_i = (lo + hi) // 2
        curvature = _circumscribed_curvature(wp[lo], wp[mid_i], wp[hi])
    else:
        curvature = 0.0

    flags = path.branch_flags
    if flags.any():
        arcs = path.arc_at
        branch_arcs = arcs[flags]
        bif_dist = float(np.abs(branch_arcs - arcs[i]).min())
    else:
        bif_dist = FAR_AWAY_MM
    return SafetySnapshot(
        min_wall_dist=min_wall,
        occlusion_iou=iou,
        curvature=curvature,
        bifurcation_dist=bif_dist,
    )
