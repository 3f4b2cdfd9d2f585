"""Grid detectors for the singular set of a boundary distance function.

The singular set of the distance to a closed set K is the set of points,
off K, whose nearest point on K is not unique.  On a grid this is detected
two independent ways:

* detect_multiproj flags nodes whose nearest-point set, resolved at a
  grid-scale tolerance, has spread above that tolerance (genuinely distinct
  nearest-point basins).
* detect_gradjump flags nodes where one-sided gradients of a distance field
  disagree in direction beyond a threshold angle, which is the finite
  difference signature of a gradient jump.

Both detectors leave a band of width ``band_factor * h`` around K
unclassified: there the distance is below grid resolution and neither
signal is meaningful.  Flags never appear inside the band.

coverage_density measures how much of a region the dilated flag set
covers, and locates the largest flag-free grid ball, which is the grid
analogue of asking whether the singular set comes near every interior
point.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .distance import GridSpec, ScalarField, _bulk_boundary_distance
from .geometry import (
    Ball,
    Box,
    ConvexPolytope,
    Ellipse,
    GraphHypersurface,
    OffsetBody,
    SampledSurface,
)
from .projection import (
    _cycle_query_many,
    _dedupe,
    _max_pairwise,
    _offset_cycle,
    _polytope_cycle,
    project,
)

BAND_FACTOR = 2.0           # unclassified band around K, in grid steps
DEFAULT_THETA_DEG = 30.0    # gradient disagreement angle threshold

MASK_MAGIC = "singular_mask"

CLEAR, FLAG, EXCLUDED = 0, 1, 2


class DetectionError(ValueError):
    """Invalid detector input."""


@dataclass
class SingularMask:
    """Boolean singular-set flags on a grid, plus the unclassified band."""

    grid: GridSpec
    flags: np.ndarray
    excluded: np.ndarray
    detector: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        dims = tuple(self.grid.dims)
        if self.flags.shape != dims or self.excluded.shape != dims:
            raise DetectionError("mask arrays must match the grid dims")
        if bool(np.any(self.flags & self.excluded)):
            raise DetectionError("flags inside the unclassified band")

    @property
    def n_flags(self):
        return int(self.flags.sum())

    def flagged_points(self):
        idx = np.argwhere(self.flags)
        return self.grid.origin + idx * self.grid.spacing

    def distance_to_flags(self):
        """Per-node Euclidean distance to the nearest flagged node."""
        if not self.flags.any():
            return np.full(self.flags.shape, np.inf)
        return ndimage.distance_transform_edt(
            ~self.flags, sampling=self.grid.spacing)

    def dilate(self, radius):
        """Nodes within the given distance of a flag."""
        return self.distance_to_flags() <= radius

    def save(self, path):
        codes = np.full(self.flags.shape, CLEAR, dtype=np.uint8)
        codes[self.excluded] = EXCLUDED
        codes[self.flags] = FLAG
        with open(path, "wb") as fh:
            head = io.StringIO()
            head.write(f"magic={MASK_MAGIC}\n")
            head.write("dims=" + ",".join(str(n) for n in self.grid.dims)
                       + "\n")
            head.write("origin=" + ",".join(repr(float(v))
                                            for v in self.grid.origin) + "\n")
            head.write(f"spacing={self.grid.spacing!r}\n")
            head.write(f"detector={self.detector}\n")
            head.write("params=" + json.dumps(self.params, sort_keys=True)
                       + "\n")
            head.write("end\n")
            fh.write(head.getvalue().encode("ascii"))
            fh.write(codes.tobytes(order="C"))

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            header = {}
            while True:
                line = fh.readline().decode("ascii").strip()
                if line == "end":
                    break
                if not line:
                    raise DetectionError("truncated mask header")
                key, _, val = line.partition("=")
                header[key] = val
            if header.get("magic") != MASK_MAGIC:
                raise DetectionError("not a singular mask file")
            dims = tuple(int(v) for v in header["dims"].split(","))
            origin = tuple(float(v) for v in header["origin"].split(","))
            grid = GridSpec(origin=origin,
                            spacing=float(header["spacing"]), dims=dims)
            n = int(np.prod(dims))
            codes = np.frombuffer(fh.read(n), dtype=np.uint8).reshape(dims)
        try:
            params = json.loads(header.get("params", "{}"))
        except json.JSONDecodeError as exc:
            raise DetectionError(f"bad params header: {exc}") from exc
        return cls(grid=grid, flags=codes == FLAG, excluded=codes == EXCLUDED,
                   detector=header.get("detector", "unknown"), params=params)

    def summary(self):
        return {"detector": self.detector, "n_flags": self.n_flags,
                "n_excluded": int(self.excluded.sum()),
                "n_nodes": int(np.prod(self.grid.dims))}


# ---------------------------------------------------------------------------
# multiple-projection detector
# ---------------------------------------------------------------------------

def detect_multiproj(shape, grid, tau_multi=None, band_factor=BAND_FACTOR):
    """Flag grid nodes whose nearest-point set on the boundary is multiple.

    tau_multi defaults to the grid step: near-ties below one node of
    distance cannot be resolved and do not count as multiplicity.
    """
    if not isinstance(grid, GridSpec):
        raise DetectionError("grid must be a GridSpec")
    h = float(grid.spacing)
    if tau_multi is None:
        tau_multi = h
    if isinstance(shape, Box):
        shape = shape.as_polytope()
    if isinstance(shape, (Ellipse, GraphHypersurface)):
        # no exact element enumeration; detect against a fine sampling
        shape = shape.boundary_sample(0.5 * h)

    pts = grid.points()
    dK = _bulk_boundary_distance(shape, pts)
    excluded = dK <= band_factor * h

    if isinstance(shape, Ball):
        flags = _detect_ball(shape, pts)
    elif isinstance(shape, ConvexPolytope) and shape.dim == 2:
        flags = _detect_cycle(_polytope_cycle(shape), shape.diameter(),
                              pts, dK, excluded, tau_multi)
    elif isinstance(shape, OffsetBody) and shape.dim == 2:
        flags = _detect_cycle(_offset_cycle(shape), shape.diameter(),
                              pts, dK, excluded, tau_multi,
                              shape=shape)
    elif isinstance(shape, SampledSurface):
        flags = _detect_sampled(shape, pts, dK, excluded, tau_multi)
    elif isinstance(shape, (ConvexPolytope, OffsetBody)):
        flags = _detect_pointwise(shape, pts, excluded, tau_multi)
    else:
        raise DetectionError(
            f"no multiplicity detector for {type(shape).__name__}")

    flags = flags.reshape(grid.dims) & ~excluded.reshape(grid.dims)
    return SingularMask(grid=grid, flags=flags,
                        excluded=excluded.reshape(grid.dims),
                        detector="multiproj",
                        params={"tau_multi": float(tau_multi),
                                "band_factor": float(band_factor)})


def _detect_ball(ball, pts):
    # the nearest-point map on a sphere is multiple only at the center
    rel = np.linalg.norm(pts - ball.center, axis=1)
    return rel <= 1e-9 * ball.diameter()


def _detect_cycle(cycle, diam, pts, dK, excluded, tau_multi, shape=None):
    """Exact-shape detection over an element cycle, vectorized prefilter."""
    n = pts.shape[0]
    flags = np.zeros(n, dtype=bool)
    eq_tol = 1e-12 * max(1.0, diam)
    dd_tol = 1e-9 * max(1.0, diam)
    chunk = max(1, int(4_000_000 // max(len(cycle), 1)))
    for lo in range(0, n, chunk):
        sel = slice(lo, min(lo + chunk, n))
        sub = pts[sel]
        active = ~excluded[sel]
        if not active.any():
            continue
        dist, clamp = _cycle_query_many(cycle, sub)
        d_opt = dist.min(axis=1)
        cand = dist <= (d_opt + tau_multi)[:, None]
        # drop feet clamped at a junction when the neighbor element
        # continues downhill through it: those are path points of the
        # boundary distance profile, not separate nearest-point basins
        nb_dist = np.where(clamp > 0, np.roll(dist, -1, axis=1),
                           np.roll(dist, +1, axis=1))
        kept = cand & ~((clamp != 0) & (nb_dist < dist - eq_tol))
        multi = active & (kept.sum(axis=1) >= 2)
        for i in np.nonzero(multi)[0]:
            feet = []
            for k in np.nonzero(kept[i])[0]:
                _, foot, _ = cycle[k].query(sub[i])
                feet.append(foot)
            reps = _dedupe(np.array(feet), dd_tol)
            if reps.shape[0] >= 2 and _max_pairwise(reps) > tau_multi:
                flags[lo + i] = True
        if shape is not None:
            # a node sitting exactly on a base vertex ties along the whole
            # vertex arc of the offset boundary
            _, arcs = shape.elements()
            for center, _, sweep in arcs:
                onc = np.linalg.norm(sub - center, axis=1) <= eq_tol
                chord = 2.0 * shape.epsilon * math.sin(
                    min(0.5 * sweep, 0.5 * math.pi))
                if chord > tau_multi:
                    flags[lo:lo + sub.shape[0]][onc & active] = True
    return flags


def _merge_run_labels(run_pts, link):
    """Union-find over candidate runs, linking runs whose closest points
    come within the linking distance."""
    m = len(run_pts)
    parent = list(range(m))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    lk2 = link * link
    for i in range(m):
        for j in range(i + 1, m):
            if find(i) == find(j):
                continue
            d2 = ((run_pts[i][:, None, :] - run_pts[j][None, :, :]) ** 2
                  ).sum(axis=2)
            if d2.min() <= lk2:
                parent[find(j)] = find(i)
    return [find(i) for i in range(m)]


def _detect_sampled(surface, pts, dK, excluded, tau_multi):
    """Sampled-surface detection using the ordered-chain invariant.

    Candidates within tau of the optimum are split into runs of
    chain-consecutive samples (consecutive samples sit within one spacing
    of each other along the surface, so an index gap of at most 3 bounds
    the Euclidean gap by the linking distance); runs are then merged by
    closest approach.  Two or more surviving clusters with well separated
    representatives mean a genuinely multiple projection.
    """
    tree = surface.tree()
    n = pts.shape[0]
    flags = np.zeros(n, dtype=bool)
    active = np.nonzero(~excluded)[0]
    if active.size == 0:
        return flags
    link = 3.0 * surface.spacing
    gap = 3
    guard = 0.5 * surface.diameter()
    n_samp = surface.points.shape[0]
    chunk = 16384
    for lo in range(0, active.size, chunk):
        rows = active[lo:lo + chunk]
        idx_lists = tree.query_ball_point(pts[rows], dK[rows] + tau_multi)
        for row, idx in zip(rows, idx_lists):
            if len(idx) <= 1:
                continue
            idx = np.sort(np.asarray(idx))
            cand = surface.points[idx]
            span = np.linalg.norm(cand.max(axis=0) - cand.min(axis=0))
            if span <= tau_multi:
                continue  # spread cannot exceed the candidate bounding box
            breaks = np.nonzero(np.diff(idx) > gap)[0]
            runs = np.split(np.arange(idx.size), breaks + 1)
            if surface.closed and len(runs) > 1 \
                    and idx[0] + n_samp - idx[-1] <= gap:
                runs[0] = np.concatenate([runs[-1], runs[0]])
                runs.pop()
            if len(runs) == 1:
                if span > guard:
                    flags[row] = True  # single wrap-around run: continuum tie
                continue
            labels = _merge_run_labels([cand[r] for r in runs], link)
            groups = {}
            for r, lab in zip(runs, labels):
                groups.setdefault(lab, []).append(r)
            if len(groups) == 1:
                if span > guard:
                    flags[row] = True
                continue
            cd = np.linalg.norm(cand - pts[row], axis=1)
            reps = []
            for members in groups.values():
                pos = np.concatenate(members)
                reps.append(cand[pos[np.argmin(cd[pos])]])
            if _max_pairwise(np.array(reps)) > tau_multi:
                flags[row] = True
    return flags


def _detect_pointwise(shape, pts, excluded, tau_multi):
    n = pts.shape[0]
    flags = np.zeros(n, dtype=bool)
    for i in np.nonzero(~excluded)[0]:
        res = project(shape, pts[i], tau_multi=tau_multi)
        flags[i] = not res.is_singleton
    return flags


# ---------------------------------------------------------------------------
# gradient-jump detector
# ---------------------------------------------------------------------------

def detect_gradjump(fld, theta_deg=DEFAULT_THETA_DEG,
                    band_factor=BAND_FACTOR):
    """Flag nodes where one-sided gradient combinations disagree in angle.

    The input must be an unsigned distance field (or an eikonal solution,
    which approximates one).  At each interior node the forward/backward
    difference choices per axis give 2^dim one-sided gradient estimates;
    a maximum pairwise angle above theta_deg marks a gradient jump.
    """
    if not isinstance(fld, ScalarField):
        raise DetectionError("detect_gradjump expects a ScalarField")
    if fld.kind not in ("distance", "eikonal_solution"):
        raise DetectionError(
            f"gradient-jump detection needs a distance-like field, "
            f"got kind={fld.kind!r}")
    dim = fld.grid.dim
    dims = fld.grid.dims
    if any(n < 4 for n in dims):
        raise DetectionError("need at least 4 nodes per axis")
    u = fld.values
    h = float(fld.grid.spacing)

    fwd, bwd = [], []
    for ax in range(dim):
        f = np.full(dims, np.nan)
        b = np.full(dims, np.nan)
        sl_all = [slice(None)] * dim

        sl = list(sl_all); sl[ax] = slice(0, -1)
        sr = list(sl_all); sr[ax] = slice(1, None)
        f[tuple(sl)] = (u[tuple(sr)] - u[tuple(sl)]) / h
        b[tuple(sr)] = f[tuple(sl)]
        fwd.append(f)
        bwd.append(b)

    n_comb = 1 << dim
    grads = np.empty(dims + (n_comb, dim))
    for c in range(n_comb):
        for ax in range(dim):
            grads[..., c, ax] = fwd[ax] if (c >> ax) & 1 else bwd[ax]

    ok = np.isfinite(grads).all(axis=(-1, -2))
    norms = np.linalg.norm(grads, axis=-1)
    safe = norms > 1e-12
    unit = np.where(safe[..., None], grads / np.where(safe, norms, 1.0)[..., None], 0.0)
    # min cosine over combination pairs
    cosmat = np.einsum("...id,...jd->...ij", unit, unit)
    min_cos = cosmat.min(axis=(-1, -2))
    theta = math.radians(theta_deg)
    jump = ok & safe.all(axis=-1) & (min_cos < math.cos(theta))

    excluded = ~ok | (u <= band_factor * h) | ~np.isfinite(u)
    flags = jump & ~excluded
    return SingularMask(grid=fld.grid, flags=flags, excluded=excluded,
                        detector="gradjump",
                        params={"theta_deg": float(theta_deg),
                                "band_factor": float(band_factor)})


# ---------------------------------------------------------------------------
# mask comparison and coverage
# ---------------------------------------------------------------------------

def inclusion_violations(inner, outer, radius):
    """Count flags of ``inner`` farther than ``radius`` from any ``outer`` flag.

    Both masks must share a grid.  Returns (count, index array).
    """
    if inner.grid != outer.grid:
        raise DetectionError("masks live on different grids")
    dist = outer.distance_to_flags()
    bad = inner.flags & (dist > radius)
    return int(bad.sum()), np.argwhere(bad)


def mask_agreement(a, b, radius):
    """Symmetric difference of two masks after dilation by ``radius``.

    Returns the fraction of flags (of either mask) not matched by the
    other mask within the radius.  Nodes unclassified by either detector
    are ignored.
    """
    if a.grid != b.grid:
        raise DetectionError("masks live on different grids")
    valid = ~(a.excluded | b.excluded)
    fa = a.flags & valid
    fb = b.flags & valid
    total = int(fa.sum() + fb.sum())
    if total == 0:
        return 0.0, 0
    da = ndimage.distance_transform_edt(~fa, sampling=a.grid.spacing) \
        if fa.any() else np.full(fa.shape, np.inf)
    db = ndimage.distance_transform_edt(~fb, sampling=b.grid.spacing) \
        if fb.any() else np.full(fb.shape, np.inf)
    unmatched = int((fa & (db > radius)).sum() + (fb & (da > radius)).sum())
    return unmatched / total, unmatched


@dataclass
class DensityReport:
    """Coverage of a region by the dilated flag set.

    interior_ball is the largest grid ball contained in the r-dilation of
    the flags (restricted to the region): the finite-resolution proxy for
    the flag closure having interior points.
    """

    region: str
    r: float
    covered_fraction: float
    n_flags: int
    n_region_nodes: int
    ball_center: np.ndarray | None
    ball_radius: float

    def csv_row(self):
        c = ("" if self.ball_center is None
             else ";".join(f"{v:.9g}" for v in self.ball_center))
        return (f"{self.region},{self.r:.9g},{self.covered_fraction:.9g},"
                f"{self.n_flags},{self.n_region_nodes},{c},"
                f"{self.ball_radius:.9g}")

    @staticmethod
    def csv_header():
        return ("region,r,covered_fraction,n_flags,n_region_nodes,"
                "ball_center,ball_radius")


def coverage_density(mask, region, r):
    """Fraction of region nodes within r of a flag, and the largest grid
    ball fully inside that dilation.

    region is None (whole grid box), a shape with interior membership, or
    a boolean node mask matching the grid.  r must be at least one step.
    """
    h = float(mask.grid.spacing)
    if r < h:
        raise DetectionError("dilation radius below grid resolution")
    if region is None:
        region_mask = np.ones(mask.grid.dims, dtype=bool)
        label = "grid"
    elif isinstance(region, np.ndarray):
        region_mask = region.astype(bool).reshape(mask.grid.dims)
        label = "mask"
    else:
        pts = mask.grid.points()
        region_mask = np.asarray(region.contains(pts)).reshape(mask.grid.dims)
        label = getattr(region, "describe", lambda: "shape")()
    n_region = int(region_mask.sum())
    if n_region == 0:
        raise DetectionError("region contains no grid nodes")

    dist = mask.distance_to_flags()
    dilation = dist <= r
    frac = (dilation & region_mask).sum() / n_region

    # largest ball inside dilation-within-region: EDT padded with blocked
    # cells so the region complement and the grid rim count as walls
    inside = dilation & region_mask
    pad = np.zeros(tuple(n + 2 for n in mask.grid.dims), dtype=bool)
    core = tuple(slice(1, -1) for _ in mask.grid.dims)
    pad[core] = inside
    edt = ndimage.distance_transform_edt(pad, sampling=mask.grid.spacing)
    edt = edt[core]
    idx = np.unravel_index(int(np.argmax(edt)), mask.grid.dims)
    radius = float(edt[idx])
    if radius <= 0.0:
        return DensityReport(region=label, r=float(r),
                             covered_fraction=float(frac),
                             n_flags=mask.n_flags, n_region_nodes=n_region,
                             ball_center=None, ball_radius=0.0)
    center = mask.grid.node_point(idx)
    return DensityReport(region=label, r=float(r),
                         covered_fraction=float(frac),
                         n_flags=mask.n_flags, n_region_nodes=n_region,
                         ball_center=center, ball_radius=radius)


def write_density_csv(reports, path):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(DensityReport.csv_header() + "\n")
        for rep in reports:
            fh.write(rep.csv_row() + "\n")
