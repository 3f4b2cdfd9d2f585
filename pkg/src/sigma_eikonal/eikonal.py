"""First-order fast marching for |grad u| = 1 and residual diagnostics.

The solver is the classic single-pass method: a min-heap of tentative
values, each node finalized exactly once, updates from the Godunov upwind
discretization using accepted neighbors only.  With m available axis values
a_1 <= ... <= a_m the update solves

    sum_i max(t - a_i, 0)^2 = h^2

taking the largest consistent branch.  Heap keys are (value, flat index),
so equal values break ties lexicographically and reruns are bit-identical.
Acceptance order is monotone in value; this is asserted during the sweep.
Nodes that never become reachable from the seeds keep value +inf and are
counted in the field metadata rather than silently filled.

Residuals evaluate the same upwind gradient on a finished field:
per axis g_k = max((u - u_minus)/h, (u - u_plus)/h, 0), residual
|g|^2 - 1.  Statistics exclude nodes near the surface (small |u|), near
flagged singular nodes, and on the grid rim, and the report records those
eligibility choices.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .distance import GridSpec, ScalarField, GridError

ACCEPT_SLACK = 1e-9


class EikonalError(ValueError):
    """Invalid marching problem."""


@dataclass
class EikonalProblem:
    """Grid, seed nodes with exact sub-grid values, and march direction."""

    grid: GridSpec
    seeds: list                      # [(index tuple, value), ...]
    direction: str = "from_K"

    def __post_init__(self):
        if self.direction != "from_K":
            raise EikonalError("only marching away from the surface is supported")
        if not self.seeds:
            raise EikonalError("at least one seed node is required")
        band = self.grid.spacing * math.sqrt(self.grid.dim)
        for idx, val in self.seeds:
            if len(idx) != self.grid.dim:
                raise EikonalError(f"seed index {idx} has wrong dimension")
            if any(i < 0 or i >= self.grid.dims[k]
                   for k, i in enumerate(idx)):
                raise EikonalError(f"seed index {idx} is outside the grid")
            if not (0.0 <= val <= band + 1e-12):
                raise EikonalError(
                    f"seed value {val} outside [0, h*sqrt(dim)] = [0, {band}]")


def problem_from_shape(shape, grid, distance_fn=None):
    """Seed every node within one cell diagonal of the surface, exactly.

    ``distance_fn`` maps an (n, dim) array to exact boundary distances and
    defaults to the shape's own boundary_distance.
    """
    if distance_fn is None:
        distance_fn = shape.boundary_distance
    pts = grid.points()
    d = np.asarray(distance_fn(pts)).reshape(grid.dims)
    band = grid.spacing * math.sqrt(grid.dim)
    idxs = np.argwhere(d <= band)
    if idxs.shape[0] == 0:
        raise EikonalError("no grid nodes lie within one cell diagonal of "
                           "the surface; refine the grid")
    seeds = [(tuple(int(v) for v in idx), float(d[tuple(idx)]))
             for idx in idxs]
    return EikonalProblem(grid, seeds)


def _solve_update(avals, h):
    """Largest-branch Godunov update from sorted axis values."""
    t = avals[0] + h
    if len(avals) >= 2 and t > avals[1]:
        a, b = avals[0], avals[1]
        disc = 2.0 * h * h - (a - b) ** 2
        if disc > 0.0:
            t = 0.5 * (a + b + math.sqrt(disc))
        if len(avals) == 3 and t > avals[2]:
            s1 = avals[0] + avals[1] + avals[2]
            s2 = (avals[0] * avals[0] + avals[1] * avals[1]
                  + avals[2] * avals[2])
            disc = s1 * s1 - 3.0 * (s2 - h * h)
            if disc > 0.0:
                t3 = (s1 + math.sqrt(disc)) / 3.0
                if t3 > avals[2]:
                    t = t3
    return t


def fast_march(problem):
    """Solve the marching problem; returns an eikonal_solution field.

    The returned field's ``meta`` records the number of accepted nodes and
    any unreachable nodes left at +inf.
    """
    grid = problem.grid
    h = grid.spacing
    dims = grid.dims
    n = grid.n_nodes
    dim = grid.dim

    values = np.full(n, np.inf)
    accepted = np.zeros(n, dtype=bool)

    strides = [1] * dim
    for k in range(dim - 2, -1, -1):
        strides[k] = strides[k + 1] * dims[k + 1]

    def flat(idx):
        return sum(i * s for i, s in zip(idx, strides))

    heap = []
    for idx, val in problem.seeds:
        fi = flat(idx)
        if val < values[fi]:
            values[fi] = val
            heapq.heappush(heap, (val, fi))

    # precomputed neighbor offsets with bounds handled via index math
    coords = np.empty(dim, dtype=np.int64)

    def unflatten(fi):
        rem = fi
        for k in range(dim):
            coords[k] = rem // strides[k]
            rem -= coords[k] * strides[k]
        return coords

    last_accepted = -math.inf
    n_accepted = 0
    while heap:
        val, fi = heapq.heappop(heap)
        if accepted[fi] or val != values[fi]:
            continue
        if val < last_accepted - ACCEPT_SLACK * (1.0 + abs(val)):
            raise AssertionError("acceptance order lost monotonicity")
        last_accepted = val
        accepted[fi] = True
        n_accepted += 1
        c = unflatten(fi)
        for k in range(dim):
            for step in (-1, 1):
                ck = c[k] + step
                if ck < 0 or ck >= dims[k]:
                    continue
                nb = fi + step * strides[k]
                if accepted[nb]:
                    continue
                # gather accepted axis values around the neighbor
                avals = []
                base = nb
                ci = c.copy()
                ci[k] = ck
                for ax in range(dim):
                    best = math.inf
                    if ci[ax] > 0:
                        cand = base - strides[ax]
                        if accepted[cand]:
                            best = values[cand]
                    if ci[ax] < dims[ax] - 1:
                        cand = base + strides[ax]
                        if accepted[cand] and values[cand] < best:
                            best = values[cand]
                    if best < math.inf:
                        avals.append(best)
                if not avals:
                    continue
                avals.sort()
                t = _solve_update(avals, h)
                if t < values[nb]:
                    values[nb] = t
                    heapq.heappush(heap, (t, nb))

    unreachable = int(np.count_nonzero(~accepted))
    out = ScalarField(grid, values.reshape(dims), kind="eikonal_solution",
                      meta={"accepted": n_accepted,
                            "unreachable": unreachable})
    return out


# ---------------------------------------------------------------------------
# residuals
# ---------------------------------------------------------------------------

@dataclass
class ResidualReport:
    """Upwind eikonal residual statistics over an explicit eligible set."""

    max_abs: float
    mean_abs: float
    n_eligible: int
    margin: float
    empty: bool
    residuals: np.ndarray = field(repr=False, default=None)
    eligible: np.ndarray = field(repr=False, default=None)

    def summary_lines(self):
        return [
            f"eligible_nodes={self.n_eligible}",
            f"margin={self.margin!r}",
            f"max_abs_residual={self.max_abs!r}",
            f"mean_abs_residual={self.mean_abs!r}",
        ]


def upwind_residual(f):
    """|grad u|^2 - 1 with the Godunov upwind gradient, all nodes."""
    u = f.values
    h = f.grid.spacing
    gsq = np.zeros_like(u)
    for axis in range(f.grid.dim):
        um = np.full_like(u, np.inf)
        up = np.full_like(u, np.inf)
        sl_lo = [slice(None)] * f.grid.dim
        sl_hi = [slice(None)] * f.grid.dim
        sl_lo[axis] = slice(1, None)
        sl_hi[axis] = slice(None, -1)
        um[tuple(sl_lo)] = u[tuple(sl_hi)]
        up[tuple(sl_hi)] = u[tuple(sl_lo)]
        with np.errstate(invalid="ignore"):
            g = np.maximum.reduce([
                np.where(np.isfinite(um), (u - um) / h, 0.0),
                np.where(np.isfinite(up), (u - up) / h, 0.0),
                np.zeros_like(u),
            ])
        gsq += g * g
    return gsq - 1.0


def residuals(f, singular_mask=None, margin=None):
    """Residual statistics away from the surface, flags, and the grid rim.

    ``singular_mask`` may be a SingularMask or a boolean array on the same
    grid; ``margin`` defaults to 10 grid cells.
    """
    if f.kind not in ("distance", "signed_distance", "eikonal_solution"):
        raise GridError("residuals need a distance-like field")
    h = f.grid.spacing
    if margin is None:
        margin = 10.0 * h
    res = upwind_residual(f)

    eligible = np.isfinite(f.values)
    # away from the surface: the field value is itself the distance to it
    eligible &= np.abs(f.values) >= margin
    # off the grid rim (upwind stencils there are one-sided)
    rim = np.zeros(f.grid.dims, dtype=bool)
    for axis in range(f.grid.dim):
        sl = [slice(None)] * f.grid.dim
        sl[axis] = 0
        rim[tuple(sl)] = True
        sl[axis] = -1
        rim[tuple(sl)] = True
    eligible &= ~rim

    if singular_mask is not None:
        flags = getattr(singular_mask, "flags", singular_mask)
        flags = np.asarray(flags, dtype=bool)
        if flags.shape != tuple(f.grid.dims):
            raise GridError("singular mask shape does not match the grid")
        if flags.any():
            from scipy.ndimage import distance_transform_edt
            dist_to_flags = distance_transform_edt(~flags, sampling=h)
            eligible &= dist_to_flags >= margin

    sel = res[eligible]
    if sel.size == 0:
        return ResidualReport(math.nan, math.nan, 0, margin, True,
                              residuals=res, eligible=eligible)
    return ResidualReport(float(np.abs(sel).max()), float(np.abs(sel).mean()),
                          int(sel.size), margin, False,
                          residuals=res, eligible=eligible)


def write_residual_report(report, path):
    with open(path, "w", encoding="ascii") as fh:
        for line in report.summary_lines():
            fh.write(line + "\n")
