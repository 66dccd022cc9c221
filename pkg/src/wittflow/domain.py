"""Discrete space-time domains: grids, boundary decomposition, difference
operators and discrete norms.

Collocation nodes sit at space-time cell centers; boundary elements sit at
face centroids.  On a box all six lateral face families carry outward
conormal vectors ``+-ej`` with weight ``h^2 dt``; the temporal caps carry
``-f`` (initial) and ``+f`` (terminal) with weight ``h^3``.  On quotients the
periodized axes have unit pitch and contribute no lateral boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .witt_algebra import mul_arrays

__all__ = [
    "SpaceTimeGrid",
    "Field",
    "BoundaryElement",
    "Domain",
    "build_box_domain",
    "build_quotient_domain",
    "diff_field",
    "discrete_spatial_dirac",
    "discrete_div",
    "discrete_grad",
    "discrete_norm",
    "export_field_csv",
    "export_solution_csv",
]


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Uniform spatial grid times a uniform time axis, cell-centered.

    ``dims`` are spatial cell counts per axis, ``nt`` the number of time
    slabs.  ``periodic`` marks axes that wrap (quotient generators, pitch 1).
    """

    h: float
    dt: float
    dims: tuple[int, int, int]
    nt: int
    periodic: tuple[bool, bool, bool] = (False, False, False)
    t0: float = 0.0

    def __post_init__(self):
        if not (self.h > 0 and self.dt > 0):
            raise ValueError("grid spacings must be positive")
        if self.nt < 2:
            raise ValueError("need at least 2 time slabs")
        for d, n in enumerate(self.dims):
            if n < 3 and not self.periodic[d]:
                raise ValueError(f"axis {d}: need at least 3 nodes, got {n}")
            if n < 1:
                raise ValueError(f"axis {d}: empty")

    def spacing(self, axis: int) -> float:
        return self.h if axis < 3 else self.dt

    @property
    def extent(self) -> tuple[float, float, float]:
        return tuple(n * self.h for n in self.dims)

    @property
    def horizon(self) -> float:
        return self.nt * self.dt

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (*self.dims, self.nt)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return self.h ** 3 * self.dt

    def axis_centers(self, axis: int) -> np.ndarray:
        if axis < 3:
            return (np.arange(self.dims[axis]) + 0.5) * self.h
        return self.t0 + (np.arange(self.nt) + 0.5) * self.dt

    def node_positions(self) -> tuple[np.ndarray, np.ndarray]:
        """Spatial positions (nx,ny,nz,3) and times (nt,) of cell centers."""
        xs = [self.axis_centers(d) for d in range(3)]
        grid = np.stack(np.meshgrid(*xs, indexing="ij"), axis=-1)
        return grid, self.axis_centers(3)


@dataclass
class Field:
    """Algebra-valued function sampled on grid nodes; shape (*dims, nt, 7)."""

    values: np.ndarray
    grid: SpaceTimeGrid

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = self.grid.shape + (7,)
        if self.values.shape != expected:
            raise ValueError(
                f"field shape {self.values.shape} does not match grid "
                f"shape {expected}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    @classmethod
    def zeros(cls, grid: SpaceTimeGrid) -> "Field":
        return cls(np.zeros(grid.shape + (7,)), grid)

    @classmethod
    def from_scalar(cls, values: np.ndarray, grid: SpaceTimeGrid) -> "Field":
        out = np.zeros(grid.shape + (7,))
        out[..., 0] = values
        return cls(out, grid)

    @classmethod
    def from_vector(cls, values: np.ndarray, grid: SpaceTimeGrid) -> "Field":
        out = np.zeros(grid.shape + (7,))
        out[..., 1:4] = values
        return cls(out, grid)

    def copy(self) -> "Field":
        return Field(self.values.copy(), self.grid)

    def scalar(self) -> np.ndarray:
        return self.values[..., 0]

    def vector(self) -> np.ndarray:
        return self.values[..., 1:4]

    def __add__(self, other: "Field") -> "Field":
        return Field(self.values + other.values, self.grid)

    def __sub__(self, other: "Field") -> "Field":
        return Field(self.values - other.values, self.grid)

    def __mul__(self, scalar: float) -> "Field":
        return Field(self.values * float(scalar), self.grid)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(-self.values, self.grid)


@dataclass(frozen=True)
class BoundaryElement:
    """Weighted face centroid with its conormal algebra element."""

    position: tuple[float, float, float]
    time: float
    weight: float
    conormal: np.ndarray
    kind: str          # "lateral", "cap_initial" or "cap_terminal"
    axis: int          # offset axis (0..2 lateral, 3 caps)
    side: int          # 0 = lower face, 1 = upper face


@dataclass
class Domain:
    """Grid plus interior index set and weighted boundary decomposition.

    Interior nodes are all cell centers.  Boundary data is stored in flat
    arrays (one row per element); ``boundary`` materializes the element view.
    """

    grid: SpaceTimeGrid
    b_position: np.ndarray      # (nb, 3)
    b_time: np.ndarray          # (nb,)
    b_weight: np.ndarray        # (nb,)
    b_conormal: np.ndarray      # (nb, 7)
    b_kind: np.ndarray          # (nb,) small ints: 0 lateral, 1 cap0, 2 capT
    b_axis: np.ndarray          # (nb,)
    b_side: np.ndarray          # (nb,)
    # Second-order one-sided interpolation stencil for the trace operator:
    # value at centroid ~ 1.5 * field[near] - 0.5 * field[next].
    b_near: np.ndarray          # (nb, 4) cell multi-indices
    b_next: np.ndarray          # (nb, 4)
    _boundary_cache: list = dataclass_field(default=None, repr=False)

    _KIND_NAMES = ("lateral", "cap_initial", "cap_terminal")

    @property
    def n_interior(self) -> int:
        return self.grid.n_cells

    @property
    def n_boundary(self) -> int:
        return len(self.b_weight)

    @property
    def boundary(self) -> list[BoundaryElement]:
        if self._boundary_cache is None:
            self._boundary_cache = [
                BoundaryElement(tuple(self.b_position[i]),
                                float(self.b_time[i]),
                                float(self.b_weight[i]),
                                self.b_conormal[i],
                                self._KIND_NAMES[self.b_kind[i]],
                                int(self.b_axis[i]), int(self.b_side[i]))
                for i in range(self.n_boundary)]
        return self._boundary_cache

    def lateral_area(self) -> float:
        return float(np.sum(self.b_weight[self.b_kind == 0]))

    def cap_area(self) -> float:
        return float(np.sum(self.b_weight[self.b_kind != 0]))


def _cells_to_count(extent: float, h: float, label: str) -> int:
    n = extent / h
    n_int = int(round(n))
    if abs(n - n_int) > 1e-9 * max(1.0, n) or n_int < 1:
        raise ValueError(f"{label}: spacing {h} does not tile extent {extent}")
    return n_int


def _build_domain(grid: SpaceTimeGrid) -> Domain:
    dims, nt = grid.dims, grid.nt
    h, dt = grid.h, grid.dt
    positions, times, weights, conormals = [], [], [], []
    kinds, axes, sides, nears, nexts = [], [], [], [], []
    centers = [grid.axis_centers(d) for d in range(3)]
    tc = grid.axis_centers(3)

    for axis in range(3):
        if grid.periodic[axis]:
            continue
        if dims[axis] < 3:
            raise ValueError(f"axis {axis} too small for one-sided traces")
        across = [d for d in range(3) if d != axis]
        ia, ib = np.meshgrid(np.arange(dims[across[0]]),
                             np.arange(dims[across[1]]), indexing="ij")
        ia, ib = ia.ravel(), ib.ravel()
        for side in (0, 1):
            x_face = 0.0 if side == 0 else grid.extent[axis]
            normal = np.zeros(7)
            normal[1 + axis] = -1.0 if side == 0 else 1.0
            cell_along = 0 if side == 0 else dims[axis] - 1
            next_along = 1 if side == 0 else dims[axis] - 2
            for j in range(nt):
                n_face = len(ia)
                pos = np.zeros((n_face, 3))
                pos[:, axis] = x_face
                pos[:, across[0]] = centers[across[0]][ia]
                pos[:, across[1]] = centers[across[1]][ib]
                positions.append(pos)
                times.append(np.full(n_face, tc[j]))
                weights.append(np.full(n_face, h * h * dt))
                conormals.append(np.tile(normal, (n_face, 1)))
                kinds.append(np.zeros(n_face, dtype=np.int64))
                axes.append(np.full(n_face, axis, dtype=np.int64))
                sides.append(np.full(n_face, side, dtype=np.int64))
                near = np.zeros((n_face, 4), dtype=np.int64)
                near[:, axis] = cell_along
                near[:, across[0]] = ia
                near[:, across[1]] = ib
                near[:, 3] = j
                nxt = near.copy()
                nxt[:, axis] = next_along
                nears.append(near)
                nexts.append(nxt)

    # Temporal caps: one element per spatial cell, at t0 and t0 + horizon.
    i1, i2, i3 = np.meshgrid(*[np.arange(n) for n in dims], indexing="ij")
    i1, i2, i3 = i1.ravel(), i2.ravel(), i3.ravel()
    n_cap = len(i1)
    cap_pos = np.stack([centers[0][i1], centers[1][i2], centers[2][i3]],
                       axis=-1)
    for side, t_face, f_sign, kind in (
            (0, grid.t0, -1.0, 1),
            (1, grid.t0 + grid.horizon, 1.0, 2)):
        conormal = np.zeros(7)
        conormal[4] = f_sign
        positions.append(cap_pos)
        times.append(np.full(n_cap, t_face))
        weights.append(np.full(n_cap, h ** 3))
        conormals.append(np.tile(conormal, (n_cap, 1)))
        kinds.append(np.full(n_cap, kind, dtype=np.int64))
        axes.append(np.full(n_cap, 3, dtype=np.int64))
        sides.append(np.full(n_cap, side, dtype=np.int64))
        near = np.stack([i1, i2, i3,
                         np.full(n_cap, 0 if side == 0 else nt - 1)], axis=-1)
        nxt = near.copy()
        nxt[:, 3] = 1 if side == 0 else nt - 2
        nears.append(near)
        nexts.append(nxt)

    return Domain(
        grid=grid,
        b_position=np.concatenate(positions),
        b_time=np.concatenate(times),
        b_weight=np.concatenate(weights),
        b_conormal=np.concatenate(conormals),
        b_kind=np.concatenate(kinds),
        b_axis=np.concatenate(axes),
        b_side=np.concatenate(sides),
        b_near=np.concatenate(nears),
        b_next=np.concatenate(nexts),
    )


def build_box_domain(extent, horizon: float, h: float, dt: float) -> Domain:
    """Axis-aligned box cross [0, horizon] with full lateral boundary."""
    extent = tuple(float(e) for e in np.atleast_1d(extent).repeat(
        3 if np.ndim(extent) == 0 else 1)[:3])
    if len(extent) != 3:
        raise ValueError("extent must give 3 box lengths")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    dims = tuple(_cells_to_count(e, h, f"extent[{d}]")
                 for d, e in enumerate(extent))
    nt = _cells_to_count(horizon, dt, "horizon")
    grid = SpaceTimeGrid(h=h, dt=dt, dims=dims, nt=max(nt, 2))
    return _build_domain(grid)


def build_quotient_domain(spec, box_extent_for_free_axes, horizon: float,
                          h: float, dt: float) -> Domain:
    """Quotient of the first ``spec.rank`` axes (unit pitch) times a box.

    Periodized axes wrap and carry no lateral boundary; the remaining axes
    behave like box axes.  The spatial spacing must tile the unit pitch.
    """
    rank = spec.rank
    free_extent = [float(e) for e in np.atleast_1d(box_extent_for_free_axes)]
    if len(free_extent) < 3 - rank:
        raise ValueError(f"need {3 - rank} free-axis extents, got "
                         f"{len(free_extent)}")
    dims = []
    periodic = []
    for d in range(3):
        if d < rank:
            n = 1.0 / h
            n_int = int(round(n))
            if abs(n - n_int) > 1e-9 or n_int < 1:
                raise ValueError(
                    f"axis {d}: spacing {h} does not tile the unit pitch")
            dims.append(n_int)
            periodic.append(True)
        else:
            dims.append(_cells_to_count(free_extent[d - rank], h,
                                        f"free extent[{d}]"))
            periodic.append(False)
    nt = _cells_to_count(horizon, dt, "horizon")
    grid = SpaceTimeGrid(h=h, dt=dt, dims=tuple(dims), nt=max(nt, 2),
                         periodic=tuple(periodic))
    return _build_domain(grid)


def diff_field(values: np.ndarray, axis: int, spacing: float, periodic: bool,
               edge_order: int = 2) -> np.ndarray:
    """First difference quotient along one array axis.

    Central second-order stencils in the interior; wrapped central stencils
    on periodic axes; one-sided stencils of the requested order at
    non-periodic edges.
    """
    if periodic:
        return (np.roll(values, -1, axis) - np.roll(values, 1, axis)) \
            / (2.0 * spacing)
    return np.gradient(values, spacing, axis=axis, edge_order=edge_order)


_E_ROWS = np.eye(7)[1:4]


def discrete_spatial_dirac(u: Field) -> Field:
    """sum_j ej * d_j u with left algebra multiplication."""
    g = u.grid
    out = np.zeros_like(u.values)
    for axis in range(3):
        du = diff_field(u.values, axis, g.h, g.periodic[axis], edge_order=2)
        out += mul_arrays(_E_ROWS[axis], du)
    return Field(out, g)


def discrete_div(u: Field) -> Field:
    """Divergence of the e-vector part, as a scalar field.

    The spatial operator satisfies Re(D u) = -div u, so the divergence is
    the negated scalar part.
    """
    return Field.from_scalar(-discrete_spatial_dirac(u).scalar(), u.grid)


def discrete_grad(p: Field) -> Field:
    """Gradient of a scalar field as an e-vector field."""
    return Field.from_vector(
        discrete_spatial_dirac(Field.from_scalar(p.scalar(), p.grid)).vector(),
        p.grid)


def _forward_gap_diffs(u: Field) -> list[np.ndarray]:
    """Forward difference quotients over cell gaps, one array per axis."""
    g = u.grid
    out = []
    for axis in range(4):
        spacing = g.spacing(axis)
        if axis < 3 and g.periodic[axis]:
            d = (np.roll(u.values, -1, axis) - u.values) / spacing
        else:
            d = np.diff(u.values, axis=axis) / spacing
        out.append(d)
    return out


def discrete_norm(u: Field, kind: str = "L2") -> float:
    """Discrete L2 or first-order Sobolev norm over all nodes.

    L2 squares the coefficient norm per node under the cell quadrature
    ``h^3 dt``; W11 adds the forward difference quotients along every axis
    in the same quadrature.
    """
    vol = u.grid.cell_volume
    total = float(np.sum(u.values * u.values)) * vol
    if kind == "L2":
        return float(np.sqrt(total))
    if kind != "W11":
        raise ValueError(f"unknown norm kind {kind!r}")
    for d in _forward_gap_diffs(u):
        total += float(np.sum(d * d)) * vol
    return float(np.sqrt(total))


_FULL_HEADER = "x,y,z,t,s,v1,v2,v3,wf,wfd,wn"
_SOLVER_HEADER = "x,y,z,t,u1,u2,u3,p"


def _rows(grid: SpaceTimeGrid):
    """Row coordinates in mandated order: time-major, lexicographic nodes."""
    xs, ts = grid.node_positions()
    for j in range(grid.nt):
        for i1 in range(grid.dims[0]):
            for i2 in range(grid.dims[1]):
                for i3 in range(grid.dims[2]):
                    yield (i1, i2, i3, j), xs[i1, i2, i3], ts[j]


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def export_field_csv(u: Field, path) -> None:
    """All 7 coefficients per node; deterministic row order."""
    with open(path, "w") as fh:
        fh.write(_FULL_HEADER + "\n")
        for idx, x, t in _rows(u.grid):
            vals = u.values[idx]
            fh.write(",".join([_fmt(x[0]), _fmt(x[1]), _fmt(x[2]), _fmt(t)]
                              + [_fmt(v) for v in vals]) + "\n")


def export_solution_csv(u: Field, p: Field, path) -> None:
    """Velocity components and pressure per node (solver view)."""
    if u.grid != p.grid:
        raise ValueError("velocity and pressure live on different grids")
    with open(path, "w") as fh:
        fh.write(_SOLVER_HEADER + "\n")
        for idx, x, t in _rows(u.grid):
            vel = u.values[idx][1:4]
            fh.write(",".join([_fmt(x[0]), _fmt(x[1]), _fmt(x[2]), _fmt(t),
                               _fmt(vel[0]), _fmt(vel[1]), _fmt(vel[2]),
                               _fmt(p.values[idx][0])]) + "\n")


def load_field_csv(path, grid: SpaceTimeGrid) -> Field:
    """Inverse of export_field_csv for a known grid."""
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    if data.ndim == 1:
        data = data[None, :]
    expected = grid.n_cells
    if data.shape[0] != expected or data.shape[1] != 11:
        raise ValueError(f"csv shape {data.shape} does not match grid")
    values = np.zeros(grid.shape + (7,))
    r = 0
    for j in range(grid.nt):
        for i1 in range(grid.dims[0]):
            for i2 in range(grid.dims[1]):
                for i3 in range(grid.dims[2]):
                    values[i1, i2, i3, j] = data[r, 4:]
                    r += 1
    return Field(values, grid)
