"""Discretized integral operators: volume potential (Teodorescu transform),
boundary potential (Cauchy transform), boundary trace, and the Bergman
projection pair.

All kernels are evaluated at (output - source) offsets, so only strictly
earlier time slabs ever contribute (the kernel is causal and vanishes on the
coincident slab, which also removes the singular cell from the quadrature).
Offsets live on structured ladders, so every operator is a space-time
convolution: volume and boundary applications run through FFTs on padded
(free) or wrapped (periodized) axes.  Antiperiodic generators are handled by
doubling the axis with a sign twist.

The Bergman projection is computed algebraically from the boundary system
``trace o volume o boundary`` restricted to the causally active boundary
components (the terminal cap, and the conormal null directions of each
element, contribute nothing to the boundary potential and are excluded from
the square system).  The factorization is cached per (domain, kernel
parameter, lattice, tolerance) key.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .domain import Domain, Field
from .kernels import KernelParams, active_convention, fundamental_solution_array
from .lattice import LatticeSpec, periodized_solution_batch
from .witt_algebra import mul_arrays, mul_matrix, structure_tensor

__all__ = [
    "OperatorContext",
    "BoundaryData",
    "teodorescu",
    "teodorescu_adjoint",
    "cauchy_transform",
    "cauchy_adjoint",
    "boundary_trace",
    "trace_adjoint",
    "bergman_projection",
    "bergman_complement",
    "bergman_projection_adjoint",
    "clear_caches",
]

_STRUCTURE = structure_tensor()
_CACHE_VERSION = 1

# Module-level cache for factorized boundary systems and kernel tables.
_FACTOR_CACHE: dict = {}


def clear_caches() -> None:
    _FACTOR_CACHE.clear()


@dataclass
class BoundaryData:
    """Algebra-valued density on the boundary elements of a domain."""

    values: np.ndarray
    domain: Domain

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = (self.domain.n_boundary, 7)
        if self.values.shape != expected:
            raise ValueError(
                f"boundary data shape {self.values.shape} != {expected}")

    @classmethod
    def zeros(cls, domain: Domain) -> "BoundaryData":
        return cls(np.zeros((domain.n_boundary, 7)), domain)


@dataclass
class OperatorContext:
    """Domain, kernel parameter and lattice wiring for the operator stack.

    ``quad_tol`` drives the periodized-kernel shell summation;
    ``bergman_reg`` scales the ridge fallback for an ill-conditioned
    boundary system.  Construction requires a calibrated operator
    convention.
    """

    domain: Domain
    params: KernelParams
    lattice: LatticeSpec = dataclass_field(default_factory=LatticeSpec)
    quad_tol: float = 1e-10
    bergman_reg: float = 1e-10
    _local: dict = dataclass_field(default_factory=dict, repr=False)

    def __post_init__(self):
        active_convention()
        if self.quad_tol <= 0:
            raise ValueError("quad_tol must be positive")
        if self.bergman_reg < 0:
            raise ValueError("bergman_reg must be >= 0")
        g = self.domain.grid
        for d in range(3):
            expected = d < self.lattice.rank
            if g.periodic[d] != expected:
                raise ValueError(
                    f"axis {d}: grid periodicity {g.periodic[d]} does not "
                    f"match lattice rank {self.lattice.rank}")

    # -- cache plumbing ----------------------------------------------------

    def _key(self, name: str):
        g = self.domain.grid
        return (_CACHE_VERSION, name, g.h, g.dt, g.dims, g.nt, g.periodic,
                g.t0, self.params.k, self.lattice.rank,
                self.lattice.anti_flags, self.quad_tol, self.bergman_reg)

    def _cached(self, name: str, build):
        key = self._key(name)
        hit = _FACTOR_CACHE.get(key)
        if hit is None:
            hit = build()
            _FACTOR_CACHE[key] = hit
        self._local[name] = hit
        return hit


# ---------------------------------------------------------------------------
# Offset geometry
# ---------------------------------------------------------------------------

def _axis_layout(n: int, periodic: bool, anti: bool):
    """(fft size, offset values in cell units) for one spatial axis.

    Free axes store offsets -(n-1)..(n-1) in wrapped (mod N) order; periodic
    axes use the natural 0..n-1 circle; antiperiodic axes double the circle.
    """
    if periodic:
        size = 2 * n if anti else n
        return size, np.arange(size)
    size = 2 * n - 1
    offs = np.arange(size)
    offs = np.where(offs < n, offs, offs - size)
    return size, offs


def _layouts(ctx: OperatorContext):
    g = ctx.domain.grid
    flags = ctx.lattice.anti_flags + (False,) * (3 - ctx.lattice.rank)
    return [_axis_layout(g.dims[d], g.periodic[d], flags[d])
            for d in range(3)]


def _time_offsets(nt: int):
    size = 2 * nt - 1
    offs = np.arange(size)
    offs = np.where(offs < nt, offs, offs - size)
    return size, offs


def _eval_kernel_grid(ctx: OperatorContext, xo: list[np.ndarray],
                      t_offsets: np.ndarray) -> np.ndarray:
    """Kernel table over an offset meshgrid, periodized when rank > 0.

    ``xo`` gives per-axis offset coordinates (physical units); the result
    has shape (len(xo[0]), len(xo[1]), len(xo[2]), len(t_offsets), 7).
    """
    pts = np.stack(np.meshgrid(*xo, indexing="ij"), axis=-1)
    flat = pts.reshape(-1, 3)
    out = np.zeros((len(flat), len(t_offsets), 7))
    for j, s in enumerate(t_offsets):
        if s <= 0.0:
            continue
        if ctx.lattice.rank == 0:
            out[:, j, :] = fundamental_solution_array(
                flat, np.full(len(flat), s), ctx.params.k)
        else:
            vals, _, _ = periodized_solution_batch(
                flat, float(s), ctx.params, ctx.lattice, ctx.quad_tol)
            out[:, j, :] = vals
    return out.reshape(pts.shape[:-1] + (len(t_offsets), 7))


# ---------------------------------------------------------------------------
# FFT convolution engine
# ---------------------------------------------------------------------------

class _ConvEngine:
    """Space-time convolution with a fixed algebra-valued kernel table.

    apply:      R(y) = sum_x mul(K(y - x), u(x)) * scale
    transpose:  R(x) = sum_y mul_matrix(K(y - x))^T w(y) * scale

    Free axes are zero padded to hold every offset; periodized axes wrap
    naturally; antiperiodic axes wrap with doubled period (the kernel table
    itself carries the sign law, so plain zero padding of the data gives
    the single-counted twisted sum).  Strict causality of the kernel is
    enforced structurally: output slabs at or before the first active input
    slab are exact zeros, not transform roundoff.
    """

    def __init__(self, table: np.ndarray, data_shape):
        self.data_shape = tuple(data_shape)
        self.fft_shape = table.shape[:-1]
        axes = (1, 2, 3, 4)
        self.k_hat = np.fft.rfftn(np.moveaxis(table, -1, 0),
                                  s=self.fft_shape, axes=axes)
        self.pairs = []
        for a in range(7):
            if not np.any(table[..., a]):
                continue
            for b in range(7):
                if np.any(_STRUCTURE[a, b]):
                    self.pairs.append((a, b, _STRUCTURE[a, b]))

    def _embed(self, values: np.ndarray) -> np.ndarray:
        out = np.zeros(self.fft_shape + (7,))
        n1, n2, n3, nt = self.data_shape
        out[:n1, :n2, :n3, :nt, :] = values
        return out

    def apply(self, values: np.ndarray, scale: float) -> np.ndarray:
        axes = (1, 2, 3, 4)
        u_hat = np.fft.rfftn(np.moveaxis(self._embed(values), -1, 0),
                             s=self.fft_shape, axes=axes)
        r_hat = np.zeros((7,) + u_hat.shape[1:], dtype=complex)
        for a, b, cvec in self.pairs:
            prod = self.k_hat[a] * u_hat[b]
            for c in np.nonzero(cvec)[0]:
                r_hat[c] += cvec[c] * prod
        r = np.fft.irfftn(r_hat, s=self.fft_shape, axes=axes)
        n1, n2, n3, nt = self.data_shape
        out = np.moveaxis(r[:, :n1, :n2, :n3, :nt], 0, -1) * scale
        active = np.nonzero(np.any(values != 0.0, axis=(0, 1, 2, 4)))[0]
        first = active[0] if len(active) else nt
        out[..., :min(first + 1, nt), :] = 0.0
        return out

    def apply_transpose(self, values: np.ndarray, scale: float) -> np.ndarray:
        axes = (1, 2, 3, 4)
        w_hat = np.fft.rfftn(np.moveaxis(self._embed(values), -1, 0),
                             s=self.fft_shape, axes=axes)
        r_hat = np.zeros((7,) + w_hat.shape[1:], dtype=complex)
        for a, b, cvec in self.pairs:
            # transpose contracts the output slot: R_b += C[a,b,c] K_a w_c
            for c in np.nonzero(cvec)[0]:
                r_hat[b] += cvec[c] * np.conj(self.k_hat[a]) * w_hat[c]
        r = np.fft.irfftn(r_hat, s=self.fft_shape, axes=axes)
        n1, n2, n3, nt = self.data_shape
        out = np.moveaxis(r[:, :n1, :n2, :n3, :nt], 0, -1) * scale
        # anti-causal counterpart of the forward masking
        active = np.nonzero(np.any(values != 0.0, axis=(0, 1, 2, 4)))[0]
        if len(active):
            out[..., active[-1]:, :] = 0.0
        else:
            out[:] = 0.0
        return out


def _volume_engine(ctx: OperatorContext) -> _ConvEngine:
    def build():
        g = ctx.domain.grid
        lay = _layouts(ctx)
        nt_size, t_off = _time_offsets(g.nt)
        xo = [lay[d][1] * g.h for d in range(3)]
        table = _eval_kernel_grid(ctx, xo, t_off * g.dt)
        return _ConvEngine(table, g.shape)
    return ctx._cached("volume_engine", build)


def teodorescu(u: Field, ctx: OperatorContext) -> Field:
    """Volume potential: kernel-weighted sum over all earlier cells."""
    if u.grid != ctx.domain.grid:
        raise ValueError("field does not live on the context domain")
    engine = _volume_engine(ctx)
    return Field(engine.apply(u.values, ctx.domain.grid.cell_volume), u.grid)


def teodorescu_adjoint(w: Field, ctx: OperatorContext) -> Field:
    """Transpose of the volume potential in plain node coordinates."""
    if w.grid != ctx.domain.grid:
        raise ValueError("field does not live on the context domain")
    engine = _volume_engine(ctx)
    return Field(engine.apply_transpose(w.values, ctx.domain.grid.cell_volume),
                 w.grid)


# ---------------------------------------------------------------------------
# Boundary potential
# ---------------------------------------------------------------------------

def _face_groups(ctx: OperatorContext):
    """Boundary elements grouped by family with index maps into arrays.

    Lateral families are keyed (axis, side); the initial cap is its own
    family.  The terminal cap never contributes to the boundary potential
    (the kernel argument would need a negative time offset) and gets no
    group.
    """
    def build():
        d = ctx.domain
        g = d.grid
        groups = []
        for axis in range(3):
            if g.periodic[axis]:
                continue
            across = [a for a in range(3) if a != axis]
            for side in (0, 1):
                mask = (d.b_kind == 0) & (d.b_axis == axis) & (d.b_side == side)
                idx = np.nonzero(mask)[0]
                if not len(idx):
                    continue
                shape = (g.dims[across[0]], g.dims[across[1]], g.nt)
                slot = (d.b_near[idx][:, across[0]],
                        d.b_near[idx][:, across[1]],
                        d.b_near[idx][:, 3])
                groups.append(("lateral", axis, side, idx, shape, slot))
        mask = ctx.domain.b_kind == 1
        idx = np.nonzero(mask)[0]
        slot = (d.b_near[idx][:, 0], d.b_near[idx][:, 1], d.b_near[idx][:, 2])
        groups.append(("cap0", 3, 0, idx, g.dims, slot))
        return groups
    return ctx._cached("face_groups", build)


class _LateralEngine:
    """Boundary-to-volume convolution for one lateral face family.

    The offset along the face axis is a half-shifted ladder indexed directly
    by the output layer; across-face axes and time convolve by FFT.
    """

    def __init__(self, ctx: OperatorContext, axis: int, side: int):
        g = ctx.domain.grid
        self.axis = axis
        self.across = [a for a in range(3) if a != axis]
        lay = _layouts(ctx)
        nt_size, t_off = _time_offsets(g.nt)
        n_axis = g.dims[axis]
        if side == 0:
            axis_offs = (np.arange(n_axis) + 0.5) * g.h
        else:
            axis_offs = (np.arange(n_axis) + 0.5 - n_axis) * g.h
        a0, a1 = self.across
        xo = [None, None, None]
        xo[axis] = axis_offs
        xo[a0] = lay[a0][1] * g.h
        xo[a1] = lay[a1][1] * g.h
        table = _eval_kernel_grid(ctx, xo, t_off * g.dt)
        # reorder to (axis_layer, across0, across1, time, 7); moving the
        # face axis first keeps the across axes in ascending order
        self.table = np.moveaxis(table, axis, 0)
        self.fft_shape = self.table.shape[1:-1]
        self.k_hat = np.fft.rfftn(np.moveaxis(self.table, -1, 0),
                                  s=self.fft_shape, axes=(2, 3, 4))
        self.pairs = []
        for a in range(7):
            if not np.any(table[..., a]):
                continue
            for b in range(7):
                if np.any(_STRUCTURE[a, b]):
                    self.pairs.append((a, b, _STRUCTURE[a, b]))
        self.data_shape = (g.dims[a0], g.dims[a1], g.nt)

    def _embed(self, density: np.ndarray) -> np.ndarray:
        out = np.zeros(self.fft_shape + (7,))
        s0, s1, st = self.data_shape
        out[:s0, :s1, :st, :] = density
        return out

    def apply(self, density: np.ndarray) -> np.ndarray:
        """density (across0, across1, nt, 7) -> field contribution."""
        u_hat = np.fft.rfftn(np.moveaxis(self._embed(density), -1, 0),
                             s=self.fft_shape, axes=(1, 2, 3))
        r_hat = np.zeros((7, self.table.shape[0]) + u_hat.shape[1:],
                         dtype=complex)
        for a, b, cvec in self.pairs:
            prod = self.k_hat[a] * u_hat[b][None, ...]
            for c in np.nonzero(cvec)[0]:
                r_hat[c] += cvec[c] * prod
        r = np.fft.irfftn(r_hat, s=self.fft_shape, axes=(2, 3, 4))
        s0, s1, st = self.data_shape
        out = np.moveaxis(r[:, :, :s0, :s1, :st], 0, -1)
        # axes here: (axis_layer, across0, across1, time, comp); restore the
        # face axis to its spatial slot
        if self.axis == 0:
            return out
        if self.axis == 1:
            return np.swapaxes(out, 0, 1)
        return np.moveaxis(out, 0, 2)

    def apply_transpose(self, w: np.ndarray) -> np.ndarray:
        """field (nx,ny,nz,nt,7) -> density-shaped transpose application."""
        if self.axis == 1:
            w_al = np.swapaxes(w, 0, 1)
        elif self.axis == 2:
            w_al = np.moveaxis(w, 2, 0)
        else:
            w_al = w
        s0, s1, st = self.data_shape
        full = np.zeros((w_al.shape[0],) + self.fft_shape + (7,))
        full[:, :s0, :s1, :st, :] = w_al
        w_hat = np.fft.rfftn(np.moveaxis(full, -1, 0), s=self.fft_shape,
                             axes=(2, 3, 4))
        r_hat = np.zeros((7,) + w_hat.shape[2:], dtype=complex)
        for a, b, cvec in self.pairs:
            for c in np.nonzero(cvec)[0]:
                r_hat[b] += cvec[c] * np.einsum(
                    "l...,l...->...", np.conj(self.k_hat[a]), w_hat[c])
        r = np.fft.irfftn(r_hat, s=self.fft_shape, axes=(1, 2, 3))
        s0, s1, st = self.data_shape
        return np.moveaxis(r[:, :s0, :s1, :st], 0, -1)


class _CapEngine:
    """Initial-cap to volume convolution (per-slab spatial FFT)."""

    def __init__(self, ctx: OperatorContext):
        g = ctx.domain.grid
        lay = _layouts(ctx)
        xo = [lay[d][1] * g.h for d in range(3)]
        t_off = (np.arange(g.nt) + 0.5) * g.dt
        self.table = _eval_kernel_grid(ctx, xo, t_off)
        self.fft_shape = self.table.shape[:3]
        self.k_hat = np.fft.rfftn(np.moveaxis(self.table, -1, 0),
                                  s=self.fft_shape, axes=(1, 2, 3))
        self.pairs = []
        for a in range(7):
            if not np.any(self.table[..., a]):
                continue
            for b in range(7):
                if np.any(_STRUCTURE[a, b]):
                    self.pairs.append((a, b, _STRUCTURE[a, b]))
        self.dims = g.dims
        self.nt = g.nt

    def _embed(self, density: np.ndarray) -> np.ndarray:
        out = np.zeros(self.fft_shape + (7,))
        n1, n2, n3 = self.dims
        out[:n1, :n2, :n3, :] = density
        return out

    def apply(self, density: np.ndarray) -> np.ndarray:
        """density (nx,ny,nz,7) -> field (nx,ny,nz,nt,7)."""
        u_hat = np.fft.rfftn(np.moveaxis(self._embed(density), -1, 0),
                             s=self.fft_shape, axes=(1, 2, 3))
        # k_hat axes: (comp, f1, f2, f3, time); combine per time slice
        r_hat = np.zeros((7,) + u_hat.shape[1:] + (self.nt,), dtype=complex)
        kh = np.moveaxis(self.k_hat, 4, -1)  # (comp, f1, f2, f3, nt)
        for a, b, cvec in self.pairs:
            prod = kh[a] * u_hat[b][..., None]
            for c in np.nonzero(cvec)[0]:
                r_hat[c] += cvec[c] * prod
        r = np.fft.irfftn(np.moveaxis(r_hat, -1, 1), s=self.fft_shape,
                          axes=(2, 3, 4))
        n1, n2, n3 = self.dims
        return np.moveaxis(r[:, :, :n1, :n2, :n3], (0, 1), (-1, 3)) \
            .reshape(n1, n2, n3, self.nt, 7)

    def apply_transpose(self, w: np.ndarray) -> np.ndarray:
        """field (nx,ny,nz,nt,7) -> cap density (nx,ny,nz,7)."""
        n1, n2, n3 = self.dims
        full = np.zeros(self.fft_shape + (self.nt, 7))
        full[:n1, :n2, :n3] = w
        w_hat = np.fft.rfftn(np.moveaxis(full, -1, 0), s=self.fft_shape,
                             axes=(1, 2, 3))   # (comp, f1,f2,f3, nt)
        r_hat = np.zeros((7,) + w_hat.shape[1:4], dtype=complex)
        kh = np.moveaxis(self.k_hat, 4, -1)
        for a, b, cvec in self.pairs:
            for c in np.nonzero(cvec)[0]:
                r_hat[b] += cvec[c] * np.sum(
                    np.conj(kh[a]) * w_hat[c], axis=-1)
        r = np.fft.irfftn(r_hat, s=self.fft_shape, axes=(1, 2, 3))
        return np.moveaxis(r[:, :n1, :n2, :n3], 0, -1)


def _boundary_engines(ctx: OperatorContext):
    def build():
        engines = {}
        for kind, axis, side, idx, shape, slot in _face_groups(ctx):
            if kind == "lateral":
                engines[(axis, side)] = _LateralEngine(ctx, axis, side)
            else:
                engines["cap0"] = _CapEngine(ctx)
        return engines
    return ctx._cached("boundary_engines", build)


def cauchy_transform(bd: BoundaryData, ctx: OperatorContext) -> Field:
    """Boundary potential: kernel times (conormal times density), weighted."""
    if bd.domain is not ctx.domain and bd.domain.grid != ctx.domain.grid:
        raise ValueError("boundary data does not match the context domain")
    d = ctx.domain
    engines = _boundary_engines(ctx)
    sigma_bd = mul_arrays(d.b_conormal, bd.values) * d.b_weight[:, None]
    out = np.zeros(d.grid.shape + (7,))
    for kind, axis, side, idx, shape, slot in _face_groups(ctx):
        density = np.zeros(shape + (7,))
        density[slot] = sigma_bd[idx]
        if kind == "lateral":
            out += engines[(axis, side)].apply(density)
        else:
            out += engines["cap0"].apply(density)
    return Field(out, d.grid)


def cauchy_adjoint(w: Field, ctx: OperatorContext) -> BoundaryData:
    """Transpose of the boundary potential in plain coordinates."""
    d = ctx.domain
    engines = _boundary_engines(ctx)
    out = np.zeros((d.n_boundary, 7))
    for kind, axis, side, idx, shape, slot in _face_groups(ctx):
        if kind == "lateral":
            density = engines[(axis, side)].apply_transpose(w.values)
        else:
            density = engines["cap0"].apply_transpose(w.values)
        out[idx] = density[slot]
    sig_t = np.swapaxes(mul_matrix(d.b_conormal), -1, -2)
    out = np.einsum("bij,bj->bi", sig_t, out) * d.b_weight[:, None]
    return BoundaryData(out, d)


def boundary_trace(u: Field, ctx: OperatorContext) -> BoundaryData:
    """Field values extrapolated to face centroids (one-sided, 2nd order)."""
    d = ctx.domain
    if u.grid != d.grid:
        raise ValueError("field does not live on the context domain")
    near = tuple(d.b_near.T)
    nxt = tuple(d.b_next.T)
    return BoundaryData(1.5 * u.values[near] - 0.5 * u.values[nxt], d)


def trace_adjoint(bd: BoundaryData, ctx: OperatorContext) -> Field:
    d = ctx.domain
    out = np.zeros(d.grid.shape + (7,))
    np.add.at(out, tuple(d.b_near.T), 1.5 * bd.values)
    np.add.at(out, tuple(d.b_next.T), -0.5 * bd.values)
    return Field(out, d.grid)


# ---------------------------------------------------------------------------
# Bergman projection
# ---------------------------------------------------------------------------

class ConditioningError(RuntimeError):
    """Boundary system is numerically singular beyond regularization."""


def _active_mask(ctx: OperatorContext) -> np.ndarray:
    """Boundary components that can influence the boundary potential.

    Lateral conormals kill the three Witt components; the initial cap keeps
    only the scalar and the fd component; the terminal cap and the lateral
    elements of the final time slab are causally inert (strictly-future
    propagation).  Restricting the boundary system to the surviving
    components removes its structural null space.
    """
    d = ctx.domain
    nt = d.grid.nt
    mask = np.zeros((d.n_boundary, 7), dtype=bool)
    lateral = (d.b_kind == 0) & (d.b_near[:, 3] < nt - 1)
    mask[lateral, 0:4] = True
    cap0 = d.b_kind == 1
    mask[cap0, 0] = True
    mask[cap0, 5] = True
    return mask


def _compose_trace_volume(u: Field, ctx: OperatorContext) -> BoundaryData:
    return boundary_trace(teodorescu(u, ctx), ctx)


def _bergman_factorization(ctx: OperatorContext):
    """Rank-revealing factorization of the boundary system.

    Columns are restricted to the causally active boundary components, rows
    keep every component of the traced volume potential (the system maps
    between different component sectors).  A truncated singular value
    decomposition realizes the inverse: the pseudo-inverse keeps the
    projector exactly idempotent even when strict causality makes the
    system rank deficient, which plays the role of the ridge fallback.
    """
    def build():
        d = ctx.domain
        mask = _active_mask(ctx)
        active = np.nonzero(mask.reshape(-1))[0]
        n_act = len(active)
        n_rows = d.n_boundary * 7
        columns = np.zeros((n_rows, n_act))
        bd_vals = np.zeros((d.n_boundary, 7))
        for i, flat in enumerate(active):
            bd_vals[:] = 0.0
            bd_vals[flat // 7, flat % 7] = 1.0
            f = cauchy_transform(BoundaryData(bd_vals, d), ctx)
            r = _compose_trace_volume(f, ctx)
            columns[:, i] = r.values.reshape(-1)
        u_svd, s_svd, vt_svd = np.linalg.svd(columns, full_matrices=False)
        if not len(s_svd) or s_svd[0] == 0.0:
            raise ConditioningError(
                "boundary system vanished identically; no projection exists")
        cutoff = max(1e-12, ctx.bergman_reg) * s_svd[0]
        rank = int(np.sum(s_svd > cutoff))
        if rank == 0:
            raise ConditioningError(
                "boundary system singular beyond regularization (largest "
                f"singular value {s_svd[0]:.3e})")
        return {"u": u_svd[:, :rank], "s": s_svd[:rank],
                "vt": vt_svd[:rank], "active": active, "rank": rank,
                "spectrum": (float(s_svd[0]), float(s_svd[rank - 1])),
                "n_active": n_act}
    return ctx._cached("bergman_factorization", build)


def _pinv_apply(fac, rhs: np.ndarray) -> np.ndarray:
    return fac["vt"].T @ ((fac["u"].T @ rhs) / fac["s"])


def _pinv_apply_transpose(fac, z: np.ndarray) -> np.ndarray:
    return fac["u"] @ ((fac["vt"] @ z) / fac["s"])


def bergman_projection(u: Field, ctx: OperatorContext) -> Field:
    """Projection onto the boundary-potential range (discrete kernel space).

    Solves the boundary system for the density whose boundary potential
    matches the traced volume potential of ``u``, then applies the boundary
    potential.
    """
    fac = _bergman_factorization(ctx)
    rhs = _compose_trace_volume(u, ctx).values.reshape(-1)
    z = _pinv_apply(fac, rhs)
    bd_vals = np.zeros(ctx.domain.n_boundary * 7)
    bd_vals[fac["active"]] = z
    return cauchy_transform(
        BoundaryData(bd_vals.reshape(-1, 7), ctx.domain), ctx)


def bergman_complement(u: Field, ctx: OperatorContext) -> Field:
    """Complementary projection (identity minus the Bergman projection)."""
    return u - bergman_projection(u, ctx)


def bergman_projection_adjoint(w: Field, ctx: OperatorContext) -> Field:
    """Plain-coordinate transpose of the Bergman projection."""
    fac = _bergman_factorization(ctx)
    rhs = cauchy_adjoint(w, ctx).values.reshape(-1)
    z = _pinv_apply_transpose(fac, rhs[fac["active"]])
    bd = BoundaryData(z.reshape(-1, 7), ctx.domain)
    return teodorescu_adjoint(trace_adjoint(bd, ctx), ctx)
