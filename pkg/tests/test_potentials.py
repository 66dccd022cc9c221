import numpy as np
import pytest

from wittflow.domain import (Field, build_box_domain, build_quotient_domain,
                             discrete_norm)
from wittflow.kernels import (KernelParams, fundamental_solution_array)
from wittflow.lattice import LatticeSpec, periodized_solution_batch
from wittflow.potentials import (BoundaryData, OperatorContext,
                                 bergman_complement, bergman_projection,
                                 bergman_projection_adjoint, boundary_trace,
                                 cauchy_adjoint, cauchy_transform,
                                 teodorescu, teodorescu_adjoint,
                                 trace_adjoint)
from wittflow.witt_algebra import mul_arrays


def box_ctx(n=3, nt=3, horizon=0.5, k=1.0):
    d = build_box_domain((1.0, 1.0, 1.0), horizon, 1.0 / n, horizon / nt)
    return OperatorContext(d, KernelParams(k))


def torus_ctx(n=4, nt=8, horizon=0.5, k=1.0, flags=(False, False, False)):
    spec = LatticeSpec(3, flags)
    d = build_quotient_domain(spec, [], horizon, 1.0 / n, horizon / nt)
    return OperatorContext(d, KernelParams(k), spec)


def brute_volume(u, ctx, kernel_eval):
    """Triple-loop reference for the volume potential."""
    g = ctx.domain.grid
    xs, ts = g.node_positions()
    pts = xs.reshape(-1, 3)
    n = len(pts)
    vals = u.values.reshape(n, g.nt, 7)
    out = np.zeros((n, g.nt, 7))
    for j, tau in enumerate(ts):
        for i, t in enumerate(ts):
            if t >= tau:
                continue
            dz = pts[:, None, :] - pts[None, :, :]
            kv = kernel_eval(dz, tau - t)
            out[:, j, :] += np.einsum("yxab,xb->ya",
                                      _mulmat(kv), vals[:, i, :])
    return Field(out.reshape(g.shape + (7,)) * g.cell_volume, g)


def _mulmat(k_vals):
    from wittflow.witt_algebra import mul_matrix
    return mul_matrix(k_vals)


class TestVolumePotential:
    def test_matches_brute_force_box(self):
        ctx = box_ctx()
        rng = np.random.default_rng(0)
        u = Field(rng.standard_normal(ctx.domain.grid.shape + (7,)),
                  ctx.domain.grid)
        fast = teodorescu(u, ctx)

        def kernel_eval(dz, s):
            return fundamental_solution_array(
                dz, np.full(dz.shape[:-1], s), ctx.params.k)
        ref = brute_volume(u, ctx, kernel_eval)
        assert np.allclose(fast.values, ref.values, rtol=1e-12, atol=1e-13)

    def test_matches_brute_force_torus(self):
        ctx = torus_ctx(n=3, nt=3)
        rng = np.random.default_rng(1)
        u = Field(rng.standard_normal(ctx.domain.grid.shape + (7,)),
                  ctx.domain.grid)
        fast = teodorescu(u, ctx)

        def kernel_eval(dz, s):
            flat = dz.reshape(-1, 3)
            vals, _, _ = periodized_solution_batch(flat, s, ctx.params,
                                                   ctx.lattice, ctx.quad_tol)
            return vals.reshape(dz.shape[:-1] + (7,))
        ref = brute_volume(u, ctx, kernel_eval)
        assert np.allclose(fast.values, ref.values, rtol=1e-10, atol=1e-11)

    def test_matches_brute_force_antiperiodic(self):
        ctx = torus_ctx(n=3, nt=3, flags=(True, False, True))
        rng = np.random.default_rng(2)
        u = Field(rng.standard_normal(ctx.domain.grid.shape + (7,)),
                  ctx.domain.grid)
        fast = teodorescu(u, ctx)

        def kernel_eval(dz, s):
            flat = dz.reshape(-1, 3)
            vals, _, _ = periodized_solution_batch(flat, s, ctx.params,
                                                   ctx.lattice, ctx.quad_tol)
            return vals.reshape(dz.shape[:-1] + (7,))
        ref = brute_volume(u, ctx, kernel_eval)
        assert np.allclose(fast.values, ref.values, rtol=1e-10, atol=1e-11)

    def test_zero_input(self):
        ctx = box_ctx()
        out = teodorescu(Field.zeros(ctx.domain.grid), ctx)
        assert np.all(out.values == 0.0)

    def test_causality(self):
        # inputs vanishing before a time leave the output zero there
        ctx = box_ctx(n=3, nt=4)
        g = ctx.domain.grid
        rng = np.random.default_rng(3)
        vals = np.zeros(g.shape + (7,))
        vals[..., 2:, :] = rng.standard_normal(g.shape[:3] + (2, 7))
        out = teodorescu(Field(vals, g), ctx)
        assert np.all(out.values[..., :3, :] == 0.0)
        assert np.any(out.values[..., 3, :] != 0.0)

    def test_translation_equivariance_on_quotient(self):
        ctx = torus_ctx(n=4, nt=4)
        rng = np.random.default_rng(4)
        u = Field(rng.standard_normal(ctx.domain.grid.shape + (7,)),
                  ctx.domain.grid)
        shifted = Field(np.roll(u.values, 1, axis=0), ctx.domain.grid)
        out = teodorescu(u, ctx)
        out_shifted = teodorescu(shifted, ctx)
        assert np.allclose(np.roll(out.values, 1, axis=0),
                           out_shifted.values, rtol=1e-12, atol=1e-14)

    def test_adjoint_identity(self):
        ctx = box_ctx()
        rng = np.random.default_rng(5)
        g = ctx.domain.grid
        u = Field(rng.standard_normal(g.shape + (7,)), g)
        w = Field(rng.standard_normal(g.shape + (7,)), g)
        lhs = float(np.sum(teodorescu(u, ctx).values * w.values))
        rhs = float(np.sum(u.values * teodorescu_adjoint(w, ctx).values))
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_single_cell_input_is_kernel_translate(self):
        ctx = box_ctx(n=3, nt=3)
        g = ctx.domain.grid
        vals = np.zeros(g.shape + (7,))
        vals[1, 1, 1, 0, 2] = 1.0
        out = teodorescu(Field(vals, g), ctx)
        xs, ts = g.node_positions()
        y = xs[2, 0, 1]
        x_src = xs[1, 1, 1]
        kv = fundamental_solution_array(y - x_src,
                                        np.asarray(ts[2] - ts[0]),
                                        ctx.params.k)
        want = mul_arrays(kv, np.eye(7)[2]) * g.cell_volume
        assert np.allclose(out.values[2, 0, 1, 2], want, rtol=1e-12)


class TestBoundaryPotential:
    def test_matches_direct_summation(self):
        ctx = box_ctx()
        d = ctx.domain
        rng = np.random.default_rng(6)
        bd = BoundaryData(rng.standard_normal((d.n_boundary, 7)), d)
        fast = cauchy_transform(bd, ctx)
        g = d.grid
        xs, ts = g.node_positions()
        pts = xs.reshape(-1, 3)
        sig = mul_arrays(d.b_conormal, bd.values) * d.b_weight[:, None]
        ref = np.zeros((len(pts), g.nt, 7))
        for j, tau in enumerate(ts):
            dz = pts[:, None, :] - d.b_position[None, :, :]
            s = tau - d.b_time[None, :]
            kv = fundamental_solution_array(
                dz, np.broadcast_to(s, dz.shape[:-1]), ctx.params.k)
            ref[:, j, :] = mul_arrays(kv, sig[None, :, :]).sum(axis=1)
        assert np.allclose(fast.values.reshape(ref.shape), ref,
                           rtol=1e-12, atol=1e-13)

    def test_zero_density(self):
        ctx = box_ctx()
        out = cauchy_transform(BoundaryData.zeros(ctx.domain), ctx)
        assert np.all(out.values == 0.0)

    def test_terminal_cap_is_inert(self):
        ctx = box_ctx()
        d = ctx.domain
        vals = np.zeros((d.n_boundary, 7))
        vals[d.b_kind == 2] = 1.0
        out = cauchy_transform(BoundaryData(vals, d), ctx)
        assert np.all(out.values == 0.0)

    def test_adjoint_identity(self):
        ctx = box_ctx()
        d = ctx.domain
        rng = np.random.default_rng(7)
        bd = BoundaryData(rng.standard_normal((d.n_boundary, 7)), d)
        w = Field(rng.standard_normal(d.grid.shape + (7,)), d.grid)
        lhs = float(np.sum(cauchy_transform(bd, ctx).values * w.values))
        rhs = float(np.sum(bd.values * cauchy_adjoint(w, ctx).values))
        assert lhs == pytest.approx(rhs, rel=1e-12)


class TestTrace:
    def test_constant_field(self):
        ctx = box_ctx()
        c = np.array([1.0, -2.0, 0.5, 0.0, 3.0, 0.25, -1.0])
        vals = np.broadcast_to(c, ctx.domain.grid.shape + (7,)).copy()
        tr = boundary_trace(Field(vals, ctx.domain.grid), ctx)
        assert np.allclose(tr.values, c, rtol=1e-14)

    def test_linear_field_exact(self):
        ctx = box_ctx(n=4, nt=4)
        g = ctx.domain.grid
        xs, ts = g.node_positions()
        vals = np.zeros(g.shape + (7,))
        vals[..., 0] = (2.0 * xs[..., 0] - xs[..., 2])[..., None] \
            + 0.5 * ts[None, None, None, :]
        tr = boundary_trace(Field(vals, g), ctx)
        d = ctx.domain
        want = (2.0 * d.b_position[:, 0] - d.b_position[:, 2]
                + 0.5 * d.b_time)
        assert np.allclose(tr.values[:, 0], want, rtol=1e-12, atol=1e-12)

    def test_adjoint_identity(self):
        ctx = box_ctx()
        d = ctx.domain
        rng = np.random.default_rng(8)
        u = Field(rng.standard_normal(d.grid.shape + (7,)), d.grid)
        bd = BoundaryData(rng.standard_normal((d.n_boundary, 7)), d)
        lhs = float(np.sum(boundary_trace(u, ctx).values * bd.values))
        rhs = float(np.sum(u.values * trace_adjoint(bd, ctx).values))
        assert lhs == pytest.approx(rhs, rel=1e-12)


class TestBergman:
    def test_idempotency(self):
        ctx = torus_ctx()
        rng = np.random.default_rng(9)
        u = Field(rng.standard_normal(ctx.domain.grid.shape + (7,)),
                  ctx.domain.grid)
        pu = bergman_projection(u, ctx)
        ppu = bergman_projection(pu, ctx)
        num = discrete_norm(ppu - pu, "L2")
        den = discrete_norm(pu, "L2")
        assert num / den < 1e-6

    def test_complement(self):
        ctx = torus_ctx()
        rng = np.random.default_rng(10)
        u = Field(rng.standard_normal(ctx.domain.grid.shape + (7,)),
                  ctx.domain.grid)
        pu = bergman_projection(u, ctx)
        qu = bergman_complement(u, ctx)
        assert np.allclose(pu.values + qu.values, u.values, rtol=1e-12)

    def test_reproduces_resolved_boundary_potentials(self):
        # fields generated by boundary densities inside the resolved part
        # of the boundary system are fixed points of the projection
        from wittflow.potentials import _bergman_factorization
        ctx = torus_ctx()
        fac = _bergman_factorization(ctx)
        d = ctx.domain
        rng = np.random.default_rng(13)
        weights = rng.standard_normal(min(fac["rank"], 20))
        z = fac["vt"][:len(weights)].T @ weights
        bd_vals = np.zeros(d.n_boundary * 7)
        bd_vals[fac["active"]] = z
        w = cauchy_transform(BoundaryData(bd_vals.reshape(-1, 7), d), ctx)
        pw = bergman_projection(w, ctx)
        err = discrete_norm(pw - w, "L2") / discrete_norm(w, "L2")
        assert err < 1e-8

    def test_adjoint_identity(self):
        ctx = torus_ctx()
        rng = np.random.default_rng(11)
        g = ctx.domain.grid
        u = Field(rng.standard_normal(g.shape + (7,)), g)
        w = Field(rng.standard_normal(g.shape + (7,)), g)
        lhs = float(np.sum(bergman_projection(u, ctx).values * w.values))
        rhs = float(np.sum(u.values
                           * bergman_projection_adjoint(w, ctx).values))
        assert lhs == pytest.approx(rhs, rel=1e-10)

    def test_factorization_is_cached(self):
        from wittflow import potentials
        ctx = torus_ctx()
        rng = np.random.default_rng(12)
        u = Field(rng.standard_normal(ctx.domain.grid.shape + (7,)),
                  ctx.domain.grid)
        bergman_projection(u, ctx)
        key = ctx._key("bergman_factorization")
        assert key in potentials._FACTOR_CACHE
        # a second context on the same geometry reuses the factorization
        ctx2 = torus_ctx()
        bergman_projection(u, ctx2)
        assert ctx2._key("bergman_factorization") == key


class TestContextValidation:
    def test_periodicity_mismatch(self):
        d = build_box_domain((1.0, 1.0, 1.0), 0.5, 1.0 / 3, 0.25)
        with pytest.raises(ValueError, match="periodicity"):
            OperatorContext(d, KernelParams(1.0),
                            LatticeSpec(3, (False,) * 3))

    def test_bad_tolerances(self):
        d = build_box_domain((1.0, 1.0, 1.0), 0.5, 1.0 / 3, 0.25)
        with pytest.raises(ValueError):
            OperatorContext(d, KernelParams(1.0), quad_tol=0.0)
        with pytest.raises(ValueError):
            OperatorContext(d, KernelParams(1.0), bergman_reg=-1.0)
