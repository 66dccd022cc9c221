import itertools

import numpy as np
import pytest

from wittflow.kernels import KernelParams, SpaceTimePoint, fundamental_solution
from wittflow.lattice import (LatticeSpec, brute_force_periodized,
                              periodized_fundamental_solution,
                              periodized_solution_batch, shell_points,
                              sign_of, tail_bound)


RANK3 = LatticeSpec(3, (False, False, False))


class TestSpec:
    def test_flag_count_must_match_rank(self):
        with pytest.raises(ValueError):
            LatticeSpec(2, (True,))
        with pytest.raises(ValueError):
            LatticeSpec(4, (True,) * 4)

    def test_rank_zero(self):
        spec = LatticeSpec()
        assert spec.rank == 0 and spec.anti_flags == ()


class TestShells:
    def test_origin_shell(self):
        for rank in range(4):
            spec = LatticeSpec(rank, (False,) * rank)
            shell = shell_points(0, spec)
            assert np.array_equal(shell.points, [[0, 0, 0]])

    def test_rank3_cardinality_formula(self):
        for m in range(1, 11):
            shell = shell_points(m, RANK3)
            assert len(shell) == (2 * m + 1) ** 3 - (2 * m - 1) ** 3

    def test_rank1_shell(self):
        spec = LatticeSpec(1, (False,))
        shell = shell_points(1, spec)
        assert len(shell) == 2
        assert sorted(map(tuple, shell.points)) == [(-1, 0, 0), (1, 0, 0)]

    def test_low_rank_exhaustive(self):
        # full enumeration oracle, independent of the shell generator
        for rank in (1, 2):
            spec = LatticeSpec(rank, (False,) * rank)
            for m in range(11):
                expected = set()
                for combo in itertools.product(range(-m, m + 1), repeat=rank):
                    if combo and max(abs(c) for c in combo) == m:
                        expected.add(combo + (0,) * (3 - rank))
                if m == 0:
                    expected = {(0, 0, 0)}
                got = set(map(tuple, shell_points(m, spec).points))
                assert got == expected

    def test_rank0_higher_shells_empty(self):
        assert len(shell_points(3, LatticeSpec())) == 0

    def test_lexicographic_order(self):
        pts = shell_points(1, RANK3).points
        assert np.array_equal(pts, sorted(map(tuple, pts)))


class TestSigns:
    def test_no_flags(self):
        spec = RANK3
        for omega in ((1, 2, 3), (0, 0, 0), (-5, 4, 1)):
            assert sign_of(omega, spec) == 1

    def test_single_flag_parity(self):
        spec = LatticeSpec(3, (True, False, False))
        assert sign_of((3, 5, 0), spec) == -1
        assert sign_of((2, 5, 0), spec) == 1

    def test_two_flags(self):
        spec = LatticeSpec(3, (True, True, False))
        assert sign_of((1, 1, 0), spec) == 1
        assert sign_of((1, 2, 0), spec) == -1


class TestTailBound:
    def test_monotone_in_start(self):
        params = KernelParams(1.0)
        for r, t in ((0.5, 0.3), (1.0, 0.5), (1.5, 1.0)):
            values = [tail_bound(m, r, t, params)
                      for m in range(int(r) + 2, int(r) + 8)]
            assert all(b < a for a, b in zip(values, values[1:]))

    def test_far_start_is_negligible(self):
        assert tail_bound(40, 1.0, 1.0, KernelParams(1.0)) < 1e-100

    def test_precondition(self):
        with pytest.raises(ValueError):
            tail_bound(1, 1.5, 0.5, KernelParams(1.0))
        with pytest.raises(ValueError):
            tail_bound(3, 1.0, 0.0, KernelParams(1.0))

    def test_bound_dominates_measured_tail(self):
        # discarded mass beyond shell 6, measured by exhaustive summation
        params = KernelParams(1.0)
        t = 0.5
        rng = np.random.default_rng(2)
        points = rng.uniform(-0.5, 0.5, size=(5, 3))
        partial = np.zeros((5, 7))
        for m in range(7):
            shell = shell_points(m, RANK3)
            shifted = points[:, None, :] + shell.points[None, :, :]
            from wittflow.kernels import fundamental_solution_array
            partial += fundamental_solution_array(
                shifted, np.full(shifted.shape[:-1], t), 1.0).sum(axis=1)
        full, _ = brute_force_periodized(points, t, params, RANK3, radius=12)
        measured = np.linalg.norm(full - partial, axis=1).max()
        r = float(np.max(np.linalg.norm(points, axis=1)))
        assert measured <= tail_bound(7, r, t, params)


class TestPeriodized:
    def test_causal_zero(self):
        value, tail, shells = periodized_fundamental_solution(
            SpaceTimePoint((0.3, 0.2, 0.1), -0.5), KernelParams(1.0),
            RANK3, 1e-10)
        assert np.all(value == 0.0) and tail == 0.0 and shells == 0

    def test_rank0_matches_plain_kernel(self):
        p = SpaceTimePoint((0.3, 0.2, 0.1), 0.5)
        params = KernelParams(1.0)
        value, tail, shells = periodized_fundamental_solution(
            p, params, LatticeSpec(), 1e-10)
        assert np.array_equal(value, fundamental_solution(p, params))
        assert tail == 0.0 and shells == 1

    def test_matches_brute_force(self):
        params = KernelParams(1.0)
        p = SpaceTimePoint((0.3, 0.2, 0.1), 0.5)
        value, tail, shells = periodized_fundamental_solution(
            p, params, RANK3, 1e-10)
        brute, brute_tail = brute_force_periodized(
            np.array(p.x)[None, :], p.t, params, RANK3, radius=12)
        assert shells >= 1
        assert np.linalg.norm(value - brute[0]) <= tail + brute_tail

    def test_quasi_periodicity_sign_law(self):
        params = KernelParams(1.0)
        spec = LatticeSpec(3, (True, False, True))
        x = np.array([0.31, -0.12, 0.27])
        base, tail0, _ = periodized_solution_batch(x[None, :], 0.5, params,
                                                   spec, 1e-10)
        for j, flag in enumerate(spec.anti_flags):
            shifted = x.copy()
            shifted[j] += 1.0
            moved, tail1, _ = periodized_solution_batch(
                shifted[None, :], 0.5, params, spec, 1e-10)
            sign = -1.0 if flag else 1.0
            diff = np.linalg.norm(moved[0] - sign * base[0])
            assert diff <= 2.0 * (tail0 + tail1)

    def test_singular_translate_rejected(self):
        with pytest.raises(ValueError):
            periodized_fundamental_solution(
                SpaceTimePoint((2.0, -1.0, 0.0), 0.0), KernelParams(1.0),
                RANK3, 1e-8)

    def test_tolerance_must_be_positive(self):
        with pytest.raises(ValueError):
            periodized_solution_batch(np.zeros((1, 3)), 0.5,
                                      KernelParams(1.0), RANK3, 0.0)

    def test_shell_cap_error(self):
        # an absurd tolerance cannot be reached within the shell cap
        with pytest.raises(RuntimeError, match="shells"):
            periodized_solution_batch(np.zeros((1, 3)), 40.0,
                                      KernelParams(1e-3), RANK3, 1e-300)
