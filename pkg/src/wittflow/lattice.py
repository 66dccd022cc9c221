"""Lattice shells, spin-structure signs, and periodized kernels.

A quotient is described by its rank (how many of the first coordinate axes
are factored by the unit lattice) and one antiperiodicity flag per generator
(the spin structure).  The periodized kernel is the signed sum of kernel
translates over the sublattice, summed shell by shell in the max-norm so the
analytic tail bound applies verbatim to the discarded remainder.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .kernels import (KernelParams, SpaceTimePoint, fundamental_solution,
                      fundamental_solution_array)

__all__ = [
    "LatticeSpec",
    "LatticeShell",
    "shell_points",
    "sign_of",
    "tail_bound",
    "periodized_fundamental_solution",
    "periodized_solution_batch",
    "brute_force_periodized",
    "MAX_SHELLS",
]

MAX_SHELLS = 64


@dataclass(frozen=True)
class LatticeSpec:
    """Periodization rank and per-generator antiperiodicity flags."""

    rank: int = 0
    anti_flags: tuple[bool, ...] = ()

    def __post_init__(self):
        if self.rank not in (0, 1, 2, 3):
            raise ValueError(f"rank must be 0..3, got {self.rank}")
        object.__setattr__(self, "anti_flags", tuple(bool(b)
                                                     for b in self.anti_flags))
        if len(self.anti_flags) != self.rank:
            raise ValueError(
                f"need {self.rank} antiperiodicity flags, got "
                f"{len(self.anti_flags)}")

    @property
    def periodic_axes(self) -> tuple[int, ...]:
        return tuple(range(self.rank))


@dataclass(frozen=True)
class LatticeShell:
    """All sublattice points at exact max-norm radius m, lex ordered."""

    m: int
    points: np.ndarray

    def __len__(self) -> int:
        return len(self.points)


def shell_points(m: int, spec: LatticeSpec) -> LatticeShell:
    """Enumerate the rank-restricted lattice shell of max-norm radius m."""
    if m < 0:
        raise ValueError("shell radius must be >= 0")
    if m == 0:
        return LatticeShell(0, np.zeros((1, 3), dtype=np.int64))
    if spec.rank == 0:
        return LatticeShell(m, np.zeros((0, 3), dtype=np.int64))
    pts = []
    rng = range(-m, m + 1)
    for combo in itertools.product(rng, repeat=spec.rank):
        if max(abs(c) for c in combo) == m:
            pts.append(combo + (0,) * (3 - spec.rank))
    return LatticeShell(m, np.array(pts, dtype=np.int64).reshape(-1, 3))


def sign_of(omega, spec: LatticeSpec) -> int:
    """Spin-structure weight (-1)^(sum of flagged coordinates)."""
    omega = np.asarray(omega, dtype=np.int64)
    total = 0
    for j, flag in enumerate(spec.anti_flags):
        if flag:
            total += int(omega[j])
    return -1 if total % 2 else 1


def _signs_of(points: np.ndarray, spec: LatticeSpec) -> np.ndarray:
    total = np.zeros(len(points), dtype=np.int64)
    for j, flag in enumerate(spec.anti_flags):
        if flag:
            total += points[:, j]
    return np.where(total % 2 == 0, 1.0, -1.0)


def _tail_term(m: np.ndarray, r: float, t: float, k: float) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    pref = max(k, np.sqrt(k)) / (2.0 * np.sqrt(np.pi * t)) ** 3
    card = (2.0 * m + 1.0) ** 3 - (2.0 * m - 1.0) ** 3
    bracket = (k * (r + m) / (2.0 * t) + 3.0 / (2.0 * t)
               + k * (r + m) ** 2 / (4.0 * t * t) + k)
    expo = -k * (m - r) ** 2 / (4.0 * t)
    gauss = np.where(expo >= -700.0, np.exp(expo), 0.0)
    return pref * card * bracket * gauss


def tail_bound(m_start: int, r: float, t: float,
               params: KernelParams) -> float:
    """Upper bound on the discarded kernel mass beyond shell ``m_start``.

    Sums the shell majorant (full rank-3 cardinality, which dominates the
    lower ranks) until terms drop below 1e-3 of the accumulated value, then
    closes the remainder with a geometric bound; the term ratio is
    decreasing in m once m exceeds r, so the closure is rigorous.
    """
    if t <= 0:
        raise ValueError("tail bound requires t > 0")
    if r < 0:
        raise ValueError("evaluation radius must be >= 0")
    if m_start <= r:
        raise ValueError(
            f"tail start m={m_start} must exceed evaluation radius r={r}")
    k = params.k
    total = 0.0
    m = m_start
    while True:
        a = float(_tail_term(m, r, t, k))
        total += a
        if a == 0.0:
            return total
        nxt = float(_tail_term(m + 1, r, t, k))
        if nxt < a and a < 1e-3 * total:
            ratio = nxt / a
            return total + nxt / (1.0 - ratio)
        m += 1
        if m - m_start > 100000:
            raise RuntimeError("tail bound failed to converge")


def _check_not_singular(x: np.ndarray, t: float, spec: LatticeSpec) -> None:
    if t != 0.0:
        return
    x = np.asarray(x, dtype=float)
    offsets = x.copy()
    for j in range(spec.rank):
        offsets[j] = x[j] - np.round(x[j])
    if np.linalg.norm(offsets) == 0.0:
        raise ValueError("kernel is singular at a lattice translate of the "
                         "space-time origin")


def periodized_solution_batch(points: np.ndarray, t: float,
                              params: KernelParams, spec: LatticeSpec,
                              target_tol: float):
    """Shell-summed periodized kernel for a batch of points at one time.

    Returns (values (n, 7), tail_estimate, shells_used); all points share
    the shell schedule, and the tail is bounded with the largest point
    radius.  Points are assumed non-singular.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if target_tol <= 0:
        raise ValueError("target tolerance must be positive")
    n = len(points)
    if t <= 0.0:
        return np.zeros((n, 7)), 0.0, 0
    if spec.rank == 0:
        return (fundamental_solution_array(points, np.full(n, t), params.k),
                0.0, 1)
    r = float(np.max(np.linalg.norm(points, axis=1)))
    value = np.zeros((n, 7))
    for m in range(MAX_SHELLS + 1):
        shell = shell_points(m, spec)
        if len(shell.points):
            signs = _signs_of(shell.points, spec)
            shifted = points[:, None, :] + shell.points[None, :, :]
            contrib = fundamental_solution_array(
                shifted, np.full(shifted.shape[:-1], t), params.k)
            value += np.einsum("j,ijc->ic", signs, contrib)
        if m + 1 > r:
            tail = tail_bound(m + 1, r, t, params)
            if tail < target_tol:
                return value, tail, m + 1
    raise RuntimeError(
        f"periodized kernel did not reach tolerance {target_tol} within "
        f"{MAX_SHELLS} shells")


def periodized_fundamental_solution(p: SpaceTimePoint, params: KernelParams,
                                    spec: LatticeSpec, target_tol: float):
    """Signed lattice periodization of the causal kernel at one point.

    Returns (value (7,), tail_estimate, shells_used).  Sums shells of
    increasing max-norm until the analytic tail bound drops below the
    requested tolerance; errors out at the shell cap.
    """
    x = np.asarray(p.x, dtype=float)
    _check_not_singular(x, p.t, spec)
    if spec.rank == 0:
        if p.t <= 0.0:
            return np.zeros(7), 0.0, 0
        return fundamental_solution(p, params), 0.0, 1
    values, tail, shells = periodized_solution_batch(
        x[None, :], p.t, params, spec, target_tol)
    return values[0], tail, shells


def brute_force_periodized(points: np.ndarray, t: float,
                           params: KernelParams, spec: LatticeSpec,
                           radius: int = 12):
    """Reference summation over every lattice point with max-norm <= radius.

    Returns (values, own_tail_bound); used to validate the shell-summed
    implementation against an independent enumeration.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(points)
    if t <= 0.0:
        return np.zeros((n, 7)), 0.0
    value = np.zeros((n, 7))
    for m in range(radius + 1):
        shell = shell_points(m, spec)
        if not len(shell.points):
            continue
        signs = _signs_of(shell.points, spec)
        shifted = points[:, None, :] + shell.points[None, :, :]
        contrib = fundamental_solution_array(
            shifted, np.full(shifted.shape[:-1], t), params.k)
        value += np.einsum("j,ijc->ic", signs, contrib)
    if spec.rank == 0:
        return value, 0.0
    r = float(np.max(np.linalg.norm(points, axis=1)))
    return value, tail_bound(radius + 1, r, t, params)
