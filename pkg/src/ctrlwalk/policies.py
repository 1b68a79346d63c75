"""Control policies: constant, zone-based, history-triggered, and schedules.

A policy maps (t, x, flag) to a stay probability in [0, q_cap]. The flag is
the one-bit visited-0 summary carried by the lattice distributions; only the
fast-until-zero kind reads it. Multiscale schedules glue these pieces over a
finite horizon.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AdmissibilityError, DegenerateScheduleError, ParameterError
from .lattice import FLOAT, HIT_ZERO, NOT_HIT, _as_mode_value, _zeros

CONSTANT = "constant"
TWO_ZONE = "two-zone"
FAST_UNTIL_ZERO = "fast-until-zero"
SCHEDULE = "schedule"
BANG_BANG_TABLE = "bang-bang-table"


@dataclass(frozen=True)
class PolicySpec:
    kind: str
    q_cap: float
    params: dict

    def __repr__(self):
        keys = {k: v for k, v in self.params.items() if k not in ("segments", "rows")}
        return f"PolicySpec({self.kind}, q_cap={self.q_cap}, {keys})"


@dataclass(frozen=True)
class ScheduleSegment:
    """Half-open step range [t_start, t_end) driven by one inner policy."""

    t_start: int
    t_end: int
    inner_policy: PolicySpec


def _check_cap(q_cap: float) -> float:
    q_cap = float(q_cap)
    if not (0.0 <= q_cap < 1.0):
        raise ParameterError(f"q_cap must lie in [0, 1), got {q_cap}")
    return q_cap


def constant_policy(q_cap: float, u_value: float) -> PolicySpec:
    """Same stay probability everywhere. u_value=0 is the simple walk."""
    q_cap = _check_cap(q_cap)
    u_value = float(u_value)
    if not (0.0 <= u_value <= q_cap):
        raise AdmissibilityError(f"u_value {u_value} escapes [0, {q_cap}]")
    return PolicySpec(CONSTANT, q_cap, {"u_value": u_value})


def two_zone_policy(q_cap: float, band_halfwidth: int) -> PolicySpec:
    """Slow (u=q_cap) at |x| <= band_halfwidth, free (u=0) outside."""
    q_cap = _check_cap(q_cap)
    band = int(band_halfwidth)
    if band < 0:
        raise ParameterError(f"band_halfwidth must be >= 0, got {band}")
    return PolicySpec(TWO_ZONE, q_cap, {"band_halfwidth": band})


def fast_until_zero_policy(q_cap: float) -> PolicySpec:
    """Free until the walk first reaches site 0, then lazy at q_cap forever."""
    q_cap = _check_cap(q_cap)
    return PolicySpec(FAST_UNTIL_ZERO, q_cap, {})


def schedule_policy(q_cap: float, segments: Sequence[ScheduleSegment]) -> PolicySpec:
    """Wrap a segment list into one policy over [0, t_end_of_last)."""
    q_cap = _check_cap(q_cap)
    segs = tuple(segments)
    if not segs:
        raise DegenerateScheduleError("empty schedule")
    prev_end = segs[0].t_start
    if prev_end != 0:
        raise DegenerateScheduleError(f"schedule starts at {prev_end}, expected 0")
    for seg in segs:
        if seg.t_start != prev_end:
            raise DegenerateScheduleError(
                f"gap or overlap at t={seg.t_start} (previous segment ends {prev_end})"
            )
        if seg.t_end <= seg.t_start:
            raise DegenerateScheduleError(f"empty segment [{seg.t_start}, {seg.t_end})")
        if seg.inner_policy.q_cap > q_cap:
            raise AdmissibilityError("inner policy exceeds the schedule cap")
        prev_end = seg.t_end
    return PolicySpec(SCHEDULE, q_cap, {"segments": segs})


def bang_bang_table_policy(q_cap: float, n: int, rows: Sequence[Sequence[tuple]]) -> PolicySpec:
    """Space-time table: rows[t] lists inclusive site intervals where u=q_cap.

    Intervals must be sorted and disjoint; everything else gets u=0. This is
    the output format of the exact optimizer.
    """
    q_cap = _check_cap(q_cap)
    n = int(n)
    if n < 1 or len(rows) != n:
        raise ParameterError(f"need one interval row per step, got {len(rows)} for n={n}")
    frozen_rows = []
    for t, row in enumerate(rows):
        prev = None
        clean = []
        for a, b in row:
            a, b = int(a), int(b)
            if a > b or (prev is not None and a <= prev):
                raise ParameterError(f"row {t} intervals not sorted/disjoint")
            clean.append((a, b))
            prev = b
        frozen_rows.append(tuple(clean))
    return PolicySpec(BANG_BANG_TABLE, q_cap, {"n": n, "rows": tuple(frozen_rows)})


def multiscale_localization_schedule(
    q_cap: float, alpha: float, beta: float, K0: int, T: int
) -> list[ScheduleSegment]:
    """Coarse-to-fine squeezing toward 0 over horizon T.

    The number of scales L is the largest integer with K0^2 * beta^(-2L) <= T.
    Phase [0, T_L) is constant-lazy at q_cap; phase [T_ell, T_{ell-1}) runs a
    two-zone policy whose band is the next-finer scale, floor(K0*beta^(1-ell)),
    with T_ell = floor(T - alpha*K0^2*sum_{i=1..ell} beta^(-2i)) and T_0 = T.
    Rounding slack lands in the earliest (longest) phase.
    """
    q_cap = _check_cap(q_cap)
    alpha = float(alpha)
    beta = float(beta)
    K0 = int(K0)
    T = int(T)
    if not (0.0 < beta < 1.0):
        raise ParameterError(f"beta must lie in (0, 1), got {beta}")
    if alpha <= 0 or K0 < 1:
        raise ParameterError("alpha must be > 0 and K0 >= 1")
    if T <= alpha * K0 * K0:
        raise ParameterError(f"horizon {T} too short: need T > alpha*K0^2")

    inv2 = (1.0 / beta) ** 2
    L = 0
    while K0 * K0 * inv2 ** (L + 1) <= T:
        L += 1
    if L < 1:
        raise DegenerateScheduleError(
            f"no usable scales: K0^2/beta^2 = {K0 * K0 * inv2:g} already exceeds T={T}"
        )

    breakpoints = [T]  # breakpoints[ell] = T_ell
    acc = 0.0
    for ell in range(1, L + 1):
        acc += inv2**ell
        breakpoints.append(math.floor(T - alpha * K0 * K0 * acc))
    if breakpoints[L] <= 0:
        raise DegenerateScheduleError(
            f"finest phase starts at T_{L}={breakpoints[L]} <= 0; lower alpha or L"
        )

    segments = []
    if breakpoints[L] > 0:
        segments.append(ScheduleSegment(0, breakpoints[L], constant_policy(q_cap, q_cap)))
    for ell in range(L, 0, -1):
        t0, t1 = breakpoints[ell], breakpoints[ell - 1]
        if t0 >= t1:
            continue
        band = math.floor(K0 * beta ** (1 - ell))
        segments.append(ScheduleSegment(t0, t1, two_zone_policy(q_cap, band)))
    return segments


def multiscale_qto1_schedule(q_cap: float, A: int, n: int) -> list[ScheduleSegment]:
    """Fine-to-coarse return schedule for very lazy caps over horizon n.

    L is the largest integer with A*4^L <= n. Working back from the end,
    phase ell covers [T_ell, T_{ell-1}) with T_ell = n - A*(4 + ... + 4^ell+1)
    summed geometrically and clamped at 0, T_{-1} = n; each phase runs free
    until hitting 0 and then stays lazy at q_cap. Any steps before the last
    phase that reaches time 0 form a free (u=0) prefix.
    """
    q_cap = _check_cap(q_cap)
    A = int(A)
    n = int(n)
    if A < 1:
        raise ParameterError(f"A must be >= 1, got {A}")
    if n <= A:
        raise DegenerateScheduleError(f"horizon n={n} must exceed A={A}")

    L = 0
    while A * 4 ** (L + 1) <= n:
        L += 1

    # T_ell for ell = 0..L, exact integers, truncated at 0
    breakpoints = [max(n - A * (4 ** (ell + 1) - 1) // 3, 0) for ell in range(L + 1)]

    segments = []
    if breakpoints[L] > 0:
        segments.append(ScheduleSegment(0, breakpoints[L], constant_policy(q_cap, 0.0)))
    for ell in range(L, -1, -1):
        t0 = breakpoints[ell]
        t1 = breakpoints[ell - 1] if ell > 0 else n
        if t0 >= t1:
            continue
        segments.append(ScheduleSegment(t0, t1, fast_until_zero_policy(q_cap)))
    if not segments:
        raise DegenerateScheduleError("schedule collapsed to nothing")
    return segments


def horizon(policy: PolicySpec) -> int | None:
    """Last valid step + 1 for finite-horizon kinds, None for homogeneous ones."""
    if policy.kind == SCHEDULE:
        return policy.params["segments"][-1].t_end
    if policy.kind == BANG_BANG_TABLE:
        return policy.params["n"]
    return None


def flag_reset_times(policy: PolicySpec) -> tuple[int, ...]:
    """Times at which evolution drivers must restart the visited-0 flag.

    Each schedule segment whose inner policy reads the flag measures hitting
    times from its own start, so the flag is reset there (t=0 needs none:
    fresh distributions already carry correct flags).
    """
    if policy.kind != SCHEDULE:
        return ()
    times = [
        seg.t_start
        for seg in policy.params["segments"]
        if seg.inner_policy.kind == FAST_UNTIL_ZERO and seg.t_start > 0
    ]
    return tuple(times)


def _check_horizon(policy: PolicySpec, t: int):
    hz = horizon(policy)
    if hz is not None and not (0 <= t < hz):
        raise ParameterError(f"step {t} outside policy horizon [0, {hz})")


def _segment_at(policy: PolicySpec, t: int) -> ScheduleSegment:
    segs = policy.params["segments"]
    starts = [s.t_start for s in segs]
    i = bisect_right(starts, t) - 1
    return segs[i]


def evaluate(policy: PolicySpec, t: int, x: int, flag: int = NOT_HIT) -> float:
    """Control value at one space-time cell. Pure and deterministic."""
    _check_horizon(policy, t)
    kind = policy.kind
    if kind == CONSTANT:
        return policy.params["u_value"]
    if kind == TWO_ZONE:
        return policy.q_cap if abs(x) <= policy.params["band_halfwidth"] else 0.0
    if kind == FAST_UNTIL_ZERO:
        return policy.q_cap if flag == HIT_ZERO else 0.0
    if kind == SCHEDULE:
        return evaluate(_segment_at(policy, t).inner_policy, t, x, flag)
    if kind == BANG_BANG_TABLE:
        for a, b in policy.params["rows"][t]:
            if a <= x <= b:
                return policy.q_cap
            if x < a:
                break
        return 0.0
    raise ParameterError(f"unknown policy kind {kind!r}")


def control_grid(policy: PolicySpec, t: int, offset: int, width: int, mode: str = FLOAT) -> np.ndarray:
    """Vectorized evaluate over a window: (2, width) array, row per flag."""
    _check_horizon(policy, t)
    kind = policy.kind
    if kind == SCHEDULE:
        return control_grid(_segment_at(policy, t).inner_policy, t, offset, width, mode)

    u = _zeros((2, width), mode)
    cap = _as_mode_value(policy.q_cap, mode)
    if kind == CONSTANT:
        u[...] = _as_mode_value(policy.params["u_value"], mode)
    elif kind == TWO_ZONE:
        band = policy.params["band_halfwidth"]
        lo = max(-band, offset)
        hi = min(band, offset + width - 1)
        if lo <= hi:
            u[:, lo - offset : hi - offset + 1] = cap
    elif kind == FAST_UNTIL_ZERO:
        u[HIT_ZERO, :] = cap
    elif kind == BANG_BANG_TABLE:
        for a, b in policy.params["rows"][t]:
            lo = max(a, offset)
            hi = min(b, offset + width - 1)
            if lo <= hi:
                u[:, lo - offset : hi - offset + 1] = cap
    else:
        raise ParameterError(f"unknown policy kind {kind!r}")
    return u


def control_values(policy: PolicySpec, t: int, x: np.ndarray, flag: np.ndarray) -> np.ndarray:
    """Vectorized evaluate for samplers: u per trial given site/flag arrays."""
    _check_horizon(policy, t)
    kind = policy.kind
    if kind == SCHEDULE:
        return control_values(_segment_at(policy, t).inner_policy, t, x, flag)
    if kind == CONSTANT:
        return np.full(x.shape, policy.params["u_value"])
    if kind == TWO_ZONE:
        band = policy.params["band_halfwidth"]
        return np.where(np.abs(x) <= band, policy.q_cap, 0.0)
    if kind == FAST_UNTIL_ZERO:
        return np.where(flag, policy.q_cap, 0.0)
    if kind == BANG_BANG_TABLE:
        # the stay region can hold O(n) intervals (parity combs), so build a
        # dense row mask once and gather instead of testing every interval
        # against every trial
        n = policy.params["n"]
        dense = np.zeros(2 * n + 3, dtype=bool)
        for a, b in policy.params["rows"][t]:
            lo = max(a, -n - 1)
            hi = min(b, n + 1)
            if lo <= hi:
                dense[lo + n + 1 : hi + n + 2] = True
        hit = np.zeros(x.shape, dtype=bool)
        inside = np.abs(x) <= n + 1
        hit[inside] = dense[x[inside].astype(np.int64) + n + 1]
        return np.where(hit, policy.q_cap, 0.0)
    raise ParameterError(f"unknown policy kind {kind!r}")


def policy_to_json(policy: PolicySpec) -> dict:
    obj = {"kind": policy.kind, "q_cap": policy.q_cap}
    if policy.kind == SCHEDULE:
        obj["segments"] = [
            {
                "t_start": s.t_start,
                "t_end": s.t_end,
                "inner": policy_to_json(s.inner_policy),
            }
            for s in policy.params["segments"]
        ]
    elif policy.kind == BANG_BANG_TABLE:
        obj["n"] = policy.params["n"]
        obj["rows"] = [[[a, b] for a, b in row] for row in policy.params["rows"]]
    else:
        obj.update(policy.params)
    return obj


def policy_from_json(obj: dict) -> PolicySpec:
    kind = obj.get("kind")
    q_cap = obj["q_cap"]
    if kind == CONSTANT:
        return constant_policy(q_cap, obj["u_value"])
    if kind == TWO_ZONE:
        return two_zone_policy(q_cap, obj["band_halfwidth"])
    if kind == FAST_UNTIL_ZERO:
        return fast_until_zero_policy(q_cap)
    if kind == SCHEDULE:
        segs = [
            ScheduleSegment(s["t_start"], s["t_end"], policy_from_json(s["inner"]))
            for s in obj["segments"]
        ]
        return schedule_policy(q_cap, segs)
    if kind == BANG_BANG_TABLE:
        return bang_bang_table_policy(q_cap, obj["n"], obj["rows"])
    raise ParameterError(f"unknown policy kind {kind!r}")
