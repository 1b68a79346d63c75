"""Exact forward evolution and extremal backward recursion.

Forward: iterate the one-step kernel under a fixed policy to get the exact
law at time n. Backward: dynamic programming for the best (or worst)
probability of finishing inside a target interval over all controls capped
at q_cap. The one-step objective is affine in the control, so the optimum
sits at an endpoint {0, q_cap}; the solver records where the cap is chosen.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .lattice import (
    FLOAT,
    AugmentedDistribution,
    ControlRow,
    interval_mass,
    point_mass,
    reset_hit_flags,
    step_distribution,
)
from .policies import PolicySpec, bang_bang_table_policy, control_grid, flag_reset_times, horizon

MAX = "max"
MIN = "min"


def as_target(target) -> tuple[int, int]:
    """Normalize a target spec to an inclusive site interval (lo, hi)."""
    if target is None:
        return (0, 0)
    if isinstance(target, int):
        return (target, target)
    lo, hi = int(target[0]), int(target[1])
    if lo > hi:
        raise ParameterError(f"empty target interval [{lo}, {hi}]")
    return (lo, hi)


def evolve_trace(policy: PolicySpec, n: int, start: int = 0, mode: str = FLOAT):
    """Yield the law at times 0..n under the policy (n+1 distributions)."""
    if n < 0:
        raise ParameterError("n must be >= 0")
    hz = horizon(policy)
    if hz is not None and hz < n:
        raise ParameterError(f"policy horizon {hz} shorter than n={n}")
    resets = set(flag_reset_times(policy))
    d = point_mass(start, mode=mode)
    yield d
    for t in range(n):
        if t in resets:
            d = reset_hit_flags(d)
        u = control_grid(policy, t, d.offset, d.width, mode)
        d = step_distribution(d, ControlRow(time=t, offset=d.offset, u=u, q_cap=policy.q_cap))
        yield d


def evolve(policy: PolicySpec, n: int, start: int = 0, mode: str = FLOAT) -> AugmentedDistribution:
    """Exact law of the walk after n steps from start under the policy."""
    for d in evolve_trace(policy, n, start, mode):
        pass
    return d


def hit_probability(policy: PolicySpec, n: int, start: int = 0, target=None) -> float:
    lo, hi = as_target(target)
    return float(interval_mass(evolve(policy, n, start), lo, hi))


@dataclass(frozen=True)
class ValueTable:
    """Extremal probabilities V_t(x) of ending in the target, on [-n, n].

    values holds all time slices as an (n+1, 2n+1) array when the solve kept
    them, otherwise only the t=0 slice (v0) is available.
    """

    n: int
    q_cap: float
    objective: str
    target: tuple[int, int]
    v0: np.ndarray
    values: np.ndarray | None = None

    def value(self, t: int, x: int) -> float:
        if abs(x) > self.n:
            return 0.0
        j = x + self.n
        if t == 0:
            return float(self.v0[j])
        if self.values is None:
            raise ParameterError("solve was run without keep_values; only t=0 is stored")
        if not (0 <= t <= self.n):
            raise ParameterError(f"t={t} outside [0, {self.n}]")
        return float(self.values[t, j])


@dataclass(frozen=True)
class BangBangPolicy:
    """Where the extremal control picks the cap: per-t inclusive intervals."""

    n: int
    q_cap: float
    objective: str
    rows: tuple

    def as_policy(self) -> PolicySpec:
        return bang_bang_table_policy(self.q_cap, self.n, self.rows)


def _mask_to_intervals(mask: np.ndarray, offset: int) -> tuple:
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return ()
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks, [idx.size - 1]))
    return tuple((int(idx[s]) + offset, int(idx[e]) + offset) for s, e in zip(starts, ends))


def solve_extremal(
    q_cap: float,
    n: int,
    objective: str = MAX,
    target=None,
    keep_values: bool = True,
) -> tuple[ValueTable, BangBangPolicy]:
    """Backward recursion for sup/inf of P(S_n in target) over capped controls.

    V_t(x) = ext over u in [0, q_cap] of
        u * V_{t+1}(x) + (1-u)/2 * (V_{t+1}(x-1) + V_{t+1}(x+1)).
    Affinity in u puts the extremum at u in {0, q_cap}; exact ties go to
    u = 0, which keeps the recorded region minimal and reproducible.
    """
    q_cap = float(q_cap)
    if not (0.0 <= q_cap < 1.0):
        raise ParameterError(f"q_cap must lie in [0, 1), got {q_cap}")
    n = int(n)
    if n < 1:
        raise ParameterError("n must be >= 1")
    if objective not in (MAX, MIN):
        raise ParameterError(f"objective must be {MAX!r} or {MIN!r}")
    lo, hi = as_target(target)

    width = 2 * n + 1
    vnext = np.zeros(width)
    vnext[max(lo, -n) + n : min(hi, n) + n + 1] = 1.0
    values = None
    if keep_values:
        values = np.zeros((n + 1, width))
        values[n] = vnext

    scale = (1.0 - q_cap) * 0.5
    pad = np.zeros(width + 2)
    rows = [()] * n
    for t in range(n - 1, -1, -1):
        pad[1:-1] = vnext
        nb = pad[:-2] + pad[2:]  # V(x-1) + V(x+1), fixed order
        v0 = nb * 0.5
        vq = nb * scale + vnext * q_cap
        mask = (vq > v0) if objective == MAX else (vq < v0)
        vnext = np.where(mask, vq, v0)
        rows[t] = _mask_to_intervals(mask, -n)
        if keep_values:
            values[t] = vnext

    table = ValueTable(
        n=n, q_cap=q_cap, objective=objective, target=(lo, hi), v0=vnext, values=values
    )
    bb = BangBangPolicy(n=n, q_cap=q_cap, objective=objective, rows=tuple(rows))
    return table, bb


def extract_region(bb: BangBangPolicy) -> dict:
    """Region as per-t intervals plus the outermost radius per time slice.

    boundary[t] is max(|x|) over the row's cells, or -1 for an empty row.
    """
    boundary = []
    for t, row in enumerate(bb.rows):
        r = -1
        for a, b in row:
            r = max(r, abs(a), abs(b))
        boundary.append((t, r))
    return {
        "n": bb.n,
        "q_cap": bb.q_cap,
        "objective": bb.objective,
        "intervals": [[[a, b] for a, b in row] for row in bb.rows],
        "boundary": boundary,
    }


def value_table_to_csv(table: ValueTable, fh, cutoff: int | None = None) -> int:
    """Write (t, x, value) rows with |x| <= cutoff; returns the row count."""
    if table.values is None:
        raise ParameterError("value export needs keep_values=True")
    cutoff = table.n if cutoff is None else int(cutoff)
    writer = csv.writer(fh)
    writer.writerow(["t", "x", "value"])
    count = 0
    for t in range(table.n + 1):
        for x in range(-cutoff, cutoff + 1):
            writer.writerow([t, x, repr(table.values[t, x + table.n])])
            count += 1
    return count


def boundary_to_csv(bb: BangBangPolicy, fh) -> int:
    writer = csv.writer(fh)
    writer.writerow(["t", "max_radius"])
    for t, r in extract_region(bb)["boundary"]:
        writer.writerow([t, r])
    return bb.n
