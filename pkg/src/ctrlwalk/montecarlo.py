"""Trajectory sampling, hit-rate estimation, and barrier-entrance diagnostics.

Sampling is vectorized over trials with counter-based randomness: trial i,
step t always consumes the same uniform regardless of batch size or order,
so results are reproducible and shardable. One uniform drives each step:
[0, u) stays, [u, u + (1-u)/2) moves down, the rest moves up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dp import as_target
from .errors import ParameterError
from .policies import PolicySpec, control_values, flag_reset_times, horizon
from .rng import step_uniforms, trial_keys


def wilson_interval(k: int, m: int, z: float = 1.96) -> tuple[float, float]:
    """95% (by default) score interval for k successes out of m."""
    if m < 1:
        raise ParameterError("need at least one trial")
    p = k / m
    z2 = z * z
    denom = 1.0 + z2 / m
    center = (p + z2 / (2 * m)) / denom
    half = z * math.sqrt(p * (1.0 - p) / m + z2 / (4 * m * m)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass(frozen=True)
class BarrierFamily:
    """Nested space-time entrance sets over horizon n.

    Stage i (1-based) is the event |walk| <= radii[i-1] at a time in
    [band_starts[i-1], n]. Radii shrink by sqrt(2) per stage, to the nearest
    integer; bands cover the last 2^-i fraction of the horizon. N0 is the
    last stage whose unrounded radius still reaches the n^beta_exp window.
    """

    n: int
    beta_exp: float
    N0: int
    radii: tuple[int, ...]
    band_starts: tuple[int, ...]


def barrier_family(n: int, beta_exp: float = 0.0) -> BarrierFamily:
    n = int(n)
    beta_exp = float(beta_exp)
    if n < 2:
        raise ParameterError("horizon must be >= 2")
    if beta_exp < 0:
        raise ParameterError("beta_exp must be >= 0")
    window = float(n) ** beta_exp
    N0 = 0
    while math.sqrt(n / 2.0 ** (N0 + 1)) >= window:
        N0 += 1
    if N0 < 1:
        raise ParameterError(
            f"degenerate family: sqrt(n/2) = {math.sqrt(n / 2):.3g} below window {window:.3g}"
        )
    radii = tuple(int(math.floor(math.sqrt(n / 2.0**i) + 0.5)) for i in range(1, N0 + 1))
    band_starts = tuple(n - (n >> i) for i in range(1, N0 + 1))
    return BarrierFamily(n=n, beta_exp=beta_exp, N0=N0, radii=radii, band_starts=band_starts)


@dataclass(frozen=True)
class TrajectoryBatch:
    """Per-trial terminal sites (and stage entrance times when tracked)."""

    policy: PolicySpec
    n: int
    start: int
    trials: int
    seed: int
    final: np.ndarray
    entrances: np.ndarray | None = None
    family: BarrierFamily | None = None


def run_batch(
    policy: PolicySpec,
    n: int,
    start: int = 0,
    trials: int = 1,
    seed: int = 0,
    family: BarrierFamily | None = None,
    trial_base: int = 0,
) -> TrajectoryBatch:
    """Simulate `trials` walks for n steps; track barrier entrances if asked.

    Entrance times follow the strict chain rule: stage i can only be entered
    after stage i-1, at most one stage per time step, never at t=0. A -1 in
    the entrance table means the stage was not reached by time n.
    """
    if n < 0:
        raise ParameterError("n must be >= 0")
    if trials < 1:
        raise ParameterError("need at least one trial")
    hz = horizon(policy)
    if hz is not None and hz < n:
        raise ParameterError(f"policy horizon {hz} shorter than n={n}")

    keys = trial_keys(seed, trials, base=trial_base)
    x = np.full(trials, start, dtype=np.int64)
    flag = x == 0
    resets = set(flag_reset_times(policy))

    entr = None
    rad = bs = ptr0 = None
    if family is not None:
        if family.n != n:
            raise ParameterError(f"family horizon {family.n} != n={n}")
        entr = np.full((trials, family.N0), -1, dtype=np.int64)
        rad = np.asarray(family.radii, dtype=np.int64)
        bs = np.asarray(family.band_starts, dtype=np.int64)
        ptr0 = np.zeros(trials, dtype=np.int64)  # 0-based index of next stage

    for t in range(n):
        if t in resets:
            flag = x == 0
        u = control_values(policy, t, x, flag)
        r = step_uniforms(keys, t)
        stay = r < u
        down = ~stay & (r < u + (1.0 - u) * 0.5)
        x = x + np.where(stay, 0, np.where(down, -1, 1))
        flag = flag | (x == 0)
        if family is not None and t + 1 >= family.band_starts[0]:
            cl = np.minimum(ptr0, family.N0 - 1)
            enter = (ptr0 < family.N0) & (t + 1 >= bs[cl]) & (np.abs(x) <= rad[cl])
            idx = np.flatnonzero(enter)
            if idx.size:
                entr[idx, ptr0[idx]] = t + 1
                ptr0[idx] += 1

    return TrajectoryBatch(
        policy=policy,
        n=n,
        start=start,
        trials=trials,
        seed=seed,
        final=x,
        entrances=entr,
        family=family,
    )


def sample_path(
    policy: PolicySpec,
    n: int,
    start: int = 0,
    seed: int = 0,
    trial: int = 0,
    family: BarrierFamily | None = None,
):
    """One trajectory, step for step the same as trial `trial` of a batch.

    Returns (path, entrance_times); entrance_times is None unless a family
    is supplied, else an array with -1 for stages not reached by time n.
    """
    if n < 0:
        raise ParameterError("n must be >= 0")
    hz = horizon(policy)
    if hz is not None and hz < n:
        raise ParameterError(f"policy horizon {hz} shorter than n={n}")
    keys = trial_keys(seed, 1, base=trial)
    xv = np.full(1, start, dtype=np.int64)
    flag = xv == 0
    resets = set(flag_reset_times(policy))
    path = np.empty(n + 1, dtype=np.int64)
    path[0] = start

    entr = None
    ptr = 0
    if family is not None:
        if family.n != n:
            raise ParameterError(f"family horizon {family.n} != n={n}")
        entr = np.full(family.N0, -1, dtype=np.int64)

    for t in range(n):
        if t in resets:
            flag = xv == 0
        u = control_values(policy, t, xv, flag)
        r = step_uniforms(keys, t)
        stay = r < u
        down = ~stay & (r < u + (1.0 - u) * 0.5)
        xv = xv + np.where(stay, 0, np.where(down, -1, 1))
        flag = flag | (xv == 0)
        path[t + 1] = xv[0]
        if family is not None and ptr < family.N0:
            if t + 1 >= family.band_starts[ptr] and abs(int(xv[0])) <= family.radii[ptr]:
                entr[ptr] = t + 1
                ptr += 1

    return path, entr


@dataclass(frozen=True)
class HitEstimate:
    p_hat: float
    ci_low: float
    ci_high: float
    hits: int
    trials: int


def estimate_hit(
    policy: PolicySpec, n: int, start: int = 0, target=None, trials: int = 10000, seed: int = 0
) -> HitEstimate:
    lo, hi = as_target(target)
    batch = run_batch(policy, n, start=start, trials=trials, seed=seed)
    hits = int(np.count_nonzero((batch.final >= lo) & (batch.final <= hi)))
    ci_low, ci_high = wilson_interval(hits, trials)
    return HitEstimate(p_hat=hits / trials, ci_low=ci_low, ci_high=ci_high, hits=hits, trials=trials)


@dataclass(frozen=True)
class StageStats:
    """Entrance counts and escape frequencies for one barrier batch."""

    n: int
    beta_exp: float
    trials: int
    N0: int
    radii: tuple[int, ...]
    band_starts: tuple[int, ...]
    entered_strict: tuple[int, ...]  # per stage, trials with entrance time < n
    entered_by_n: tuple[int, ...]  # per stage, entrance time <= n
    cond_escape: tuple  # per stage i<N0: (frequency of no stage-(i+1) entry < n, ci_low, ci_high)
    min_cond_escape: float | None
    final_at_zero: int
    final_in_window: int
    violations_exact: int  # S_n = 0 but last stage never entered
    violations_window: int  # |S_n| <= n^beta but last stage never entered


def barrier_diagnostics(
    policy: PolicySpec,
    n: int,
    beta_exp: float = 0.0,
    trials: int = 10000,
    seed: int = 0,
    start: int = 0,
) -> StageStats:
    family = barrier_family(n, beta_exp)
    batch = run_batch(policy, n, start=start, trials=trials, seed=seed, family=family)
    entr = batch.entrances
    strict = entr >= 0
    strict &= entr < n
    by_n = entr >= 0

    entered_strict = tuple(int(np.count_nonzero(strict[:, i])) for i in range(family.N0))
    entered_by_n = tuple(int(np.count_nonzero(by_n[:, i])) for i in range(family.N0))

    cond = []
    min_escape = None
    for i in range(family.N0 - 1):
        m = entered_strict[i]
        if m == 0:
            cond.append((None, None, None))
            continue
        stopped = int(np.count_nonzero(strict[:, i] & ~strict[:, i + 1]))
        lo, hi = wilson_interval(stopped, m)
        f = stopped / m
        cond.append((f, lo, hi))
        min_escape = f if min_escape is None else min(min_escape, f)

    window = float(n) ** beta_exp
    in_window = np.abs(batch.final) <= window
    at_zero = batch.final == 0
    never_last = ~by_n[:, family.N0 - 1]

    return StageStats(
        n=n,
        beta_exp=beta_exp,
        trials=trials,
        N0=family.N0,
        radii=family.radii,
        band_starts=family.band_starts,
        entered_strict=entered_strict,
        entered_by_n=entered_by_n,
        cond_escape=tuple(cond),
        min_cond_escape=min_escape,
        final_at_zero=int(np.count_nonzero(at_zero)),
        final_in_window=int(np.count_nonzero(in_window)),
        violations_exact=int(np.count_nonzero(at_zero & never_last)),
        violations_window=int(np.count_nonzero(in_window & never_last)),
    )


@dataclass(frozen=True)
class EscapeProbeResult:
    q_cap: float
    h: int
    delta: float
    ell: int
    trials: int
    estimate: float
    ci_low: float
    ci_high: float
    hits: int
    stopped_within: int
    threshold: float
    violation: bool


def lemma0_check(
    q_cap: float, h: int, delta: float, ell: int, trials: int = 10000, seed: int = 0
) -> EscapeProbeResult:
    """Estimate the chance the lazy walk's first |.| >= h exit is upward and early.

    The probed event is {M_tau >= h, tau <= ell} with tau the first time
    |M| >= h under the constant-q_cap walk. Parameters must satisfy
    ell >= 24*h^2/delta and 1 - q_cap >= delta, which is the regime where
    the estimate should stay above 1/6.
    """
    h = int(h)
    ell = int(ell)
    delta = float(delta)
    if h < 1 or trials < 1:
        raise ParameterError("need h >= 1 and trials >= 1")
    if not (0.0 < delta <= 1.0):
        raise ParameterError(f"delta must lie in (0, 1], got {delta}")
    if ell < 24.0 * h * h / delta:
        raise ParameterError(
            f"horizon too short: ell={ell} violates ell >= 24*h^2/delta = {24.0 * h * h / delta:g}"
        )
    # slack of a few ulps so decimal inputs like q=0.9, delta=0.1 pass
    if 1.0 - q_cap < delta - 1e-12:
        raise ParameterError(
            f"variance floor broken: need 1 - q_cap >= delta, got 1-q_cap={1.0 - q_cap:g}"
        )

    keys = trial_keys(seed, trials)
    x = np.zeros(trials, dtype=np.int64)
    stopped = np.zeros(trials, dtype=bool)
    hit_top = np.zeros(trials, dtype=bool)
    thr_down = q_cap + (1.0 - q_cap) * 0.5
    for t in range(ell):
        r = step_uniforms(keys, t)
        stay = r < q_cap
        down = ~stay & (r < thr_down)
        move = np.where(stay, 0, np.where(down, -1, 1))
        x = x + np.where(stopped, 0, move)
        newly = ~stopped & (np.abs(x) >= h)
        hit_top |= newly & (x >= h)
        stopped |= newly
        if stopped.all():
            break

    hits = int(np.count_nonzero(hit_top))
    ci_low, ci_high = wilson_interval(hits, trials)
    return EscapeProbeResult(
        q_cap=q_cap,
        h=h,
        delta=delta,
        ell=ell,
        trials=trials,
        estimate=hits / trials,
        ci_low=ci_low,
        ci_high=ci_high,
        hits=hits,
        stopped_within=int(np.count_nonzero(stopped)),
        threshold=1.0 / 6.0,
        violation=ci_high < 1.0 / 6.0,
    )


@dataclass(frozen=True)
class ReturnProbeResult:
    q_cap: float
    A: int
    K: int
    trials: int
    starts: tuple[int, ...]
    contain: tuple[float, ...]  # per start, frequency of |S_horizon| <= K
    no_hit: tuple[float, ...]  # per start, frequency of never reaching 0
    band_exit: tuple[float, ...]  # per start, frequency of |S| >= K after reaching 0
    min_contain: float
    worst_start: int
    ci_low: float
    ci_high: float


def lemma_ori_check(
    q_cap: float, A: int, K: int, trials: int = 2000, seed: int = 0
) -> ReturnProbeResult:
    """Containment of the free-then-lazy walk, worst case over starts in [-2K, 2K].

    All starts share one stream of uniforms (common random numbers), so
    per-start curves are directly comparable. Besides terminal containment
    in [-K, K] after A*K^2 steps, the two failure channels are reported
    separately: never reaching 0 at all, and drifting back out to |x| >= K
    after reaching it.
    """
    A = int(A)
    K = int(K)
    if K < 1 or A < 1:
        raise ParameterError("need K >= 1 and A >= 1")
    if trials < 1:
        raise ParameterError("need at least one trial")
    steps = A * K * K
    starts = np.arange(-2 * K, 2 * K + 1, dtype=np.int64)

    keys = trial_keys(seed, trials)
    x = np.repeat(starts[:, None], trials, axis=1)
    flag = x == 0
    exited = np.zeros_like(flag)
    for t in range(steps):
        r = step_uniforms(keys, t)[None, :]
        u = np.where(flag, q_cap, 0.0)
        stay = r < u
        down = ~stay & (r < u + (1.0 - u) * 0.5)
        x = x + np.where(stay, 0, np.where(down, -1, 1))
        flag = flag | (x == 0)
        exited = exited | (flag & (np.abs(x) >= K))

    contain = (np.abs(x) <= K).mean(axis=1)
    no_hit = (~flag).mean(axis=1)
    band_exit = exited.mean(axis=1)
    worst = int(np.argmin(contain))
    k_worst = int(round(contain[worst] * trials))
    ci_low, ci_high = wilson_interval(k_worst, trials)
    return ReturnProbeResult(
        q_cap=q_cap,
        A=A,
        K=K,
        trials=trials,
        starts=tuple(int(s) for s in starts),
        contain=tuple(float(c) for c in contain),
        no_hit=tuple(float(c) for c in no_hit),
        band_exit=tuple(float(c) for c in band_exit),
        min_contain=float(contain[worst]),
        worst_start=int(starts[worst]),
        ci_low=ci_low,
        ci_high=ci_high,
    )
