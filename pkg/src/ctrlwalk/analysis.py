"""Exponent estimation, two-zone chain structure checks, and calibrations.

The localization story is quantitative: hit probabilities decay like a
power of the horizon. This module fits those exponents from exact or
sampled curves, verifies the algebraic structure the two-zone construction
relies on (reversibility, heat-kernel flatness), and searches for concrete
parameter witnesses for the band-sum and exit/containment inequalities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.stats import binom

from . import defaults
from .dp import MAX, MIN, hit_probability, solve_extremal
from .errors import CalibrationError, ParameterError
from .lattice import (
    FLOAT,
    RATIONAL,
    ControlRow,
    interval_mass,
    point_mass,
    step_distribution,
)
from .montecarlo import estimate_hit
from .policies import (
    PolicySpec,
    constant_policy,
    control_grid,
    fast_until_zero_policy,
    multiscale_localization_schedule,
    multiscale_qto1_schedule,
    schedule_policy,
    two_zone_policy,
)

# ---------------------------------------------------------------------------
# power-law exponent fitting


@dataclass(frozen=True)
class ExponentFit:
    points: tuple  # (n, p) pairs actually used
    sigma_hat: float
    intercept: float
    r_squared: float
    residuals: tuple
    min_n: int  # exclusion cutoff applied to the input
    n_min: int  # smallest n used
    n_max: int  # largest n used


def fit_exponent(points, min_n: int = defaults.MIN_FIT_N) -> ExponentFit:
    """Least squares of log p against log n; sigma_hat is minus the slope.

    Points with n below min_n are dropped before fitting (pre-asymptotic
    transients bias the slope); the cutoff is recorded in the result.
    """
    pts = [(int(n), float(p)) for n, p in points]
    if len(pts) < 3:
        raise ParameterError("need at least 3 points")
    for (n1, _), (n2, _) in zip(pts, pts[1:]):
        if n2 <= n1:
            raise ParameterError("n values must be strictly increasing")
    for n, p in pts:
        if p <= 0:
            raise ParameterError(
                f"p={p} at n={n} is not positive; check target parity before fitting"
            )
    kept = [(n, p) for n, p in pts if n >= min_n]
    if len(kept) < 3:
        raise ParameterError(f"only {len(kept)} points at n >= {min_n}; need 3")

    x = np.log([n for n, _ in kept])
    y = np.log([p for _, p in kept])
    xc = x - x.mean()
    yc = y - y.mean()
    slope = float(np.dot(xc, yc) / np.dot(xc, xc))
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    ss_res = float(np.dot(resid, resid))
    ss_tot = float(np.dot(yc, yc))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return ExponentFit(
        points=tuple(kept),
        sigma_hat=-slope + 0.0,
        intercept=intercept,
        r_squared=r2,
        residuals=tuple(float(r) for r in resid),
        min_n=min_n,
        n_min=kept[0][0],
        n_max=kept[-1][0],
    )


SWEEP_KINDS = (
    "constant",
    "two-zone",
    "fast-until-zero",
    "schedule-localization",
    "schedule-qto1",
    "optimal",
)


def sweep_policy(policy_kind: str, q_cap: float, n: int, params: dict) -> PolicySpec:
    """Builtin policy for one sweep point; schedule kinds scale with n."""
    if policy_kind == "constant":
        return constant_policy(q_cap, params.get("u_value", q_cap))
    if policy_kind == "two-zone":
        band = params.get("band", max(1, int(0.5 * math.sqrt(n))))
        return two_zone_policy(q_cap, band)
    if policy_kind == "fast-until-zero":
        return fast_until_zero_policy(q_cap)
    if policy_kind == "schedule-localization":
        segs = multiscale_localization_schedule(
            q_cap,
            params.get("alpha", defaults.LOC_ALPHA),
            params.get("beta", defaults.LOC_BETA),
            params.get("K0", defaults.LOC_K0),
            n,
        )
        return schedule_policy(q_cap, segs)
    if policy_kind == "schedule-qto1":
        segs = multiscale_qto1_schedule(q_cap, params.get("A", defaults.QTO1_A), n)
        return schedule_policy(q_cap, segs)
    raise ParameterError(f"unknown sweep policy kind {policy_kind!r}")


def _sweep_point(policy_kind: str, q_cap: float, n: int, method: str, params: dict) -> dict:
    rec = {
        "policy_kind": policy_kind,
        "q": q_cap,
        "n": n,
        "method": method,
        "ci_low": None,
        "ci_high": None,
    }
    if policy_kind == "optimal":
        objective = params.get("objective", MAX)
        table, bb = solve_extremal(q_cap, n, objective, keep_values=False)
        if method == "exact":
            rec["p"] = float(table.value(0, 0))
            return rec
        pol = bb.as_policy()
    else:
        pol = sweep_policy(policy_kind, q_cap, n, params)

    if method == "exact":
        rec["p"] = hit_probability(pol, n)
    elif method == "mc":
        est = estimate_hit(
            pol,
            n,
            trials=params.get("trials", 10000),
            seed=params.get("seed", 0) + n,
        )
        rec["p"] = est.p_hat
        rec["ci_low"] = est.ci_low
        rec["ci_high"] = est.ci_high
    else:
        raise ParameterError(f"method must be 'exact' or 'mc', got {method!r}")
    return rec


def exponent_sweep(
    policy_kind: str,
    q_cap: float,
    n_grid,
    method: str = "exact",
    params: dict | None = None,
    threads: int = 1,
    min_n: int | None = None,
) -> tuple[list[dict], ExponentFit]:
    """Hit probability per n plus the power-law fit over the grid."""
    params = dict(params or {})
    n_grid = [int(n) for n in n_grid]
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = {n: pool.submit(_sweep_point, policy_kind, q_cap, n, method, params) for n in n_grid}
            records = [futs[n].result() for n in n_grid]
    else:
        records = [_sweep_point(policy_kind, q_cap, n, method, params) for n in n_grid]
    kwargs = {} if min_n is None else {"min_n": min_n}
    fit = fit_exponent([(r["n"], r["p"]) for r in records], **kwargs)
    return records, fit


# ---------------------------------------------------------------------------
# two-zone chain structure


@dataclass(frozen=True)
class ChainSpec:
    """Conductance description of the two-zone kernel.

    Unit edge weights everywhere, a self-loop of weight 2q/(1-q) inside the
    band. The induced reversing measure is 2/(1-q) inside and 2 outside,
    and weight/measure ratios reproduce the policy kernel.
    """

    q_cap: float
    band_halfwidth: int
    mode: str = FLOAT

    def _q(self):
        return Fraction(self.q_cap) if self.mode == RATIONAL else float(self.q_cap)

    def _inside(self, x: int) -> bool:
        return abs(x) <= self.band_halfwidth

    def weight(self, x: int, y: int):
        one = Fraction(1) if self.mode == RATIONAL else 1.0
        if abs(x - y) == 1:
            return one
        if x == y and self._inside(x):
            q = self._q()
            return 2 * q / (1 - q)
        return 0 * one

    def pi(self, x: int):
        q = self._q()
        two = Fraction(2) if self.mode == RATIONAL else 2.0
        return two / (1 - q) if self._inside(x) else two

    def kernel(self, x: int, y: int):
        """One-step transition probability from the policy's definition."""
        q = self._q()
        zero = Fraction(0) if self.mode == RATIONAL else 0.0
        u = q if self._inside(x) else zero
        if y == x:
            return u
        if abs(y - x) == 1:
            half = Fraction(1, 2) if self.mode == RATIONAL else 0.5
            return (1 - u) * half
        return zero


def reversibility_check(chain: ChainSpec, K_window: int):
    """Max |pi(x) k(x,y) - pi(y) k(y,x)| over pairs inside [-K, K]."""
    worst = Fraction(0) if chain.mode == RATIONAL else 0.0
    for x in range(-K_window, K_window + 1):
        for y in (x, x + 1):
            if y > K_window:
                continue
            r = chain.pi(x) * chain.kernel(x, y) - chain.pi(y) * chain.kernel(y, x)
            r = abs(r)
            if r > worst:
                worst = r
    return worst


def heat_kernel_profile(chain: ChainSpec, t_grid, x_probe_set=None) -> dict:
    """sup over probes x and all y of p^t(x,y)*sqrt(t), per grid time.

    Returns per-t suprema, the running max, and the final running max as an
    empirical bound constant. Exact evolution under the matching two-zone
    policy; use even t to dodge parity oscillation.
    """
    t_grid = sorted({int(t) for t in t_grid})
    if not t_grid or t_grid[0] < 1:
        raise ParameterError("t_grid must contain positive times")
    if x_probe_set is None:
        b = chain.band_halfwidth
        x_probe_set = tuple(sorted({f * b for f in defaults.HK_PROBE_FACTORS}))
    pol = two_zone_policy(chain.q_cap, chain.band_halfwidth)
    tmax = t_grid[-1]
    grid = set(t_grid)
    sup = {t: 0.0 for t in t_grid}
    for x0 in x_probe_set:
        d = point_mass(int(x0))
        for t in range(1, tmax + 1):
            u = control_grid(pol, t - 1, d.offset, d.width)
            d = step_distribution(d, ControlRow(time=t - 1, offset=d.offset, u=u, q_cap=pol.q_cap))
            if t in grid:
                peak = float(d.site_mass().max()) * math.sqrt(t)
                if peak > sup[t]:
                    sup[t] = peak

    per_t = [(t, sup[t]) for t in t_grid]
    running = []
    best = 0.0
    for t, v in per_t:
        best = max(best, v)
        running.append((t, best))
    return {
        "per_t": per_t,
        "running_max": running,
        "bound_estimate": best,
        "probes": tuple(int(x) for x in x_probe_set),
    }


# ---------------------------------------------------------------------------
# band-sum calibration (two-zone chain)


def band_sum_profile(q_cap: float, K: int, band: int, t: int, ys) -> dict:
    """sum over x in [-K, K] of P_x(walk at y at time t), via reversibility.

    Detailed balance turns the column sum into a single evolution from y:
        (1/(1-q)) * [P_y(in [-K, K]) - q * P_y(in [-band, band])].
    """
    pol = two_zone_policy(q_cap, band)
    out = {}
    for y in ys:
        d = point_mass(int(y))
        for s in range(t):
            u = control_grid(pol, s, d.offset, d.width)
            d = step_distribution(d, ControlRow(time=s, offset=d.offset, u=u, q_cap=q_cap))
        m_outer = float(interval_mass(d, -K, K))
        m_band = float(interval_mass(d, -band, band))
        out[int(y)] = (m_outer - q_cap * m_band) / (1.0 - q_cap)
    return out


def band_sum_direct(q_cap: float, K: int, band: int, t: int, ys) -> dict:
    """Same column sums by brute force: one evolution per start x in [-K, K]."""
    pol = two_zone_policy(q_cap, band)
    ys = [int(y) for y in ys]
    total = {y: 0.0 for y in ys}
    for x in range(-K, K + 1):
        d = point_mass(x)
        for s in range(t):
            u = control_grid(pol, s, d.offset, d.width)
            d = step_distribution(d, ControlRow(time=s, offset=d.offset, u=u, q_cap=q_cap))
        for y in ys:
            total[y] += float(d.mass_at(y))
    return total


def calibrate_lemma5(
    q_cap: float,
    alphas=defaults.L5_ALPHAS,
    betas=defaults.L5_BETAS,
    K0s=defaults.L5_K0S,
) -> dict:
    """Search (alpha, beta, K0) making every band-sum exceed 1 + eps.

    Scales K0, 2*K0, 4*K0 are checked with band floor(beta*K) and horizon
    round(alpha*K^2), over every target y in the band. First candidate whose
    worst margin is positive wins; eps is 90% of that margin. The returned
    certificate carries every evaluated sum for bit-exact replay.
    """
    if not (0.0 < q_cap < 1.0):
        raise ParameterError(f"q_cap must lie in (0, 1), got {q_cap}")
    best_margin = -math.inf
    best_candidate = None
    for K0 in K0s:
        for beta in betas:
            for alpha in alphas:
                entries = []
                margin = math.inf
                for K in (K0, 2 * K0, 4 * K0):
                    band = int(math.floor(beta * K))
                    t = int(round(alpha * K * K))
                    ys = range(-band, band + 1)
                    sums = band_sum_profile(q_cap, K, band, t, ys)
                    for y, s in sums.items():
                        entries.append({"K": K, "band": band, "t": t, "y": y, "sum": s})
                        margin = min(margin, s - 1.0)
                if margin > best_margin:
                    best_margin = margin
                    best_candidate = (alpha, beta, K0)
                if margin > 0:
                    return {
                        "q_cap": q_cap,
                        "alpha": alpha,
                        "beta": beta,
                        "K0": K0,
                        "eps": 0.9 * margin,
                        "min_margin": margin,
                        "entries": entries,
                    }
    raise CalibrationError(
        f"no candidate produced positive margin; best was {best_margin:.4g} at "
        f"(alpha, beta, K0) = {best_candidate}"
    )


def verify_lemma5_certificate(cert: dict) -> dict:
    """Replay every certificate sum and compare bitwise; also re-check eps."""
    groups = {}
    for e in cert["entries"]:
        groups.setdefault((e["K"], e["band"], e["t"]), []).append(e)
    max_diff = 0.0
    all_exceed = True
    for (K, band, t), entries in groups.items():
        fresh = band_sum_profile(cert["q_cap"], K, band, t, [e["y"] for e in entries])
        for e in entries:
            diff = abs(fresh[e["y"]] - e["sum"])
            max_diff = max(max_diff, diff)
            if not fresh[e["y"]] > 1.0 + cert["eps"]:
                all_exceed = False
    return {"max_diff": max_diff, "all_exceed": all_exceed, "entries": len(cert["entries"])}


# ---------------------------------------------------------------------------
# exit/containment calibration (free escape, lazy containment)


def level_hit_cdf(a: int, t: int) -> float:
    """P(simple walk from 0 reaches level a within t steps), by reflection."""
    a = int(a)
    t = int(t)
    if a < 1:
        raise ParameterError("level must be >= 1")
    if t < a:
        return 0.0
    m = t + a
    if m % 2 == 0:
        k = m // 2
        return float(2.0 * binom.sf(k - 1, t, 0.5) - binom.pmf(k, t, 0.5))
    return float(2.0 * binom.sf(m // 2, t, 0.5))


def interior_survival(q_cap: float, K: int, s: int) -> float:
    """P(lazy-q walk from 0 stays strictly inside (-K, K) for s steps).

    Spectral sum over the Dirichlet modes of the path on 2K-1 interior
    sites: eigenvalues q + (1-q) cos(pi j / 2K), eigenvectors
    sin(pi j (x+K) / 2K), started from the delta at 0.
    """
    K = int(K)
    s = int(s)
    if K < 1:
        raise ParameterError("K must be >= 1")
    if s <= 0:
        return 1.0
    j = np.arange(1, 2 * K, dtype=np.float64)
    lam = q_cap + (1.0 - q_cap) * np.cos(np.pi * j / (2 * K))
    x = np.arange(-K + 1, K, dtype=np.float64)
    phi = np.sin(np.pi * j[:, None] * (x[None, :] + K) / (2 * K))
    phi0 = np.sin(np.pi * j * 0.5)  # eigenvector at the start site 0
    colsum = phi.sum(axis=1)
    with np.errstate(divide="ignore"):
        loglam = np.log(np.abs(lam))
    mag = np.where(np.abs(lam) > 0.0, np.exp(s * loglam), 0.0)
    sign = np.where(lam < 0.0, -1.0 if s % 2 else 1.0, 1.0)
    return float(np.sum(mag * sign * phi0 * colsum) / K)


def level_hit_cdf_absorbing(a: int, t: int) -> float:
    """Dual route for level_hit_cdf: evolve with a frozen site at +a."""
    pol = constant_policy(0.0, 0.0)
    d = point_mass(0)
    for s in range(t):
        u = control_grid(pol, s, d.offset, d.width)
        frozen = d.sites >= a
        d = step_distribution(
            d, ControlRow(time=s, offset=d.offset, u=u, q_cap=0.0), frozen=frozen
        )
    return float(interval_mass(d, a, a))


def interior_survival_absorbing(q_cap: float, K: int, s: int) -> float:
    """Dual route for interior_survival: freeze all mass at |x| >= K."""
    pol = constant_policy(q_cap, q_cap)
    d = point_mass(0)
    for t in range(s):
        u = control_grid(pol, t, d.offset, d.width)
        frozen = np.abs(d.sites) >= K
        d = step_distribution(
            d, ControlRow(time=t, offset=d.offset, u=u, q_cap=q_cap), frozen=frozen
        )
    return float(interval_mass(d, -K + 1, K - 1))


def escape_probability(A: int, K: int) -> float:
    """P(free walk has NOT reached level 2K within A*K^2 steps)."""
    return 1.0 - level_hit_cdf(2 * K, A * K * K)


def early_exit_probability(q_cap: float, A: int, K: int) -> float:
    """P(lazy-q walk from 0 hits -K or +K strictly before A*K^2 steps)."""
    return 1.0 - interior_survival(q_cap, K, A * K * K - 1)


def calibrate_lemma6(
    eps: float,
    Ks=defaults.L6_KS,
    max_A_doublings: int = defaults.L6_MAX_A_DOUBLINGS,
    max_q_levels: int = defaults.L6_MAX_Q_LEVELS,
) -> dict:
    """Find (A, q) with free escape and lazy early-exit both below eps/2.

    A doubles from 1 until the no-return probability P(level 2K unreached by
    A*K^2) clears eps/2 at every K; then q walks the dyadic grid 1 - 2^-j
    until the early-exit probability P(hit +-K before A*K^2) clears eps/2 at
    every K. Both stages use exact closed forms of the respective walks.
    """
    if not (0.0 < eps < 1.0):
        raise ParameterError(f"eps must lie in (0, 1), got {eps}")
    Ks = tuple(int(K) for K in Ks)

    A = None
    escape_vals = None
    for d in range(max_A_doublings + 1):
        cand = 1 << d
        vals = {K: escape_probability(cand, K) for K in Ks}
        if max(vals.values()) < eps / 2.0:
            A = cand
            escape_vals = vals
            break
    if A is None:
        raise CalibrationError(
            f"escape stage exhausted: A={1 << max_A_doublings} still fails eps/2={eps / 2:g}"
        )

    q = None
    exit_vals = None
    for j in range(1, max_q_levels + 1):
        cand = 1.0 - 2.0**-j
        vals = {K: early_exit_probability(cand, A, K) for K in Ks}
        if max(vals.values()) < eps / 2.0:
            q = cand
            exit_vals = vals
            q_level = j
            break
    if q is None:
        raise CalibrationError(
            f"containment stage exhausted at q level {max_q_levels} for A={A}"
        )

    return {
        "eps": eps,
        "Ks": list(Ks),
        "A": A,
        "q": q,
        "q_level": q_level,
        "escape_by_K": {str(K): v for K, v in escape_vals.items()},
        "early_exit_by_K": {str(K): v for K, v in exit_vals.items()},
    }


def verify_lemma6_certificate(cert: dict) -> dict:
    """Recompute both probability families for the stored (A, q); bitwise."""
    A = cert["A"]
    q = cert["q"]
    eps = cert["eps"]
    max_diff = 0.0
    ok = True
    for K_str, v in cert["escape_by_K"].items():
        fresh = escape_probability(A, int(K_str))
        max_diff = max(max_diff, abs(fresh - v))
        ok &= fresh < eps / 2.0
    for K_str, v in cert["early_exit_by_K"].items():
        fresh = early_exit_probability(q, A, int(K_str))
        max_diff = max(max_diff, abs(fresh - v))
        ok &= fresh < eps / 2.0
    return {"max_diff": max_diff, "all_below": bool(ok)}
