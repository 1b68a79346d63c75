"""Command-line front end: reproducible experiments with persisted records.

Every subcommand reads an optional flat JSON config (flags override file
values), echoes the effective config into its output record, and writes one
JSON ResultRecord (NDJSON for sweeps) so a stored record can be re-run. Exit
codes: 0 success, 2 parameter problem, 3 calibration failure, 4 invariant
violation found by a verify run.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__, defaults
from .analysis import (
    ChainSpec,
    band_sum_direct,
    calibrate_lemma5,
    calibrate_lemma6,
    exponent_sweep,
    heat_kernel_profile,
    interior_survival,
    interior_survival_absorbing,
    level_hit_cdf,
    level_hit_cdf_absorbing,
    reversibility_check,
    verify_lemma5_certificate,
    verify_lemma6_certificate,
)
from .dp import (
    as_target,
    boundary_to_csv,
    evolve,
    extract_region,
    hit_probability,
    solve_extremal,
    value_table_to_csv,
)
from .errors import CalibrationError, InvariantError, ParameterError
from .lattice import FLOAT, RATIONAL, interval_mass, to_snapshot
from .montecarlo import barrier_diagnostics, estimate_hit, lemma0_check
from .policies import (
    constant_policy,
    fast_until_zero_policy,
    multiscale_localization_schedule,
    multiscale_qto1_schedule,
    policy_from_json,
    policy_to_json,
    schedule_policy,
    two_zone_policy,
)

OUT_DIR_ENV = "CTRLWALK_OUT_DIR"

_MC_COMMANDS = {"simulate", "barriers"}


def _jsonable(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _resolve_out(path: str) -> str:
    base = os.environ.get(OUT_DIR_ENV)
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


def _parse_target(text):
    if text is None:
        return (0, 0)
    if isinstance(text, (list, tuple)):
        return as_target(tuple(text))
    text = str(text)
    if ":" in text:
        a, b = text.split(":", 1)
        return as_target((int(a), int(b)))
    return as_target(int(text))


def parse_policy(spec, n: int | None = None):
    """Policy from 'kind:k=v,...' text, 'file:PATH', or an inline JSON dict."""
    if isinstance(spec, dict):
        return policy_from_json(spec)
    if not isinstance(spec, str):
        raise ParameterError(f"cannot parse policy from {spec!r}")
    if spec.startswith("file:"):
        with open(spec[5:]) as fh:
            return policy_from_json(json.load(fh))
    kind, _, rest = spec.partition(":")
    kv = {}
    for item in rest.split(","):
        if not item:
            continue
        if "=" not in item:
            raise ParameterError(f"bad policy parameter {item!r} in {spec!r}")
        k, v = item.split("=", 1)
        kv[k.strip()] = v.strip()
    try:
        q = float(kv.pop("q"))
    except KeyError:
        raise ParameterError(f"policy spec {spec!r} needs q=...") from None
    if kind == "constant":
        return constant_policy(q, float(kv.pop("u", q)))
    if kind == "two-zone":
        return two_zone_policy(q, int(kv.pop("band")))
    if kind == "fast-until-zero":
        return fast_until_zero_policy(q)
    if kind == "schedule-localization":
        T = int(kv.pop("T", n if n is not None else 0))
        segs = multiscale_localization_schedule(
            q,
            float(kv.pop("alpha", defaults.LOC_ALPHA)),
            float(kv.pop("beta", defaults.LOC_BETA)),
            int(kv.pop("K0", defaults.LOC_K0)),
            T,
        )
        return schedule_policy(q, segs)
    if kind == "schedule-qto1":
        horizon = int(kv.pop("n", n if n is not None else 0))
        segs = multiscale_qto1_schedule(q, int(kv.pop("A", defaults.QTO1_A)), horizon)
        return schedule_policy(q, segs)
    raise ParameterError(f"unknown policy kind {kind!r} in {spec!r}")


def _record(command: str, config: dict, payload, provenance) -> dict:
    return {
        "command": command,
        "config": _jsonable(config),
        "version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "payload": _jsonable(payload),
        "provenance": _jsonable(provenance),
    }


def _emit(record: dict, out: str | None) -> None:
    text = json.dumps(record, indent=2)
    if out:
        path = _resolve_out(out)
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w") as fh:
            fh.write(text + "\n")
        print(f"wrote {path}")
    else:
        print(text)


def _open_out(path: str):
    path = _resolve_out(path)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    return open(path, "w")


# ---------------------------------------------------------------------------
# subcommand handlers: take the merged config, return (payload, provenance)


def _cmd_evolve(cfg):
    n = int(cfg["n"])
    policy = parse_policy(cfg["policy"], n=n)
    start = int(cfg.get("start") or 0)
    target = _parse_target(cfg.get("target"))
    mode = cfg.get("mode") or FLOAT
    d = evolve(policy, n, start, mode=mode)
    p = interval_mass(d, target[0], target[1])
    payload = {
        "n": n,
        "start": start,
        "target": list(target),
        "p": float(p),
        "policy": policy_to_json(policy),
        "flag_never_hit": float(d.flag_totals()[0]),
        "snapshot": to_snapshot(d),
    }
    if mode == RATIONAL:
        payload["p_exact"] = str(p)
    return payload, "exact"


def _cmd_solve(cfg):
    n = int(cfg["n"])
    q = float(cfg["q"])
    objective = cfg.get("objective") or "max"
    target = _parse_target(cfg.get("target"))
    keep = bool(cfg.get("keep_values")) or bool(cfg.get("values_csv"))
    table, bb = solve_extremal(q, n, objective, target=target, keep_values=keep)
    region = extract_region(bb)
    if cfg.get("values_csv"):
        with _open_out(cfg["values_csv"]) as fh:
            cutoff = cfg.get("cutoff")
            value_table_to_csv(table, fh, None if cutoff is None else int(cutoff))
    if cfg.get("boundary_csv"):
        with _open_out(cfg["boundary_csv"]) as fh:
            boundary_to_csv(bb, fh)
    if cfg.get("region_json"):
        with _open_out(cfg["region_json"]) as fh:
            json.dump(_jsonable(region), fh)
    payload = {
        "q": q,
        "n": n,
        "objective": objective,
        "target": list(target),
        "value": table.value(0, 0),
        "region": region,
    }
    return payload, "exact"


def _cmd_region(cfg):
    n = int(cfg["n"])
    q = float(cfg["q"])
    objective = cfg.get("objective") or "max"
    target = _parse_target(cfg.get("target"))
    _, bb = solve_extremal(q, n, objective, target=target, keep_values=False)
    region = extract_region(bb)
    if cfg.get("boundary_csv"):
        with _open_out(cfg["boundary_csv"]) as fh:
            boundary_to_csv(bb, fh)
    return region, "exact"


def _cmd_simulate(cfg):
    n = int(cfg["n"])
    policy = parse_policy(cfg["policy"], n=n)
    seed = int(cfg["seed"])
    trials = int(cfg.get("trials") or 10000)
    start = int(cfg.get("start") or 0)
    target = _parse_target(cfg.get("target"))
    est = estimate_hit(policy, n, start=start, target=target, trials=trials, seed=seed)
    payload = {
        "n": n,
        "start": start,
        "target": list(target),
        "policy": policy_to_json(policy),
        "p_hat": est.p_hat,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
        "hits": est.hits,
        "trials": est.trials,
    }
    if cfg.get("dump_final"):
        from .montecarlo import run_batch

        batch = run_batch(policy, n, start=start, trials=trials, seed=seed)
        with _open_out(cfg["dump_final"]) as fh:
            w = csv.writer(fh)
            w.writerow(["trial", "final"])
            for i, v in enumerate(batch.final):
                w.writerow([i, int(v)])
    return payload, {"method": "mc", "seed": seed, "trials": trials}


def _cmd_barriers(cfg):
    n = int(cfg["n"])
    policy = parse_policy(cfg["policy"], n=n)
    seed = int(cfg["seed"])
    trials = int(cfg.get("trials") or 10000)
    beta = float(cfg.get("beta") or 0.0)
    start = int(cfg.get("start") or 0)
    st = barrier_diagnostics(policy, n, beta_exp=beta, trials=trials, seed=seed, start=start)
    payload = {
        "n": st.n,
        "beta_exp": st.beta_exp,
        "trials": st.trials,
        "N0": st.N0,
        "radii": list(st.radii),
        "band_starts": list(st.band_starts),
        "policy": policy_to_json(policy),
        "stage_stats": [
            {
                "stage": i + 1,
                "entered_strict": st.entered_strict[i],
                "entered_by_n": st.entered_by_n[i],
                "cond_escape": None if i >= st.N0 - 1 else st.cond_escape[i][0],
                "cond_escape_ci": None if i >= st.N0 - 1 else list(st.cond_escape[i][1:]),
            }
            for i in range(st.N0)
        ],
        "min_cond_escape": st.min_cond_escape,
        "final_at_zero": st.final_at_zero,
        "final_in_window": st.final_in_window,
        "violations_exact": st.violations_exact,
        "violations_window": st.violations_window,
    }
    return payload, {"method": "mc", "seed": seed, "trials": trials}


def _cmd_exponent(cfg, out):
    q = float(cfg["q"])
    kind = cfg["policy_kind"]
    method = cfg.get("method") or "exact"
    grid = cfg["n_grid"]
    if isinstance(grid, str):
        grid = [int(v) for v in grid.split(",") if v]
    params = cfg.get("params") or {}
    if isinstance(params, str):
        params = json.loads(params)
    if method == "mc":
        if cfg.get("seed") is None:
            raise ParameterError("--seed is required for mc sweeps (no hidden entropy)")
        params.setdefault("seed", int(cfg["seed"]))
        params.setdefault("trials", int(cfg.get("trials") or 10000))
    threads = int(cfg.get("threads") or 1)
    min_n = cfg.get("min_n")
    records, fit = exponent_sweep(
        kind, q, grid, method=method, params=params, threads=threads,
        min_n=None if min_n is None else int(min_n),
    )
    fit_payload = {
        "sigma_hat": fit.sigma_hat,
        "intercept": fit.intercept,
        "r2": fit.r_squared,
        "n_min": fit.n_min,
        "n_max": fit.n_max,
        "min_n_cutoff": fit.min_n,
        "points": [list(p) for p in fit.points],
    }
    if cfg.get("csv"):
        with _open_out(cfg["csv"]) as fh:
            w = csv.writer(fh)
            w.writerow(["policy_kind", "q", "n", "p", "method", "ci_low", "ci_high"])
            for r in records:
                w.writerow(
                    [r["policy_kind"], r["q"], r["n"], repr(r["p"]), r["method"],
                     "" if r["ci_low"] is None else repr(r["ci_low"]),
                     "" if r["ci_high"] is None else repr(r["ci_high"])]
                )

    prov = "exact" if method == "exact" else {
        "method": "mc", "seed": params.get("seed"), "trials": params.get("trials"),
    }
    lines = [_record("exponent", cfg, r, r["method"] if method == "exact" else prov) for r in records]
    lines.append(_record("exponent", cfg, {"fit": fit_payload}, prov))
    text = "\n".join(json.dumps(line) for line in lines) + "\n"
    if out:
        path = _resolve_out(out)
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w") as fh:
            fh.write(text)
        print(f"wrote {path}")
    else:
        sys.stdout.write(text)
    print(f"sigma_hat = {fit.sigma_hat:.6f}  r2 = {fit.r_squared:.6f}", file=sys.stderr)
    return 0


def _cmd_verify(cfg):
    what = cfg["what"]
    if what == "lemma0":
        if cfg.get("seed") is None:
            raise ParameterError("--seed is required for verify lemma0 (no hidden entropy)")
        res = lemma0_check(
            float(cfg["q"]),
            int(cfg["h"]),
            float(cfg["delta"]),
            int(cfg["ell"]),
            trials=int(cfg.get("trials") or 10000),
            seed=int(cfg["seed"]),
        )
        payload = {
            "q": res.q_cap, "h": res.h, "delta": res.delta, "ell": res.ell,
            "trials": res.trials, "estimate": res.estimate,
            "ci_low": res.ci_low, "ci_high": res.ci_high,
            "threshold": res.threshold, "violation": res.violation,
        }
        ok = not res.violation
        return payload, {"method": "mc", "seed": int(cfg["seed"]), "trials": res.trials}, ok

    if what == "lemma5":
        with open(_resolve_out(cfg["cert"])) as fh:
            cert = json.load(fh)
        rep = verify_lemma5_certificate(cert)
        K0 = cert["K0"]
        k0_entries = [e for e in cert["entries"] if e["K"] == K0]
        direct = band_sum_direct(
            cert["q_cap"], K0, k0_entries[0]["band"], k0_entries[0]["t"],
            [e["y"] for e in k0_entries],
        )
        cross = max(abs(direct[e["y"]] - e["sum"]) for e in k0_entries)
        payload = {
            "replay_max_diff": rep["max_diff"],
            "all_exceed": rep["all_exceed"],
            "entries": rep["entries"],
            "direct_sum_max_diff": cross,
        }
        ok = rep["all_exceed"] and rep["max_diff"] == 0.0 and cross <= 1e-12
        return payload, "exact", ok

    if what == "lemma6":
        with open(_resolve_out(cfg["cert"])) as fh:
            cert = json.load(fh)
        rep = verify_lemma6_certificate(cert)
        # small-scale dual route: absorbing evolution vs both closed forms
        k_small = 8
        t_small = 4 * k_small * k_small
        d1 = abs(level_hit_cdf(2 * k_small, t_small) - level_hit_cdf_absorbing(2 * k_small, t_small))
        d2 = abs(
            interior_survival(cert["q"], k_small, t_small)
            - interior_survival_absorbing(cert["q"], k_small, t_small)
        )
        payload = {
            "replay_max_diff": rep["max_diff"],
            "all_below": rep["all_below"],
            "absorbing_cross_check_escape": d1,
            "absorbing_cross_check_exit": d2,
        }
        ok = rep["all_below"] and rep["max_diff"] == 0.0 and d1 <= 1e-12 and d2 <= 1e-12
        return payload, "exact", ok

    if what == "reversibility":
        mode = cfg.get("mode") or FLOAT
        band = int(cfg["band"])
        chain = ChainSpec(float(cfg["q"]), band, mode=mode)
        window = int(cfg.get("window") or band + 8)
        residual = reversibility_check(chain, window)
        tol = 0.0 if mode == RATIONAL else 1e-15
        ok = residual <= tol
        payload = {
            "q": float(cfg["q"]), "band": band, "window": window, "mode": mode,
            "residual": float(residual), "tolerance": tol, "pass": bool(ok),
        }
        return payload, "exact", ok

    if what == "heatkernel":
        band = int(cfg.get("band") or 16)
        q = float(cfg["q"])
        tg = cfg.get("t_grid")
        if isinstance(tg, str):
            tg = [int(v) for v in tg.split(",") if v]
        if tg is None:
            tg = [2**k for k in range(4, 13)]
        prof = heat_kernel_profile(ChainSpec(q, band), tg)
        running = dict(prof["running_max"])
        ts = sorted(running)
        top, half = ts[-1], ts[-1] // 2
        ref = running.get(half)
        growth = None if not ref else running[top] / ref - 1.0
        ok = growth is not None and growth < 0.01
        payload = {
            "q": q, "band": band, "t_grid": ts, "probes": list(prof["probes"]),
            "per_t": [[t, v] for t, v in prof["per_t"]],
            "bound_estimate": prof["bound_estimate"],
            "top_octave_growth": growth,
            "pass": bool(ok),
        }
        return payload, "exact", ok

    raise ParameterError(f"unknown verify target {what!r}")


def _cmd_calibrate(cfg):
    what = cfg["what"]
    if what == "lemma5":
        cert = calibrate_lemma5(float(cfg["q"]))
        return cert, "exact"
    if what == "lemma6":
        cert = calibrate_lemma6(float(cfg["eps"]))
        return cert, "exact"
    raise ParameterError(f"unknown calibrate target {what!r}")


# ---------------------------------------------------------------------------
# argument wiring


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="ctrlwalk", description=__doc__)
    top.add_argument("--version", action="version", version=__version__)
    sub = top.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--config")

    p = sub.add_parser("evolve", help="exact law of the walk under a policy")
    p.add_argument("--policy", help="kind:k=v,... or file:PATH")
    p.add_argument("--n", type=int)
    p.add_argument("--start", type=int)
    p.add_argument("--target", help="site or lo:hi")
    p.add_argument("--mode", choices=[FLOAT, RATIONAL])
    common(p)

    p = sub.add_parser("solve", help="extremal hit probability over capped controls")
    p.add_argument("--q", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--objective", choices=["max", "min"])
    p.add_argument("--target")
    p.add_argument("--keep-values", dest="keep_values", action="store_const", const=True)
    p.add_argument("--values-csv", dest="values_csv")
    p.add_argument("--region-json", dest="region_json")
    p.add_argument("--boundary-csv", dest="boundary_csv")
    p.add_argument("--cutoff", type=int)
    common(p)

    p = sub.add_parser("region", help="bang-bang region of the extremal control")
    p.add_argument("--q", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--objective", choices=["max", "min"])
    p.add_argument("--target")
    p.add_argument("--boundary-csv", dest="boundary_csv")
    common(p)

    p = sub.add_parser("simulate", help="Monte Carlo hit estimate with CI")
    p.add_argument("--policy")
    p.add_argument("--n", type=int)
    p.add_argument("--start", type=int)
    p.add_argument("--target")
    p.add_argument("--trials", type=int)
    p.add_argument("--dump-final", dest="dump_final")
    common(p)

    p = sub.add_parser("exponent", help="hit-probability sweep and power-law fit")
    p.add_argument("--policy-kind", dest="policy_kind")
    p.add_argument("--q", type=float)
    p.add_argument("--n-grid", dest="n_grid")
    p.add_argument("--method", choices=["exact", "mc"])
    p.add_argument("--trials", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--min-n", dest="min_n", type=int)
    p.add_argument("--csv")
    p.add_argument("--params", help="JSON object with extra policy parameters")
    common(p)

    p = sub.add_parser("barriers", help="barrier-entrance diagnostics")
    p.add_argument("--policy")
    p.add_argument("--n", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--start", type=int)
    common(p)

    p = sub.add_parser("verify", help="statistical and structural checks")
    p.add_argument("what", choices=["lemma0", "lemma5", "lemma6", "reversibility", "heatkernel"])
    p.add_argument("--q", type=float)
    p.add_argument("--h", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--ell", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--cert")
    p.add_argument("--band", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--mode", choices=[FLOAT, RATIONAL])
    p.add_argument("--t-grid", dest="t_grid")
    common(p)

    p = sub.add_parser("calibrate", help="search parameter witnesses")
    p.add_argument("what", choices=["lemma5", "lemma6"])
    p.add_argument("--q", type=float)
    p.add_argument("--eps", type=float)
    common(p)

    return top


def _merge_config(args: argparse.Namespace) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ParameterError("config file must hold a flat JSON object")
        cfg.update(loaded)
    for k, v in vars(args).items():
        if k in ("command", "config") or v is None:
            continue
        cfg[k] = v
    return cfg


def run_command(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:
        code = exc.code or 0
        return 2 if code not in (0,) else 0

    try:
        cfg = _merge_config(args)
        command = args.command
        out = cfg.pop("out", None)

        if command == "exponent":
            return _cmd_exponent(cfg, out)

        if command in _MC_COMMANDS and cfg.get("seed") is None:
            raise ParameterError(f"--seed is required for {command} (no hidden entropy)")

        ok = True
        if command == "evolve":
            payload, prov = _cmd_evolve(cfg)
        elif command == "solve":
            payload, prov = _cmd_solve(cfg)
        elif command == "region":
            payload, prov = _cmd_region(cfg)
        elif command == "simulate":
            payload, prov = _cmd_simulate(cfg)
        elif command == "barriers":
            payload, prov = _cmd_barriers(cfg)
        elif command == "verify":
            payload, prov, ok = _cmd_verify(cfg)
        elif command == "calibrate":
            payload, prov = _cmd_calibrate(cfg)
        else:
            raise ParameterError(f"unknown command {command!r}")

        record = _record(command, {**cfg, "out": out} if out else cfg, payload, prov)
        _emit(record, out)
        if not ok:
            print(f"{command} {cfg.get('what', '')}: check FAILED", file=sys.stderr)
            return 4
        return 0
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CalibrationError as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return 3
    except InvariantError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 4
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (KeyError, ValueError, TypeError) as exc:
        print(f"error: missing or malformed parameter: {exc!r}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
