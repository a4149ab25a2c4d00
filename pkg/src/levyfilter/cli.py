"""Command-line entry points: run, replay, validate, list-families.

``run`` simulates observation records for a configured scenario family,
filters each of them, and writes a self-describing output directory: the
canonical config, per-replica observation and filter CSVs, a verdicts
summary, and a manifest with content hashes.  ``replay`` re-executes a
run directory and insists on byte-identical outputs.  Exit codes: 0 ok,
2 bad configuration, 3 model hypothesis violation, 4 numerical
degeneracy, 5 acceptance or replay failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .config import config_to_text, parse_config_file
from .errors import (ConfigError, DegeneracyError, DivergenceError,
                     ModelViolationError, NumericOverflowError,
                     ReplayMismatchError)
from .families import build_family, list_families
from .filtering import ResamplePolicy, write_trajectory_csv, zakai_filter
from .model import validate_hypotheses
from .oracle import kalman_bucy
from .rng import derive_seed, substream
from .simulate import (TimeGrid, project_observation, simulate_path,
                       write_observation)
from .testfuncs import make_test_function


def _prior_mc_moments(spec, scen, n_steps, n_samples, seed, funcs):
    """Plain prior-propagation Monte Carlo of the signal, no conditioning.

    Used for the reduction verdict on families whose observation carries no
    information about the signal: the filter moments must then agree with
    this unconditional law.
    """
    R = int(n_samples)
    n = spec.n
    dt = spec.T / n_steps
    x = np.asarray(scen.prior_sampler(substream(seed, "x0"), R),
                   float).reshape(R, n)
    rng_g = substream(seed, "brownian")
    rng_c = substream(seed, "jump-counts")
    rng_u = substream(seed, "jump-marks")
    marks1 = spec.nu1.frozen_marks(spec.mark_budget)
    for k in range(n_steps):
        t = k * dt
        drift = (np.asarray(spec.b1(t, x), float).reshape(R, n)
                 - spec.signal_jump_drift(t, x, marks1))
        s0 = np.asarray(spec.sigma0(t, x), float)
        s1 = np.asarray(spec.sigma1(t, x), float)
        if s0.ndim == 2:
            s0 = np.broadcast_to(s0, (R,) + s0.shape)
        if s1.ndim == 2:
            s1 = np.broadcast_to(s1, (R,) + s1.shape)
        db = rng_g.standard_normal((R, spec.d)) * np.sqrt(dt)
        dw = rng_g.standard_normal((R, spec.m)) * np.sqrt(dt)
        x = (x + drift * dt + np.einsum("Rnd,Rd->Rn", s0, db)
             + np.einsum("Rnm,Rm->Rn", s1, dw))
        if spec.nu1.rate > 0.0:
            counts = rng_c.poisson(spec.nu1.rate * dt, size=R)
            for j in range(1, int(counts.max()) + 1):
                mask = counts >= j
                u1 = marks1[rng_u.integers(0, len(marks1), int(mask.sum()))]
                x[mask] += np.asarray(spec.f1(t, x[mask], u1), float)
    out = {}
    for F in funcs:
        fn = getattr(F, "value", F)
        vals = np.asarray(fn(x), float).reshape(R)
        out[F.name] = (float(vals.mean()),
                       float(vals.std(ddof=1) / np.sqrt(R)))
    return out


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(out_dir, payload):
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_replica(scen, cfg, funcs, seed_r, out_dir, index):
    spec = scen.spec
    grid = TimeGrid(0.0, spec.T, cfg.n_steps)
    record = simulate_path(spec, grid, scen.prior_sampler, scen.y0, seed_r)
    obs = project_observation(record)
    obs_name = f"obs_{index:03d}.csv"
    write_observation(obs, os.path.join(out_dir, obs_name))
    traj = zakai_filter(
        spec, obs, cfg.n_particles, scen.prior_sampler,
        derive_seed(seed_r, "filter"), test_functions=funcs,
        resample_policy=ResamplePolicy(cfg.ess_fraction))
    traj_name = f"filter_{index:03d}.csv"
    write_trajectory_csv(traj, os.path.join(out_dir, traj_name))

    verdict = {
        "replica": index,
        "seed": seed_r,
        "final_log_mass": traj.log_mass[-1],
        "min_ess": float(np.min(traj.ess)),
        "resample_count": int(np.sum(traj.resampled)),
        "observation_jumps": int(traj.event_count[-1]),
        "final_moments": {name: traj.summaries[name].pi_F[-1]
                          for name in traj.summaries},
    }
    if scen.linear is not None and "coord:0" in traj.summaries:
        kal = kalman_bucy(scen.linear, obs.t, obs.Y)
        gap = np.abs(kal.mean[:, 0] - traj.summaries["coord:0"].pi_F)
        verdict["kalman_gap_mean"] = float(np.mean(gap))
        verdict["kalman_gap_max"] = float(np.max(gap))
    if cfg.family == "uninformative":
        prior = _prior_mc_moments(spec, scen, cfg.n_steps,
                                  max(cfg.n_particles, 2000),
                                  derive_seed(seed_r, "prior-mc"), funcs)
        reduction = {}
        ok = True
        ess_final = max(float(traj.ess[-1]), 1.0)
        n_mc = max(cfg.n_particles, 2000)
        for name, (pm, pse) in prior.items():
            fv = float(traj.summaries[name].pi_F[-1])
            # the filter's MC error is approximated with the prior variance
            # spread over the final effective sample size
            combined = max(pse, 1e-12) * np.sqrt(1.0 + n_mc / ess_final)
            z = abs(fv - pm) / combined
            ok = ok and z <= 4.0
            reduction[name] = {"filter": fv, "prior_mean": pm,
                               "prior_se": pse, "z": z}
        verdict["reduction"] = reduction
        verdict["reduction_passed"] = bool(ok)
    return [obs_name, traj_name], verdict


def _execute_run(cfg, out_dir, threads, argv_echo):
    scen = build_family(cfg.family, cfg.params)
    spec = scen.spec
    funcs = [make_test_function(name, spec.n) for name in cfg.function_names()]

    os.makedirs(out_dir, exist_ok=True)
    config_text = config_to_text(cfg)
    with open(os.path.join(out_dir, "config.cfg"), "w") as fh:
        fh.write(config_text)
    started = time.time()
    _write_manifest(out_dir, {
        "version": __version__,
        "command": argv_echo,
        "family": cfg.family,
        "seed": cfg.seed,
        "status": "running",
        "files": {},
    })

    verdicts = {"family": cfg.family, "seed": cfg.seed, "replicas": []}
    if cfg.validate_hypotheses:
        report = validate_hypotheses(spec, cfg.hypothesis_budget,
                                     derive_seed(cfg.seed, "hypotheses"))
        verdicts["hypotheses"] = report.to_dict()
        if not report.passed:
            names = ", ".join(c.name for c in report.failures())
            raise ModelViolationError(f"hypothesis checks failed: {names}")

    seeds = [derive_seed(cfg.seed, "replica", r) for r in range(cfg.replicas)]
    files = ["config.cfg", "verdicts.json"]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(
                lambda args: _run_replica(scen, cfg, funcs, args[1],
                                          out_dir, args[0]),
                list(enumerate(seeds))))
    else:
        results = [_run_replica(scen, cfg, funcs, s, out_dir, r)
                   for r, s in enumerate(seeds)]
    for names, verdict in results:
        files.extend(names)
        verdicts["replicas"].append(verdict)

    failures = []
    if cfg.accept_max_kalman_gap is not None:
        gaps = [v.get("kalman_gap_mean") for v in verdicts["replicas"]]
        gaps = [g for g in gaps if g is not None]
        worst = max(gaps) if gaps else None
        ok = worst is not None and worst <= cfg.accept_max_kalman_gap
        verdicts["accept_kalman"] = {"worst": worst, "passed": ok}
        if not ok:
            failures.append("kalman gap")
    if cfg.accept_min_ess_fraction is not None:
        worst = min(v["min_ess"] for v in verdicts["replicas"])
        ok = worst >= cfg.accept_min_ess_fraction * cfg.n_particles
        verdicts["accept_ess"] = {"worst": worst, "passed": ok}
        if not ok:
            failures.append("effective sample size")

    with open(os.path.join(out_dir, "verdicts.json"), "w") as fh:
        json.dump(verdicts, fh, indent=2, sort_keys=True)
        fh.write("\n")

    hashes = {name: _sha256(os.path.join(out_dir, name))
              for name in sorted(files)}
    _write_manifest(out_dir, {
        "version": __version__,
        "command": argv_echo,
        "family": cfg.family,
        "seed": cfg.seed,
        "status": "complete",
        "runtime_seconds": round(time.time() - started, 3),
        "files": hashes,
    })
    return failures, verdicts


def _cmd_run(args):
    cfg = parse_config_file(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    out_dir = args.out or f"run_{cfg.family}_{cfg.seed}"
    failures, _ = _execute_run(cfg, out_dir, args.threads,
                               f"run --config {args.config}")
    print(f"run complete: {cfg.replicas} replica(s) in {out_dir}")
    if failures:
        print("acceptance failed: " + "; ".join(failures), file=sys.stderr)
        return 5
    return 0


def _cmd_replay(args):
    out_dir = args.out
    manifest_path = os.path.join(out_dir, "manifest.json")
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read manifest in {out_dir!r}: {exc}")
    if manifest.get("status") != "complete":
        raise ConfigError(f"run in {out_dir!r} did not complete; nothing to replay")
    cfg = parse_config_file(os.path.join(out_dir, "config.cfg"))

    with tempfile.TemporaryDirectory(prefix="levyfilter-replay-") as tmp:
        _execute_run(cfg, tmp, args.threads, manifest.get("command", "replay"))
        mismatched = []
        for name, digest in manifest["files"].items():
            fresh = os.path.join(tmp, name)
            if not os.path.exists(fresh):
                mismatched.append(f"{name} (missing)")
            elif _sha256(fresh) != digest:
                mismatched.append(name)
    if mismatched:
        raise ReplayMismatchError(
            "replay produced different bytes for: " + ", ".join(mismatched))
    print(f"replay ok: {len(manifest['files'])} file(s) byte-identical")
    return 0


def _cmd_validate(args):
    cfg = parse_config_file(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    scen = build_family(cfg.family, cfg.params)
    report = validate_hypotheses(scen.spec, cfg.hypothesis_budget,
                                 derive_seed(cfg.seed, "hypotheses"))
    for check in report.checks:
        status = "ok  " if check.passed else "FAIL"
        print(f"{status} {check.name}: worst={check.worst:.6g} "
              f"bound={check.bound:.6g}")
        if not check.passed and check.witness is not None:
            print(f"     witness: {check.witness}")
    if not report.passed:
        names = ", ".join(c.name for c in report.failures())
        raise ModelViolationError(f"hypothesis checks failed: {names}")
    print(f"all {len(report.checks)} hypothesis checks passed")
    return 0


def _cmd_list_families(args):
    for name, doc in list_families():
        print(f"{name}: {doc}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="levyfilter",
        description="Particle filtering for jump diffusions with shared noise")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate and filter a configured scenario")
    p_run.add_argument("--config", required=True, help="path to a key=value config")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    p_run.add_argument("--threads", type=int, default=1,
                       help="worker threads for replicas")
    p_run.set_defaults(fn=_cmd_run)

    p_replay = sub.add_parser("replay",
                              help="re-run a directory and require identical bytes")
    p_replay.add_argument("--out", required=True, help="directory of a previous run")
    p_replay.add_argument("--threads", type=int, default=1)
    p_replay.set_defaults(fn=_cmd_replay)

    p_val = sub.add_parser("validate", help="check model hypotheses for a config")
    p_val.add_argument("--config", required=True)
    p_val.add_argument("--seed", type=int, default=None)
    p_val.set_defaults(fn=_cmd_validate)

    p_list = sub.add_parser("list-families", help="show bundled scenario families")
    p_list.set_defaults(fn=_cmd_list_families)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ModelViolationError as exc:
        print(f"model violation: {exc}", file=sys.stderr)
        return 3
    except (DegeneracyError, DivergenceError, NumericOverflowError) as exc:
        print(f"numerical degeneracy: {exc}", file=sys.stderr)
        return 4
    except ReplayMismatchError as exc:
        print(f"replay mismatch: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
