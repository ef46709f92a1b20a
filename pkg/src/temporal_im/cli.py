"""Command-line front end: config-driven experiment runs, CSV emission,
checkpoint-friendly manifests, and a dense-vs-MPS cross-check battery.

Configs are flat ``key = value`` text with ``#`` comments.  Every run writes
one CSV per (experiment, chi[, boundary]) plus ``run_manifest.json``.  CSVs
are deterministic for a fixed config and seed; the manifest is not (it
records wall time).
"""
from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .models import Impurity, ModelSpec, trotterize
from .influence import NumericalInstabilityError
from .oracles import ResourceLimitError

EXPERIMENTS = ("floquet-czz", "hamiltonian-impurity", "quench", "dtc",
               "entropy-scan", "oracle-check")

CSV_COLUMNS = ("abscissa", "value_re", "value_im", "entropy_halfcut",
               "entropy_max", "discarded_weight", "chi", "eps", "boundary",
               "seed")

EXIT_CONFIG = 2
EXIT_UNSTABLE = 3
EXIT_RESOURCE = 4


class ConfigError(ValueError):
    """Malformed or incomplete experiment config."""


# ------------------------------------------------------------------- config

_BOOL = {"true": True, "false": False, "1": True, "0": False,
         "yes": True, "no": False}

_KEYS = {
    "experiment": str,
    "J": float, "g": float, "h": float, "eps": float, "eps_kick": float,
    "alpha": float, "beta": float,
    "T_max": int, "t_max": float, "t": float,
    "chi": "int_list", "eps_list": "float_list", "T_list": "int_list",
    "cutoff": float, "boundary": "str_list",
    "preserve_weak_bonds": "bool", "reuse_im": "bool",
    "seed": int, "samples": int, "tmax": int, "out": str,
}

_REQUIRED = {
    "floquet-czz": ("J", "g", "h", "T_max", "chi"),
    "hamiltonian-impurity": ("J", "g", "h", "eps", "t_max", "alpha", "beta", "chi"),
    "quench": ("J", "g", "h", "eps", "t_max", "chi"),
    "dtc": ("eps_kick", "h", "T_max", "chi"),
    "entropy-scan": ("chi",),
    "oracle-check": (),
}


@dataclass
class ExperimentConfig:
    experiment: str
    raw: Dict[str, object] = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.raw[name]
        except KeyError:
            raise AttributeError(name)

    def get(self, name, default=None):
        return self.raw.get(name, default)


def _parse_value(key: str, text: str):
    kind = _KEYS[key]
    try:
        if kind is str:
            return text
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind == "bool":
            return _BOOL[text.lower()]
        if kind == "int_list":
            return [int(x) for x in text.split(",") if x.strip()]
        if kind == "float_list":
            return [float(x) for x in text.split(",") if x.strip()]
        if kind == "str_list":
            return [x.strip() for x in text.split(",") if x.strip()]
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad value for {key!r}: {text!r}") from exc
    raise ConfigError(f"unhandled key kind for {key!r}")


def parse_config_text(text: str) -> ExperimentConfig:
    raw: Dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = _parse_value(key, val)
    if "experiment" not in raw:
        raise ConfigError("missing required key 'experiment'")
    exp = raw["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}")
    for need in _REQUIRED[exp]:
        if need not in raw:
            raise ConfigError(f"experiment {exp!r} requires key {need!r}")
    if exp == "entropy-scan":
        if ("eps_list" in raw) == ("T_list" in raw):
            raise ConfigError("entropy-scan needs exactly one of eps_list, T_list")
        if "eps_list" in raw and "t" not in raw:
            raise ConfigError("entropy-scan over eps_list needs fixed t")
        if "eps_list" in raw and not all(k in raw for k in ("J", "g", "h")):
            raise ConfigError("entropy-scan over eps_list needs J, g, h")
        if "T_list" in raw and "eps_kick" not in raw and not all(
                k in raw for k in ("J", "g", "h")):
            raise ConfigError("entropy-scan over T_list needs J, g, h or eps_kick")
    if not raw.get("chi", [1]):
        raise ConfigError("chi list is empty")
    return ExperimentConfig(exp, raw)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r") as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


# -------------------------------------------------------------- CSV emission

def _g17(x) -> str:
    return "%.17g" % float(x)


def write_series_csv(path: str, series, chi: int, eps: float, boundary: str,
                     seed: Optional[int]) -> None:
    """Atomic write (temp + rename), fixed column order, 17 digits."""
    ex = series.extras
    n = len(series.abscissa)

    def col(name, default=float("nan")):
        vals = ex.get(name)
        if vals is None:
            return [default] * n
        return vals
    lines = [",".join(CSV_COLUMNS)]
    halfs, maxs, dws = col("entropy_halfcut"), col("entropy_max"), col("discarded_weight")
    seed_txt = "nan" if seed is None else str(int(seed))
    for i in range(n):
        v = complex(series.values[i])
        row = (_g17(series.abscissa[i]), _g17(v.real), _g17(v.imag),
               _g17(halfs[i]), _g17(maxs[i]), _g17(dws[i]),
               str(int(chi)), _g17(eps), boundary, seed_txt)
        lines.append(",".join(row))
    payload = "\n".join(lines) + "\n"
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------- experiments

def _spec_for(cfg: ExperimentConfig) -> ModelSpec:
    exp = cfg.experiment
    if exp == "floquet-czz":
        return ModelSpec(J=cfg.J, g=cfg.g, h=cfg.h, T=cfg.T_max,
                         eps=cfg.get("eps", 0.0))
    if exp == "hamiltonian-impurity":
        return trotterize(cfg.J, cfg.g, cfg.h, cfg.t_max, cfg.eps,
                          impurity=Impurity(alpha=cfg.alpha, beta=cfg.beta))
    if exp == "dtc":
        return ModelSpec(J=cfg.get("J", 1.0), g=math.pi / 2 - cfg.eps_kick,
                         h=cfg.h, T=cfg.T_max, disorder="uniform_J_0_2pi")
    raise ConfigError(f"no single spec for experiment {cfg.experiment!r}")


def _entropy_specs(cfg: ExperimentConfig) -> List[ModelSpec]:
    if "eps_list" in cfg.raw:
        return [trotterize(cfg.J, cfg.g, cfg.h, cfg.t, e) for e in cfg.eps_list]
    if "eps_kick" in cfg.raw:
        return [ModelSpec(J=cfg.get("J", 1.0), g=math.pi / 2 - cfg.eps_kick,
                          h=cfg.h, T=T, disorder="uniform_J_0_2pi")
                for T in cfg.T_list]
    return [ModelSpec(J=cfg.J, g=cfg.g, h=cfg.h, T=T) for T in cfg.T_list]


def _series_jobs(cfg: ExperimentConfig, seed: Optional[int]):
    """(label, callable) pairs, one per output CSV, largest chi first."""
    from .observables import (autocorrelator_series, entropy_series,
                              quench_magnetization_series)

    exp = cfg.experiment
    chis = sorted(cfg.chi, reverse=True)
    cutoff = cfg.get("cutoff", 0.0)
    pwb = cfg.get("preserve_weak_bonds", False)
    reuse = cfg.get("reuse_im", False)
    boundaries = cfg.get("boundary", ["open"])
    jobs = []
    if exp == "entropy-scan":
        specs = _entropy_specs(cfg)
        for chi in chis:
            for b in boundaries:
                def job(chi=chi, b=b):
                    return entropy_series(specs, [chi], cutoff, boundary=b,
                                          preserve_weak_bonds=pwb)
                jobs.append(((chi, b), job))
        return jobs
    if exp == "quench":
        for chi in chis:
            def job(chi=chi):
                return quench_magnetization_series(
                    cfg.J, cfg.g, cfg.h, cfg.t_max, cfg.eps, chi, cutoff,
                    preserve_weak_bonds=pwb, reuse_im=reuse)
            jobs.append(((chi, "open"), job))
        return jobs
    spec = _spec_for(cfg)
    for chi in chis:
        for b in boundaries:
            def job(chi=chi, b=b, spec=spec):
                return autocorrelator_series(spec, chi, cutoff, spec.T,
                                             boundary=b, preserve_weak_bonds=pwb,
                                             reuse_im=reuse)
            jobs.append(((chi, b), job))
    return jobs


def run_experiment(cfg: ExperimentConfig, out_dir: str, seed: Optional[int],
                   threads: int) -> List[str]:
    if cfg.experiment == "oracle-check":
        rc = oracle_check(cfg.get("tmax", 4))
        if rc != 0:
            raise NumericalInstabilityError("oracle cross-checks failed")
        return []
    jobs = _series_jobs(cfg, seed)
    eps = cfg.get("eps", cfg.get("eps_kick", 0.0))
    if cfg.experiment == "entropy-scan" and "eps_list" in cfg.raw:
        eps = float("nan")  # per-row eps is the abscissa, no single value
    written = []
    results: Dict[tuple, object] = {}
    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            futs = {pool.submit(fn): key for key, fn in jobs}
            for fut, key in futs.items():
                results[key] = fut.result()
    else:
        for key, fn in jobs:
            results[key] = fn()
    for key, _ in jobs:  # keep emission order deterministic: largest chi first
        chi, boundary = key
        series = results[key]
        suffix = f"_chi{chi}" + ("" if boundary == "open" else f"_{boundary}")
        path = os.path.join(out_dir, f"{cfg.experiment}{suffix}.csv")
        write_series_csv(path, series, chi, eps, boundary, seed)
        written.append(path)
    return written


def write_manifest(out_dir: str, cfg: ExperimentConfig, seed: Optional[int],
                   wall: float, files: Sequence[str]) -> str:
    path = os.path.join(out_dir, "run_manifest.json")
    doc = {"config": cfg.raw, "engine_version": __version__,
           "experiment": cfg.experiment, "files": [os.path.basename(f) for f in files],
           "seed": seed, "wall_time_s": wall}
    os.makedirs(out_dir, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=out_dir, suffix=".tmp")
    with os.fdopen(fd, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True, default=str)
        f.write("\n")
    os.replace(tmp, path)
    return path


# --------------------------------------------------------------- oracle-check

def _check(name: str, got: float, tol: float, report: list) -> None:
    ok = got <= tol
    report.append((name, ok, got, tol))
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: err={got:.3e} tol={tol:.0e}")


def oracle_check(tmax: int = 4) -> int:
    """Dense-vs-MPS cross-check battery; 0 when everything agrees."""
    from .influence import build_disorder_slice, build_transfer_slice, solve_im
    from .mps import mps_from_dense
    from .observables import (InsertionPlan, Insertion, czz_plan,
                              autocorrelator_series, temporal_contract)
    from .models import floquet_kernel
    from . import oracles

    report: list = []
    spec = ModelSpec(J=0.31, g=0.57, h=0.23, T=min(tmax, 4))
    spec2 = ModelSpec(J=0.8, g=0.45, h=0.3, T=min(tmax, 4), eps=0.1,
                      trotter_order=2)
    for s, tag in ((spec, "floquet"), (spec2, "trotter")):
        dense = oracles.dense_transfer_slice(s)
        mpo = build_transfer_slice(s).dense()
        _check(f"slice[{tag}] dense vs MPO", float(np.max(np.abs(dense - mpo))),
               1e-12, report)
        ref = oracles.dense_transfer_fixed_point(s)
        im = solve_im(s, chi_max=4 ** s.T, cutoff=0.0)
        got = im.psi.dense()
        _check(f"fixed point[{tag}] dense vs solve",
               float(np.max(np.abs(ref.amplitudes - got))), 1e-10, report)
        kern = floquet_kernel(s)
        one = temporal_contract(im, im.mirrored(), kern)
        _check(f"trace[{tag}] empty plan", abs(one - 1.0), 1e-10, report)
        ed = oracles.ed_chain_evolve(s, 2 * s.T + 1)
        ser = autocorrelator_series(s, chi_max=4 ** s.T)
        _check(f"czz[{tag}] IM vs chain ED",
               float(np.max(np.abs(ser.values - ed.values))), 1e-8, report)
        reuse = autocorrelator_series(s, chi_max=4 ** s.T, reuse_im=True)
        _check(f"czz[{tag}] reuse vs fresh",
               float(np.max(np.abs(ser.values - reuse.values))), 1e-9, report)
    dspec = ModelSpec(J=1.0, g=math.pi / 2 - 0.13, h=0.3, T=3,
                      disorder="uniform_J_0_2pi")
    davg = oracles.dense_disorder_slice(dspec)
    quad = oracles.quadrature_disorder_slice(dspec, 64)
    _check("disorder slice: constraint vs quadrature",
           float(np.max(np.abs(davg - quad))), 1e-9, report)
    _check("disorder slice: MPO vs dense",
           float(np.max(np.abs(build_disorder_slice(dspec).dense() - davg))),
           1e-12, report)
    g0 = ModelSpec(J=0.47, g=0.0, h=0.29, T=min(tmax, 5))
    im = solve_im(g0, chi_max=64, cutoff=0.0)
    ref = oracles.im_g0(g0.J, g0.T).amplitudes
    _check("g=0 IM vs closed form",
           float(np.max(np.abs(im.psi.dense() - ref))), 1e-10, report)
    return 0 if all(ok for _, ok, _, _ in report) else 1


# ----------------------------------------------------------------------- main

def _thread_count(arg: Optional[int]) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("TEMPORAL_IM_THREADS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="temporal-im",
                                     description="influence-matrix engine")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=".")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--threads", type=int, default=None)
    p_orc = sub.add_parser("oracle-check", help="dense-vs-MPS cross checks")
    p_orc.add_argument("--tmax", type=int, default=4)
    p_ent = sub.add_parser("entropy", help="entropy scan from a config")
    p_ent.add_argument("config")
    args = parser.parse_args(argv)

    try:
        if args.command == "oracle-check":
            return EXIT_UNSTABLE if oracle_check(args.tmax) else 0
        cfg = load_config(args.config)
        if args.command == "entropy":
            if cfg.experiment != "entropy-scan":
                raise ConfigError("entropy subcommand needs experiment = entropy-scan")
            out_dir, seed, threads = cfg.get("out", "."), cfg.get("seed"), 1
        else:
            out_dir = args.out
            seed = args.seed if args.seed is not None else cfg.get("seed")
            threads = _thread_count(args.threads)
        if cfg.experiment == "dtc" and seed is None:
            raise ConfigError("dtc runs require a seed")
        t0 = time.monotonic()
        files = run_experiment(cfg, out_dir, seed, threads)
        write_manifest(out_dir, cfg, seed, time.monotonic() - t0, files)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalInstabilityError as exc:
        print(f"numerical instability: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except ResourceLimitError as exc:
        print(f"resource bound: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
