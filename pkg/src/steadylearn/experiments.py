"""Reproducible experiment runner.

Every experiment is a function of an :class:`ExperimentConfig`.  Trial seeds
come from ``SeedSequence(seed).spawn(trials)``, trials may run in a process
pool, and results are always reduced in trial order, so the CSV output is a
pure function of the configuration.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .constraints import (
    KTemplate,
    MeasurementRecord,
    build_known_dissipation_system,
    build_prior_system,
    constraint_set,
    single_site_constraints,
)
from .dynamics import local_distance_series
from .model import (
    classical_ising_loss_model,
    loss_dephasing_model,
    pack,
    random_nn_jump_model,
    random_nn_model,
    unpack,
)
from .pauli import DensityMatrix
from .recovery import reconstruction_error, recover, recover_with_prior
from .steady_state import find_steady_state
from .stitching import (
    partition,
    patch_constraints,
    recover_patches,
    stitch,
    stitched_error,
    synthetic_stitch_details,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """Invalid experiment configuration."""


EXPERIMENTS = (
    "fig1a",
    "fig1a_inset",
    "fig1b",
    "fig1c",
    "fig2",
    "fig3_synthetic",
    "fig3_exact",
    "dynamics_b3",
    "strong_dissipation_b1",
)

_ENSEMBLES: dict[str, Callable] = {
    "nn": random_nn_model,
    "nn_jump": random_nn_jump_model,
    "loss_dephasing": loss_dephasing_model,
    "ising": lambda n, _param, seed: classical_ising_loss_model(n, seed),
}

# Per-experiment defaults; anything not listed falls back to the dataclass default.
DEFAULTS: dict[str, dict[str, Any]] = {
    "fig1a": {"n_sites": 6, "trials": 30, "epsilon": 1e-4, "grid": list(range(18, 208, 9))},
    "fig1a_inset": {"n_sites": 6, "trials": 10, "grid": [1e-6, 1e-5, 1e-4]},
    "fig1b": {"n_sites": 5, "trials": 30, "grid": [0.05, 0.1, 0.2, 0.35, 0.5, 0.7, 1.0, 1.5, 2.5]},
    "fig1c": {
        "n_sites": 5,
        "trials": 10,
        "epsilon": 1e-8,
        "grid": [0.01] + np.round(np.geomspace(0.02, 0.3, 6), 6).tolist() + [0.5, 1.0],
        "fit_range": [0.02, 0.3],
    },
    "fig2": {"n_sites": 6, "trials": 30},
    "fig3_synthetic": {"trials": 200, "grid": [1, 2, 4, 8, 16, 32, 64], "deltas": [1e-3, 1e-4], "fit_range": [4, 64]},
    "fig3_exact": {"n_sites": 7, "trials": 3, "epsilon": 1e-6},
    "dynamics_b3": {"n_sites": 5, "trials": 5},
    "strong_dissipation_b1": {"n_sites": 6, "trials": 10, "epsilon": 1e-8, "grid": [0.1, 0.3, 1.0, 3.0, 10.0]},
}

SCHEMAS: dict[str, list[str]] = {
    "fig1a": ["trial", "N", "delta", "delta_est"],
    "fig1a_inset": ["trial", "epsilon", "delta", "delta_est", "delta_over_eps"],
    "fig1b": ["trial", "alpha_d", "delta", "delta_prior", "delta_est"],
    "fig1c": ["trial", "alpha_l", "delta"],
    "fig2": ["trial", "constraints", "N", "delta", "delta_over_eps"],
    "fig3_synthetic": ["delta", "n_patches", "trial", "delta_total", "log_scale_error_last"],
    "fig3_exact": ["trial", "n_sites", "approach", "n_patches", "delta"],
    "dynamics_b3": ["trial", "t", "D_loc_recovered", "D_loc_fully_mixed"],
    "strong_dissipation_b1": ["ensemble", "alpha_d", "trial", "delta"],
}


@dataclass
class ExperimentConfig:
    experiment: str
    n_sites: int = 6
    trials: int = 30
    epsilon: float = 1e-4
    alpha_d: float = float(1 / np.sqrt(2))
    alpha_l: float = 0.5
    seed: int = 0
    tol: float = 1e-10
    threads: int = 1
    k_max: int = 3
    ordering_seed: int = 0
    noise_mode: str = "combination"
    grid: list = field(default_factory=list)
    deltas: list = field(default_factory=list)
    fit_range: list = field(default_factory=list)
    out: str = "results"

    @classmethod
    def build(cls, experiment: str, overrides: dict | None = None) -> "ExperimentConfig":
        if experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        values = dict(DEFAULTS[experiment])
        known = {f.name for f in fields(cls)}
        for k, v in (overrides or {}).items():
            if k not in known or k == "experiment":
                raise ConfigError(f"unknown config key {k!r}")
            values[k] = v
        cfg = cls(experiment=experiment, **values)
        cfg.validate()
        return cfg

    @classmethod
    def from_toml(cls, path, experiment: str | None = None, overrides: dict | None = None) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        exp = data.pop("experiment", None) or experiment
        if experiment and exp != experiment:
            raise ConfigError(f"config is for {exp!r}, not {experiment!r}")
        if exp is None:
            raise ConfigError("config does not name an experiment")
        data.update(overrides or {})
        return cls.build(exp, data)

    def validate(self) -> None:
        if self.trials < 1:
            raise ConfigError("trials must be positive")
        if self.epsilon < 0 or self.tol <= 0:
            raise ConfigError("epsilon must be nonnegative and tol positive")
        if self.threads < 1:
            raise ConfigError("threads must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.experiment != "fig3_synthetic" and not 2 <= self.n_sites <= 7:
            raise ConfigError("n_sites must be between 2 and 7")
        if self.noise_mode not in ("combination", "pauli", "entry"):
            raise ConfigError(f"unknown noise mode {self.noise_mode!r}")


@dataclass
class ExperimentOutput:
    experiment: str
    columns: list[str]
    rows: list[dict]
    summary: dict
    meta: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# Helpers


def trial_seeds(seed: int, trials: int) -> list[tuple[int, int]]:
    """Independent ``(model_seed, noise_seed)`` pairs for each trial."""
    children = np.random.SeedSequence(seed).spawn(trials)
    return [tuple(int(v) for v in c.generate_state(2, np.uint64)) for c in children]


def _map(fn: Callable, args: Sequence[tuple], threads: int) -> list:
    if threads <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, *zip(*args)))


@lru_cache(maxsize=16)
def _template(ensemble: str, n_sites: int, k_max: int, ordering_seed: int) -> KTemplate:
    basis = _ENSEMBLES[ensemble](n_sites, 1.0, 0).basis
    return KTemplate(constraint_set(n_sites, k_max, ordering_seed), basis)


@lru_cache(maxsize=8)
def _set_template(ensemble: str, n_sites: int, which: str) -> KTemplate:
    basis = _ENSEMBLES[ensemble](n_sites, 1.0, 0).basis
    cs = single_site_constraints(n_sites, "YZ") if which == "single" else constraint_set(n_sites, 2)
    return KTemplate(cs, basis)


def _solve(model, tol):
    return find_steady_state(model, tol).rho


def _log_stats(values) -> dict:
    lv = np.log10(np.asarray(values, dtype=float))
    return {
        "median": float(np.median(values)),
        "mean_log10": float(lv.mean()),
        "std_log10": float(lv.std(ddof=1)) if lv.size > 1 else 0.0,
    }


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


# --------------------------------------------------------------------------
# Trials (top-level so they can be sent to worker processes)


def _trial_fig1a(cfg: ExperimentConfig, trial: int, seeds: tuple[int, int]) -> list[dict]:
    model = random_nn_model(cfg.n_sites, cfg.alpha_d, seeds[0])
    rho = _solve(model, cfg.tol)
    tmpl = _template("nn", cfg.n_sites, cfg.k_max, cfg.ordering_seed)
    k = tmpl.evaluate(MeasurementRecord.from_state(rho, cfg.epsilon, seeds[1], cfg.noise_mode))
    c = pack(model)
    rows = []
    for n in cfg.grid:
        res = recover(k.head(int(n)), cfg.epsilon)
        rows.append({"trial": trial, "N": int(n), "delta": reconstruction_error(res.c_hat, c), "delta_est": res.delta_est})
    return rows


def _trial_fig1a_inset(cfg: ExperimentConfig, trial: int, seeds: tuple[int, int]) -> list[dict]:
    model = random_nn_model(cfg.n_sites, cfg.alpha_d, seeds[0])
    rho = _solve(model, cfg.tol)
    tmpl = _template("nn", cfg.n_sites, cfg.k_max, cfg.ordering_seed)
    c = pack(model)
    rows = []
    for eps in cfg.grid:
        # Same noise seed for every epsilon: only the noise amplitude changes.
        res = recover(tmpl.evaluate(MeasurementRecord.from_state(rho, eps, seeds[1], cfg.noise_mode)), eps)
        d = reconstruction_error(res.c_hat, c)
        rows.append({"trial": trial, "epsilon": eps, "delta": d, "delta_est": res.delta_est, "delta_over_eps": d / eps})
    return rows


def _prior_error(model, tmpl, record) -> float:
    k_l, b = build_prior_system(tmpl.constraints, model.basis, record, model.c_h, template=tmpl)
    c_l, _ = recover_with_prior(k_l, b)
    return reconstruction_error(np.concatenate([model.c_h, c_l]), pack(model))


def _trial_fig1b(cfg: ExperimentConfig, trial: int, seeds: tuple[int, int]) -> list[dict]:
    tmpl = _template("nn", cfg.n_sites, cfg.k_max, cfg.ordering_seed)
    rows = []
    for a in cfg.grid:
        model = random_nn_model(cfg.n_sites, a, seeds[0])
        rho = _solve(model, cfg.tol)
        record = MeasurementRecord.from_state(rho, cfg.epsilon, seeds[1], cfg.noise_mode)
        res = recover(tmpl.evaluate(record), cfg.epsilon)
        rows.append(
            {
                "trial": trial,
                "alpha_d": a,
                "delta": reconstruction_error(res.c_hat, pack(model)),
                "delta_prior": _prior_error(model, tmpl, record),
                "delta_est": res.delta_est,
            }
        )
    return rows


def _trial_fig1c(cfg: ExperimentConfig, trial: int, seeds: tuple[int, int]) -> list[dict]:
    tmpl = _template("loss_dephasing", cfg.n_sites, cfg.k_max, cfg.ordering_seed)
    rows = []
    for a in cfg.grid:
        model = loss_dephasing_model(cfg.n_sites, a, seeds[0])
        rho = _solve(model, cfg.tol)
        k = tmpl.evaluate(MeasurementRecord.from_state(rho, cfg.epsilon, seeds[1], cfg.noise_mode))
        rows.append({"trial": trial, "alpha_l": a, "delta": reconstruction_error(recover(k).c_hat, pack(model))})
    return rows


def _trial_fig2(cfg: ExperimentConfig, trial: int, seeds: tuple[int, int]) -> list[dict]:
    model = classical_ising_loss_model(cfg.n_sites, seeds[0])
    rho = _solve(model, cfg.tol)
    record = MeasurementRecord.from_state(rho, cfg.epsilon, seeds[1], cfg.noise_mode)
    c = pack(model)
    nh = model.basis.n_hamiltonian
    rows = []
    for which in ("single", "nn"):
        tmpl = _set_template("ising", cfg.n_sites, which)
        k_h, b = build_known_dissipation_system(tmpl.constraints, model.basis, record, c[nh:], template=tmpl)
        c_h, _ = recover_with_prior(k_h, b)
        d = reconstruction_error(c_h, c[:nh])
        rows.append({"trial": trial, "constraints": which, "N": len(tmpl.constraints), "delta": d, "delta_over_eps": d / cfg.epsilon})
    return rows


def _trial_fig3_synthetic(cfg: ExperimentConfig, trial: int, seeds: tuple[int, int]) -> list[dict]:
    rows = []
    for delta in cfg.deltas:
        for n in cfg.grid:
            ss = np.random.SeedSequence([seeds[0], int(n), int(round(-np.log10(delta) * 1000))])
            det = synthetic_stitch_details(int(n), delta, ss)
            rows.append(
                {
                    "delta": delta,
                    "n_patches": int(n),
                    "trial": trial,
                    "delta_total": det.delta_total,
                    "log_scale_error_last": float(det.log_scale_errors[-1]),
                }
            )
    return rows


def _patch_geometry(n_sites: int) -> tuple[int, int]:
    # 6/4 patches need n = 6 + 4j; seven sites are covered by 5/2 patches.
    if (n_sites - 6) % 4 == 0 and n_sites >= 6:
        return 6, 4
    if (n_sites - 5) % 2 == 0 and n_sites >= 5:
        return 5, 2
    return n_sites, 1


def _trial_fig3_exact(cfg: ExperimentConfig, trial: int, seeds: tuple[int, int]) -> list[dict]:
    rows = []
    for n in sorted({6, cfg.n_sites}):
        model = random_nn_model(n, cfg.alpha_d, seeds[0])
        rho = find_steady_state(model, cfg.tol, compute_gap=n < 7).rho
        record = MeasurementRecord.from_state(rho, cfg.epsilon, seeds[1], cfg.noise_mode)
        size, stride = _patch_geometry(n)
        layout = partition(n, size, stride)
        recs = recover_patches(layout, model.basis, record, cfg.k_max)
        stitched = stitch(recs, sign_margin=0.0)
        c = pack(model)
        rows.append({"trial": trial, "n_sites": n, "approach": "patched", "n_patches": layout.n_patches,
                     "delta": stitched_error(stitched, model.basis, c)})
        # Direct recovery over the union of the patch constraint sets.
        cs = None
        for i in range(layout.n_patches):
            pc = patch_constraints(layout, i, cfg.k_max)
            cs = pc if cs is None else cs + pc
        k = KTemplate(cs, model.basis).evaluate(record)
        rows.append({"trial": trial, "n_sites": n, "approach": "direct", "n_patches": layout.n_patches,
                     "delta": reconstruction_error(recover(k).c_hat, c)})
    return rows


def b3_times() -> np.ndarray:
    return np.concatenate([[0.0], np.logspace(-2, 1, 50)])


def _trial_dynamics_b3(cfg: ExperimentConfig, trial: int, seeds: tuple[int, int]) -> list[dict]:
    model = random_nn_model(cfg.n_sites, cfg.alpha_d, seeds[0])
    rho = _solve(model, cfg.tol)
    tmpl = _template("nn", cfg.n_sites, cfg.k_max, cfg.ordering_seed)
    record = MeasurementRecord.from_state(rho, cfg.epsilon, seeds[1], cfg.noise_mode)
    k_l, b = build_prior_system(tmpl.constraints, model.basis, record, model.c_h, template=tmpl)
    c_l, _ = recover_with_prior(k_l, b)
    recovered = unpack(model.basis, np.concatenate([model.c_h, c_l]))
    up = DensityMatrix.basis_state("0" * cfg.n_sites)
    series = local_distance_series(model, recovered, up, b3_times())
    return [
        {"trial": trial, "t": t, "D_loc_recovered": a, "D_loc_fully_mixed": m}
        for t, a, m in zip(series["t"], series["D_loc_recovered"], series["D_loc_fully_mixed"])
    ]


def _trial_b1(cfg: ExperimentConfig, trial: int, seeds: tuple[int, int]) -> list[dict]:
    rows = []
    for ens in ("nn", "nn_jump"):
        tmpl = _template(ens, cfg.n_sites, cfg.k_max, cfg.ordering_seed)
        for a in cfg.grid:
            model = _ENSEMBLES[ens](cfg.n_sites, a, seeds[0])
            rho = _solve(model, cfg.tol)
            k = tmpl.evaluate(MeasurementRecord.from_state(rho, cfg.epsilon, seeds[1], cfg.noise_mode))
            rows.append({"ensemble": ens, "alpha_d": a, "trial": trial,
                         "delta": reconstruction_error(recover(k).c_hat, pack(model))})
    return rows


_TRIALS = {
    "fig1a": _trial_fig1a,
    "fig1a_inset": _trial_fig1a_inset,
    "fig1b": _trial_fig1b,
    "fig1c": _trial_fig1c,
    "fig2": _trial_fig2,
    "fig3_synthetic": _trial_fig3_synthetic,
    "fig3_exact": _trial_fig3_exact,
    "dynamics_b3": _trial_dynamics_b3,
    "strong_dissipation_b1": _trial_b1,
}


# --------------------------------------------------------------------------
# Aggregation


def _group(rows, keys):
    out: dict[tuple, list[dict]] = {}
    for r in rows:
        out.setdefault(tuple(r[k] for k in keys), []).append(r)
    return out


def summarize(cfg: ExperimentConfig, rows: list[dict]) -> dict:
    exp = cfg.experiment
    if exp == "fig1a":
        groups = _group(rows, ["N"])
        per_n = [{"N": n, **_log_stats([r["delta"] for r in g]), "median_est": float(np.median([r["delta_est"] for r in g]))}
                 for (n,), g in groups.items()]
        full = groups[(max(cfg.grid),)]
        ratio = [r["delta"] / r["delta_est"] for r in full]
        return {"by_N": per_n, "ratio_to_estimate_full": {"median": float(np.median(ratio)), "mean": float(np.mean(ratio))}}
    if exp == "fig1a_inset":
        by_trial = _group(rows, ["trial"])
        spread = []
        for _, g in by_trial.items():
            v = np.array([r["delta_over_eps"] for r in g])
            spread.append(float(v.max() / v.min() - 1))
        by_eps = [{"epsilon": e, "median_delta_over_eps": float(np.median([r["delta_over_eps"] for r in g]))}
                  for (e,), g in _group(rows, ["epsilon"]).items()]
        return {"by_epsilon": by_eps, "per_model_relative_spread": spread}
    if exp == "fig1b":
        out = []
        for (a,), g in _group(rows, ["alpha_d"]).items():
            out.append({"alpha_d": a, "delta": _log_stats([r["delta"] for r in g]),
                        "delta_prior": _log_stats([r["delta_prior"] for r in g])})
        return {"by_alpha_d": out}
    if exp == "fig1c":
        out = [{"alpha_l": a, **_log_stats([r["delta"] for r in g])} for (a,), g in _group(rows, ["alpha_l"]).items()]
        lo, hi = cfg.fit_range
        pts = [(o["alpha_l"], o["median"]) for o in out if lo <= o["alpha_l"] <= hi]
        return {"by_alpha_l": out, "fit_range": [lo, hi], "slope": loglog_slope(*zip(*pts))}
    if exp == "fig2":
        return {w: {"N": g[0]["N"], **_log_stats([r["delta"] for r in g]),
                    "median_over_eps": float(np.median([r["delta_over_eps"] for r in g]))}
                for (w,), g in _group(rows, ["constraints"]).items()}
    if exp == "fig3_synthetic":
        out = {}
        lo, hi = cfg.fit_range
        for (d,), g in _group(rows, ["delta"]).items():
            med = {n: float(np.median([r["delta_total"] for r in gg])) for (n,), gg in _group(g, ["n_patches"]).items()}
            fit = [(n, m) for n, m in med.items() if lo <= n <= hi]
            nmax = max(med)
            last = np.array([r["log_scale_error_last"] for r in g if r["n_patches"] == nmax])
            out[f"{d:g}"] = {
                "median_by_n": {str(n): m for n, m in med.items()},
                "slope": loglog_slope(*zip(*fit)),
                "drift_mean_log_scale": float(last.mean()),
                "spread_log_scale": float(last.std(ddof=1)),
                "sqrt_n_delta": float(np.sqrt(nmax) * d),
            }
        return out
    if exp == "fig3_exact":
        return {f"{n}_{a}": _log_stats([r["delta"] for r in g]) for (n, a), g in _group(rows, ["n_sites", "approach"]).items()}
    if exp == "dynamics_b3":
        per_t = _group(rows, ["t"])
        med_rec = np.array([np.median([r["D_loc_recovered"] for r in g]) for g in per_t.values()])
        med_mix = np.array([np.median([r["D_loc_fully_mixed"] for r in g]) for g in per_t.values()])
        peaks = [max(r["D_loc_recovered"] for r in g) for g in _group(rows, ["trial"]).values()]
        finals = [g[-1]["D_loc_recovered"] for g in _group(rows, ["trial"]).values()]
        return {
            "series": {"t": [k[0] for k in per_t], "D_loc_recovered": med_rec.tolist(), "D_loc_fully_mixed": med_mix.tolist()},
            "peak_per_trial": peaks,
            "final_per_trial": finals,
            "median_peak": float(np.median(peaks)),
            "median_final": float(np.median(finals)),
            "max_fully_mixed": float(med_mix.max()),
        }
    if exp == "strong_dissipation_b1":
        out = {}
        for (e,), g in _group(rows, ["ensemble"]).items():
            out[e] = {f"{a:g}": _log_stats([r["delta"] for r in gg]) for (a,), gg in _group(g, ["alpha_d"]).items()}
        return out
    raise ConfigError(exp)


# --------------------------------------------------------------------------
# Running and writing


def build_id() -> str:
    """Hash of the package sources, a stand-in for a commit id."""
    h = hashlib.sha1()
    root = Path(__file__).parent
    for p in sorted(root.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()[:12]


def run(cfg: ExperimentConfig) -> ExperimentOutput:
    cfg.validate()
    start = time.perf_counter()
    seeds = trial_seeds(cfg.seed, cfg.trials)
    fn = _TRIALS[cfg.experiment]
    per_trial = _map(fn, [(cfg, i, s) for i, s in enumerate(seeds)], cfg.threads)
    rows = [r for trial_rows in per_trial for r in trial_rows]
    summary = summarize(cfg, rows)
    meta = {
        "experiment": cfg.experiment,
        "config": asdict(cfg),
        "build_id": build_id(),
        "version": __version__,
        "trial_seeds": [list(s) for s in seeds],
        "wall_time_s": time.perf_counter() - start,
        "substitutions": (
            "desk scale: exact steady states on at most 7 sites, default trial counts below "
            "the 300 of the original study, long chains only through synthetic stitching"
        ),
    }
    return ExperimentOutput(cfg.experiment, SCHEMAS[cfg.experiment], rows, summary, meta)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path, columns: list[str], rows: list[dict]) -> None:
    """RFC-4180 CSV with 17-significant-digit floats; rows must match ``columns`` exactly."""
    for i, r in enumerate(rows):
        if list(r) != columns:
            raise ValueError(f"row {i} has columns {list(r)}, schema is {columns}")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def write_output(out: ExperimentOutput, directory) -> dict[str, Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {"csv": d / f"{out.experiment}.csv", "summary": d / f"{out.experiment}_summary.json",
             "meta": d / f"{out.experiment}_meta.json"}
    write_csv(paths["csv"], out.columns, out.rows)
    with open(paths["summary"], "w") as fh:
        json.dump(out.summary, fh, indent=1, sort_keys=True)
    with open(paths["meta"], "w") as fh:
        json.dump(out.meta, fh, indent=1, sort_keys=True, default=str)
    return paths


def default_threads() -> int:
    return max(1, os.cpu_count() or 1)
