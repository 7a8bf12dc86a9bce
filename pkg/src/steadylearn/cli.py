"""Command-line interface.

Exit codes: 0 on success, 2 for configuration or usage errors, 3 for
numerical failures (no unique steady state, solver stalls, stitching
failures, inconsistent assembly).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .constraints import (
    ConsistencyError,
    ConstraintMatrix,
    KTemplate,
    MeasurementRecord,
    MissingObservable,
    build_prior_system,
    constraint_set,
)
from .experiments import EXPERIMENTS, ConfigError, ExperimentConfig, run, write_output
from .model import (
    SizeError,
    classical_ising_loss_model,
    load_model,
    loss_dephasing_model,
    pack,
    random_nn_jump_model,
    random_nn_model,
    save_model,
    unpack,
)
from .pauli import DensityMatrix
from .recovery import DegenerateSpectrum, reconstruction_error, recover, recover_with_prior
from .steady_state import DegenerateSteadyState, NoConvergence, find_steady_state, load_state, save_state
from .stitching import SharedBlockTooSmall, SignAmbiguous, partition, recover_patches, stitch, stitched_error

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
NUMERICAL_ERRORS = (
    DegenerateSteadyState,
    NoConvergence,
    SharedBlockTooSmall,
    SignAmbiguous,
    ConsistencyError,
    DegenerateSpectrum,
    np.linalg.LinAlgError,
)

log = logging.getLogger("steadylearn")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="TOML file with parameters")
    p.add_argument("--seed", type=int, default=None, help="master seed (u64)")
    p.add_argument("--out", type=Path, default=None, help="output file or directory")
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.add_argument("--tol", type=float, default=1e-10, help="steady-state residual tolerance")


def _write_json(path: Path | None, data: dict) -> None:
    text = json.dumps(data, indent=1, sort_keys=True)
    if path is None:
        print(text)
    else:
        path.write_text(text + "\n")


def _record_for(args, model) -> MeasurementRecord:
    if args.record:
        return MeasurementRecord.load(args.record)
    rho = load_state(args.state) if args.state else find_steady_state(model, args.tol).rho
    return MeasurementRecord.from_state(rho, args.epsilon, args.seed or 0, args.mode)


# --------------------------------------------------------------------------
# Subcommands


def cmd_generate(args) -> int:
    seed = args.seed or 0
    if args.ensemble == "nn":
        model = random_nn_model(args.sites, args.alpha_d, seed)
    elif args.ensemble == "nn_jump":
        model = random_nn_jump_model(args.sites, args.alpha_d, seed)
    elif args.ensemble == "loss_dephasing":
        model = loss_dephasing_model(args.sites, args.alpha_l, seed)
    else:
        model = classical_ising_loss_model(args.sites, seed)
    out = args.out or Path("model.json")
    save_model(model, out)
    print(f"wrote {out} ({model.basis.n_params} parameters)")
    return EXIT_OK


def cmd_steady(args) -> int:
    model = load_model(args.model)
    res = find_steady_state(model, args.tol, allow_degenerate=args.allow_degenerate)
    out = args.out or Path("state.bin")
    save_state(out, res.rho)
    _write_json(None, {"residual": res.residual, "gap_report": list(res.gap_report), "method": res.method,
                       "degenerate": res.degenerate, "state": str(out)})
    return EXIT_OK


def cmd_measure(args) -> int:
    model = load_model(args.model)
    record = _record_for(args, model)
    cs = constraint_set(model.n_sites, args.k_max, args.ordering_seed)
    k = KTemplate(cs, model.basis).evaluate(record)
    out = args.out or Path("measurement")
    record.save(str(out) + "_record.json")
    k.save(out)
    print(f"wrote {out}_record.json and K ({k.shape[0]} x {k.shape[1]}) to {out}.csv/.bin/.json")
    return EXIT_OK


def cmd_recover(args) -> int:
    k = ConstraintMatrix.load(args.K)
    if args.rows:
        k = k.head(args.rows)
    res = recover(k, args.epsilon)
    data = res.to_dict()
    if args.model:
        data["delta"] = reconstruction_error(res.c_hat, pack(load_model(args.model)))
    _write_json(args.out, data)
    return EXIT_OK


def cmd_recover_prior(args) -> int:
    model = load_model(args.model)
    record = _record_for(args, model)
    cs = constraint_set(model.n_sites, args.k_max, args.ordering_seed)
    k_l, b = build_prior_system(cs, model.basis, record, model.c_h)
    c_l, residual = recover_with_prior(k_l, b)
    full = np.concatenate([model.c_h, c_l])
    data = {"c_l": c_l.tolist(), "residual": residual, "delta_prior": reconstruction_error(full, pack(model))}
    if args.save_model:
        save_model(unpack(model.basis, full), args.save_model)
    _write_json(args.out, data)
    return EXIT_OK


def cmd_stitch(args) -> int:
    model = load_model(args.model)
    record = _record_for(args, model)
    layout = partition(model.n_sites, args.patch_size, args.stride)
    result = stitch(recover_patches(layout, model.basis, record, args.k_max))
    data = {"audit": result.audit, "labels": list(result.labels), "c": result.coefs.tolist(),
            "delta": stitched_error(result, model.basis, pack(model))}
    _write_json(args.out, data)
    return EXIT_OK


def cmd_dynamics(args) -> int:
    from .dynamics import local_distance_series, write_series_csv

    true_model = load_model(args.model)
    other = load_model(args.recovered)
    times = np.concatenate([[0.0], np.logspace(np.log10(args.t_min), np.log10(args.t_max), args.points)])
    rho0 = DensityMatrix.basis_state(args.initial or "0" * true_model.n_sites)
    series = local_distance_series(true_model, other, rho0, times, args.tol)
    out = args.out or Path("dynamics.csv")
    write_series_csv(out, series)
    print(f"wrote {out}; peak D_loc {series['D_loc_recovered'].max():.3g}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    overrides = {"threads": args.threads, "tol": args.tol}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.config:
        cfg = ExperimentConfig.from_toml(args.config, args.id, overrides)
    else:
        cfg = ExperimentConfig.build(args.id, overrides)
    out_dir = args.out or Path(cfg.out)
    result = run(cfg)
    paths = write_output(result, out_dir)
    print(f"{cfg.experiment}: {len(result.rows)} rows -> {paths['csv']}")
    print(json.dumps(result.summary, indent=1, sort_keys=True, default=str)[:4000])
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="steadylearn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a random model file")
    _common(p)
    p.add_argument("--ensemble", choices=["nn", "nn_jump", "loss_dephasing", "ising"], default="nn")
    p.add_argument("--sites", type=int, default=4)
    p.add_argument("--alpha-d", type=float, default=float(1 / np.sqrt(2)))
    p.add_argument("--alpha-l", type=float, default=0.5)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("steady", help="solve for the steady state and report the residual")
    _common(p)
    p.add_argument("model", type=Path)
    p.add_argument("--allow-degenerate", action="store_true")
    p.set_defaults(func=cmd_steady)

    def measurement_args(p):
        p.add_argument("model", type=Path)
        p.add_argument("--state", type=Path, help="steady-state file (solved if absent)")
        p.add_argument("--record", type=Path, help="existing measurement record (JSON)")
        p.add_argument("--epsilon", type=float, default=0.0)
        p.add_argument("--mode", choices=["combination", "pauli", "entry"], default="combination")
        p.add_argument("--k-max", type=int, default=3)
        p.add_argument("--ordering-seed", type=int, default=0)

    p = sub.add_parser("measure", help="build a measurement record and the constraint matrix")
    _common(p)
    measurement_args(p)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("recover", help="recover the coefficient vector from a saved K")
    _common(p)
    p.add_argument("K", type=Path, help="prefix of a saved constraint matrix")
    p.add_argument("--epsilon", type=float, default=0.0, help="noise level for the error estimate")
    p.add_argument("--rows", type=int, default=None, help="use only the first N constraints")
    p.add_argument("--model", type=Path, help="true model, to report the error")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("recover-prior", help="recover dissipation with the model's Hamiltonian known")
    _common(p)
    measurement_args(p)
    p.add_argument("--save-model", type=Path, help="write the recovered model")
    p.set_defaults(func=cmd_recover_prior)

    p = sub.add_parser("stitch", help="patch-wise recovery and stitching")
    _common(p)
    measurement_args(p)
    p.add_argument("--patch-size", type=int, default=6)
    p.add_argument("--stride", type=int, default=4)
    p.set_defaults(func=cmd_stitch)

    p = sub.add_parser("dynamics", help="local trace distance between two evolutions")
    _common(p)
    p.add_argument("model", type=Path)
    p.add_argument("recovered", type=Path)
    p.add_argument("--t-min", type=float, default=1e-2)
    p.add_argument("--t-max", type=float, default=10.0)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--initial", help="basis state such as 0000 (default all up)")
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("experiment", help="run a figure replica")
    _common(p)
    p.add_argument("id", choices=EXPERIMENTS)
    p.add_argument("--trials", type=int, default=None)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, SizeError, MissingObservable, FileNotFoundError, ValueError) as exc:
        if isinstance(exc, NUMERICAL_ERRORS):
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
