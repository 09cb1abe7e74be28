"""Command-line surface tying ingestion, selection, simulation, and imputation together.

Exit codes: 0 success, 2 usage/argument error, 3 data or validation error,
4 numerical failure. Set DRIVEBY_LOG=debug|info|warning to control verbosity.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, fileio
from .errors import DataError, NumericalError
from .figures import save_coverage_map, save_gain_trajectory, save_mre_curves, save_rho_sweep
from .greedy import lazy_greedy_select
from .harness import (
    METHODS,
    ExperimentConfig,
    build_dataset,
    child_seeds,
    coverage_classification,
    gain_row,
    run_mre_table,
    run_rho_sweep,
    run_selection_table,
    select_by_method,
    similarity_matrices,
    simulate_instance,
)
from .imputation import impute_vbmc_cs, impute_vbsf_cs, mre
from .objectives import make_objective
from .occupancy import TimeGrid, build_occupancy, load_gtfs, sampling_matrix, subsample_stops
from .similarity import distance_matrix, normalized_similarity

logger = logging.getLogger(__name__)


@dataclass
class RunManifest:
    """Everything needed to re-execute one command identically."""

    command: str
    config_hash: str
    seeds: dict
    inputs: dict
    version: str
    wall_time_s: float


def _config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, default=str).encode()).hexdigest()


def _write_manifest(out_dir: Path, command: str, config: dict, seeds: dict, inputs: list, started: float) -> None:
    digests = {str(p): fileio.sha256_of(p) for p in inputs}
    manifest = RunManifest(command, _config_hash(config), seeds, digests, __version__, time.time() - started)
    payload = dataclasses.asdict(manifest)
    payload["config"] = config
    (out_dir / f"manifest_{command}.json").write_text(json.dumps(payload, indent=2, default=str) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.from_file(args.config) if getattr(args, "config", None) else ExperimentConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        overrides["threads"] = args.threads
    if getattr(args, "out_dir", None) is not None:
        overrides["out_dir"] = args.out_dir
    return dataclasses.replace(config, **overrides) if overrides else config


def _similarity_for(args, tensor) -> np.ndarray:
    if args.similarity:
        S = fileio.read_similarity(args.similarity)
    elif args.locations:
        S = normalized_similarity(distance_matrix(fileio.read_locations(args.locations)))
    else:
        raise ValueError("provide --locations or --similarity for gain evaluation")
    if S.shape[0] != tensor.L:
        raise DataError(f"similarity is {S.shape[0]} x {S.shape[0]} but the tensor has L={tensor.L}")
    return S


def cmd_ingest(args) -> int:
    started = time.time()
    out = _out_dir(args)
    stops, visits = load_gtfs(args.gtfs_dir)
    locations = subsample_stops(stops, args.d_meters, shuffle_seed=args.shuffle_seed)
    grid = TimeGrid.from_hhmm(args.grid_start, args.grid_end, args.slot_minutes)
    tensor = build_occupancy(visits, stops, locations, grid, args.radius_meters)
    fileio.write_tensor(out / "tensor.csv", tensor)
    fileio.write_locations(out / "locations.csv", locations)
    print(f"L={tensor.L},T={tensor.T},B={tensor.B} density={tensor.density():.5f}")
    config = {
        "gtfs_dir": str(args.gtfs_dir),
        "d_meters": args.d_meters,
        "radius_meters": args.radius_meters,
        "grid": [args.grid_start, args.grid_end, args.slot_minutes],
        "shuffle_seed": args.shuffle_seed,
    }
    gtfs = Path(args.gtfs_dir)
    inputs = [gtfs / name for name in ("stops.txt", "trips.txt", "stop_times.txt")]
    _write_manifest(out, "ingest", config, {}, inputs, started)
    return 0


def cmd_select(args) -> int:
    started = time.time()
    out = _out_dir(args)
    tensor = fileio.read_tensor(args.tensor)
    S = _similarity_for(args, tensor)
    result = select_by_method(tensor, S, args.method, args.k, args.rho, args.seed)
    gains = gain_row(tensor, S, result.chosen)
    fileio.write_selection(out / "selection.json", result)
    print("chosen:", " ".join(str(b) for b in result.chosen))
    print(f"psc={gains['psc']:.3f} pc={gains['pc']:.3f} "
          f"fls={gains['fls_pct']:.3f} rfl(0.98)={gains['rfl098_pct']:.3f}")
    config = {"method": args.method, "rho": args.rho, "k": args.k, "seed": args.seed}
    _write_manifest(out, "select", config, {"random": args.seed}, [Path(args.tensor)], started)
    return 0


def cmd_simulate(args) -> int:
    started = time.time()
    config = _load_config(args)
    out = _out_dir(args)
    tensor, locations = build_dataset(config)
    _, G, H = similarity_matrices(locations, config, tensor.T)
    seeds = child_seeds(config.seed, ["instances"])
    truth = simulate_instance(G, H, config, seeds["instances"] + args.instance)
    fileio.write_matrix(out / "truth.csv", truth.values, meta=truth.provenance)
    fileio.write_similarity(out / "side_similarity.csv", G)
    fileio.write_tensor(out / "tensor.csv", tensor)
    fileio.write_locations(out / "locations.csv", locations)
    print(f"simulated {truth.values.shape[0]}x{truth.values.shape[1]} field "
          f"({truth.provenance['generator']}, instance {args.instance})")
    inputs = [Path(args.config)] if args.config else []
    _write_manifest(out, "simulate", config.to_dict(), seeds, inputs, started)
    return 0


def cmd_sample(args) -> int:
    started = time.time()
    out = _out_dir(args)
    truth, _ = fileio.read_matrix(args.truth)
    tensor = fileio.read_tensor(args.tensor)
    if truth.shape != (tensor.L, tensor.T):
        raise DataError(f"truth is {truth.shape} but the tensor grid is {(tensor.L, tensor.T)}")
    selection = fileio.read_selection(args.selection)
    theta = sampling_matrix(tensor, selection.chosen)
    from .imputation import ObservationSet

    obs = ObservationSet.from_sampling(truth, theta)
    fileio.write_observations(out / "observations.csv", obs)
    print(f"kept {len(obs)} of {tensor.L * tensor.T} entries "
          f"({len(obs.cold_rows())} cold rows) from {len(selection.chosen)} buses")
    _write_manifest(out, "sample", {"k": selection.k}, {},
                    [Path(args.truth), Path(args.tensor), Path(args.selection)], started)
    return 0


def cmd_impute(args) -> int:
    started = time.time()
    out = _out_dir(args)
    obs = fileio.read_observations(args.observations)
    G = fileio.read_similarity(args.similarity)
    if G.shape[0] != obs.L:
        raise DataError(f"similarity is {G.shape[0]} x {G.shape[0]} but observations have L={obs.L}")
    truth = None
    if args.truth:
        truth, _ = fileio.read_matrix(args.truth)
        if truth.shape != (obs.L, obs.T):
            raise DataError(f"truth is {truth.shape} but observations are {(obs.L, obs.T)}")
    fn = impute_vbmc_cs if args.imputer == "vbmc_cs" else impute_vbsf_cs
    estimate = fn(obs, G, args.rank, max_iters=args.max_iters, tol=args.tol,
                  seed=args.seed, side_weight=args.side_weight, truth=truth)
    prov = estimate.provenance
    fileio.write_matrix(out / "estimate.csv", estimate.values, meta=prov)
    rows = []
    for i, obj in enumerate(prov["objective_trajectory"]):
        row = [i + 1, repr(obj)]
        if truth is not None:
            row.append(repr(prov["mre_trajectory"][i]))
        rows.append(row)
    header = ["iteration", "objective"] + (["mre"] if truth is not None else [])
    fileio.write_table(out / "convergence.csv", header, rows)
    msg = f"{args.imputer}: {prov['iterations']} iterations, converged={prov['converged']}"
    if truth is not None:
        msg += f", mre={prov['mre_trajectory'][-1] * 100.0:.3f}%"
    print(msg)
    config = {"imputer": args.imputer, "rank": args.rank, "max_iters": args.max_iters,
              "tol": args.tol, "seed": args.seed, "side_weight": args.side_weight}
    inputs = [Path(args.observations), Path(args.similarity)] + ([Path(args.truth)] if args.truth else [])
    _write_manifest(out, "impute", config, {"init": args.seed}, inputs, started)
    return 0


def cmd_evaluate(args) -> int:
    started = time.time()
    out = _out_dir(args)
    truth, _ = fileio.read_matrix(args.truth)
    estimate, _ = fileio.read_matrix(args.estimate)
    if truth.shape != estimate.shape:
        raise DataError(f"truth is {truth.shape} but estimate is {estimate.shape}")
    value = mre(truth, estimate)
    print(f"mre={value!r} ({100.0 * value:.3f}%)")
    (out / "evaluation.json").write_text(json.dumps({"mre": value, "mre_pct": 100.0 * value}, indent=2) + "\n")
    _write_manifest(out, "evaluate", {}, {}, [Path(args.truth), Path(args.estimate)], started)
    return 0


def cmd_report(args) -> int:
    started = time.time()
    config = _load_config(args)
    out = _out_dir(args)
    tensor, locations = build_dataset(config)
    S, G, _ = similarity_matrices(locations, config, tensor.T)
    fileio.write_tensor(out / "tensor.csv", tensor)
    fileio.write_locations(out / "locations.csv", locations)

    logger.info("report: selection table")
    sel_rows = run_selection_table(config, tensor, locations)
    fileio.write_table(
        out / "selection_table.csv",
        ["method", "k", "psc", "pc", "fls_pct", "rfl098_pct"],
        [[r["method"], r["k"], repr(r["psc"]), repr(r["pc"]), repr(r["fls_pct"]), repr(r["rfl098_pct"])]
         for r in sel_rows],
    )

    logger.info("report: imputation sweep (%d instances)", config.sim_instances)
    mre_out = run_mre_table(config, tensor, locations)
    fileio.write_table(
        out / "mre_table.csv",
        ["method", "k", "mre_pct_mean", "mre_pct_std"],
        [[r["method"], r["k"], repr(r["mre_pct_mean"]), repr(r["mre_pct_std"])] for r in mre_out["rows"]],
    )
    inst_rows = []
    for i, inst in enumerate(mre_out["per_instance"]):
        for (method, k), value in sorted(inst.items()):
            inst_rows.append([i, method, k, repr(value)])
    fileio.write_table(out / "mre_instances.csv", ["instance", "method", "k", "mre_pct"], inst_rows)
    save_mre_curves(mre_out["rows"], out / "mre_curves.png", title=f"imputer={config.imputer}")

    logger.info("report: rho sweep")
    sweep = run_rho_sweep(config)
    fileio.write_table(
        out / "rho_sweep.csv",
        ["rho", "mean_psc", "mcl_mean_psc"],
        [[rho, repr(m), repr(sweep["mcl_mean_psc"])] for rho, m in zip(sweep["rhos"], sweep["mean_psc"])],
    )
    save_rho_sweep(sweep, out / "rho_psc.png", title=f"k={sweep['k']}")

    logger.info("report: coverage classification")
    k_cov = max(config.ks)
    rfl_sel = select_by_method(tensor, S, "rfl", k_cov, config.rho, 0)
    mc_sel = select_by_method(tensor, S, "mc", k_cov, config.rho, 0)
    theta_rfl = sampling_matrix(tensor, rfl_sel.chosen)
    theta_mc = sampling_matrix(tensor, mc_sel.chosen)
    for thr in config.coverage_thresholds:
        classes = coverage_classification(theta_rfl, theta_mc, thr, locations)
        fileio.write_table(
            out / f"coverage_thr{thr}.csv",
            ["lat", "lon", "label"],
            [[repr(c.lat), repr(c.lon), c.label] for c in classes],
        )
        save_coverage_map(classes, out / f"coverage_thr{thr}.png",
                          title=f"rfl vs mc coverage, threshold {thr}")
    save_gain_trajectory(rfl_sel, out / "gain_rfl.png", title=f"rfl rho={config.rho}, k={k_cov}")

    seeds = child_seeds(config.seed, ["fleet", "random_baseline", "instances", "imputer", "rho_sweep"])
    inputs = [Path(args.config)] if args.config else []
    _write_manifest(out, "report", config.to_dict(), seeds, inputs, started)
    print(f"report written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="driveby", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"driveby {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="rasterize a GTFS feed into an occupancy tensor")
    p.add_argument("--gtfs-dir", required=True)
    p.add_argument("--d-meters", type=float, default=500.0, help="min stop separation (default 500)")
    p.add_argument("--radius-meters", type=float, default=500.0, help="coverage radius (default 500)")
    p.add_argument("--grid-start", default="06:00")
    p.add_argument("--grid-end", default="22:00")
    p.add_argument("--slot-minutes", type=int, default=10)
    p.add_argument("--shuffle-seed", type=int, default=None, help="shuffle stop order before subsampling")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("select", help="pick k buses by a selection method")
    p.add_argument("--tensor", required=True)
    p.add_argument("--locations", default=None)
    p.add_argument("--similarity", default=None)
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--rho", type=float, default=0.98)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0, help="seed for the random baseline")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("simulate", help="generate one synthetic ground-truth field")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--instance", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sample", help="mask a truth matrix by a selection's coverage")
    p.add_argument("--truth", required=True)
    p.add_argument("--tensor", required=True)
    p.add_argument("--selection", required=True)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("impute", help="reconstruct a dense map from observations")
    p.add_argument("--observations", required=True)
    p.add_argument("--similarity", required=True)
    p.add_argument("--imputer", choices=("vbmc_cs", "vbsf_cs"), default="vbmc_cs")
    p.add_argument("--rank", type=int, default=8)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--side-weight", type=float, default=1.0)
    p.add_argument("--truth", default=None, help="optional truth matrix for a convergence log")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("evaluate", help="relative error between truth and estimate")
    p.add_argument("--truth", required=True)
    p.add_argument("--estimate", required=True)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="full desk-scale evaluation: tables and figures")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out-dir", default="report_out")
    p.set_defaults(func=cmd_report)

    return parser


def _setup_logging() -> None:
    level_name = os.environ.get("DRIVEBY_LOG", "warning").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
