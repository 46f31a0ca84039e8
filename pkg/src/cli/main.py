"""
Command-line interface: spectrum, diagnose, sweep, es-scan, winding-trace and validate.

Exit codes: 0 success, 1 numerical failure, 2 validation failure, 3 sweep finished with failed or
degraded points, or was interrupted.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from ..core.errors import LabError, MemoryBudgetExceeded, PlanValidationError, SpecValidationError
from ..core.model import SPEC_KEYS, ModelSpec, build_hamiltonian, load_spec, spec_from_mapping, spec_to_text
from ..core.settings import LabSettings, load_settings, parse_angle, validate_settings
from ..core.spectral import decompose, log_imag_extrema, realness
from ..diagnostics.entanglement import es_vs_energy_scan
from ..diagnostics.level_stats import adjacent_gap_ratio
from ..diagnostics.localization import profile
from ..diagnostics.records import DIAGNOSTICS, evaluate_point
from ..diagnostics.topology import WINDING_CONVENTION, winding_trace
from ..exports import (es_scan_frame, histogram_frame, per_state_frame, spectrum_frame, winding_trace_frame, write_csv,
                       write_eigenvector_blob, write_json)
from ..sweep.plan import load_plan
from ..sweep.runner import run_sweep
from .validate import run_validation

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVALID = 2
EXIT_PARTIAL = 3


def _add_spec_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("model")
    group.add_argument("--spec", type=str, help="key=value spec file; flags below override it")
    group.add_argument("--kind", type=str, choices=["Model1", "Model2", "Model3", "AbelianScalar"])
    group.add_argument("--J", type=float)
    group.add_argument("--V", type=float)
    group.add_argument("--phi", type=parse_angle, help="number or pi expression, e.g. pi/10")
    group.add_argument("--beta", type=float)
    group.add_argument("--gamma", type=float)
    group.add_argument("--alpha-p", dest="alpha_p", type=int)
    group.add_argument("--alpha-q", dest="alpha_q", type=int)
    group.add_argument("--L", type=int)
    group.add_argument("--boundary", type=str, choices=["PBC", "OBC"])
    group.add_argument("--flux", type=parse_angle)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nhqc-lab",
                                     description="Non-Abelian non-Hermitian quasicrystal laboratory")
    parser.add_argument("--config", type=str, default=None, help="settings JSON (default config/lab_config.json)")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one settings entry; repeatable")
    parser.add_argument("--seed", type=int, default=None,
                        help="seed for the optional pairing perturbation (default 0; overrides a plan's seed)")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--quiet", action="store_true", help="log to file only")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="eigenvalues of one spec to CSV")
    _add_spec_arguments(p)
    p.add_argument("--out", required=True)
    p.add_argument("--per-state", action="store_true", help="add ipr, npr and class columns")
    p.add_argument("--vectors", type=str, help="also write the eigenvector blob here")

    p = sub.add_parser("diagnose", help="all diagnostics for one spec")
    _add_spec_arguments(p)
    p.add_argument("--diagnostics", type=str, default=",".join(DIAGNOSTICS))
    p.add_argument("--base-energy", type=float, nargs="+", metavar="E",
                   help="winding base energies E1 [E2] (default: selected from this spec)")
    p.add_argument("--n-theta", type=int)
    p.add_argument("--out", type=str, help="write the record as JSON")
    p.add_argument("--histogram", type=str, metavar="PATH", help="write the gap-ratio histogram as CSV")
    p.add_argument("--bins", type=int, default=50)

    p = sub.add_parser("sweep", help="run a sweep plan")
    p.add_argument("plan")
    p.add_argument("--workers", type=int)
    p.add_argument("--output", type=str, help="override the plan's output stem")
    p.add_argument("--fresh", action="store_true", help="discard an existing checkpoint")
    p.add_argument("--no-progress", action="store_true")

    p = sub.add_parser("es-scan", help="entanglement spectrum versus Re E filling cutoff")
    _add_spec_arguments(p)
    p.add_argument("--n-cutoffs", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("winding-trace", help="accumulated determinant phase over the flux")
    _add_spec_arguments(p)
    p.add_argument("--base-energy", type=float, required=True)
    p.add_argument("--base-energy-imag", type=float, default=0.0)
    p.add_argument("--n-theta", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("validate", help="run the oracle and invariant suite")
    p.add_argument("--n-random", type=int, default=100)
    return parser


def _seed(args: argparse.Namespace) -> int:
    return 0 if args.seed is None else args.seed


def spec_from_args(args: argparse.Namespace) -> ModelSpec:
    values: Dict[str, Any] = {}
    if args.spec:
        base = load_spec(args.spec)
        values.update({k: getattr(base, k) for k in SPEC_KEYS})
        values["kind"] = base.kind.value
        values["boundary"] = base.boundary.value
        if args.L is not None and args.alpha_p is None:
            values["alpha_p"] = values["alpha_q"] = None
    for key in SPEC_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            values[key] = value
    return spec_from_mapping(values)


def settings_from_args(args: argparse.Namespace) -> LabSettings:
    settings = load_settings(args.config, args.overrides)
    updates: Dict[str, Dict[str, Any]] = {}
    if getattr(args, "n_theta", None):
        updates.setdefault("topology", {})["n_theta"] = args.n_theta
    if getattr(args, "n_cutoffs", None):
        updates.setdefault("entanglement", {})["n_cutoffs"] = args.n_cutoffs
    if getattr(args, "workers", None):
        updates.setdefault("sweep", {})["workers"] = args.workers
    if not updates:
        return settings
    data = settings.model_dump()
    for section, values in updates.items():
        data[section].update(values)
    return validate_settings(data)


def cmd_spectrum(args: argparse.Namespace, settings: LabSettings) -> int:
    spec = spec_from_args(args)
    dec = decompose(build_hamiltonian(spec), settings.spectral, seed=_seed(args))
    if args.per_state:
        frame = per_state_frame(dec, profile(dec),
                                settings.localization.ipr_threshold_factor / dec.dim)
    else:
        frame = spectrum_frame(dec)
    write_csv(frame, Path(args.out))
    if args.vectors:
        write_eigenvector_blob(dec, Path(args.vectors))
    print(f"{dec.dim} eigenvalues written to {args.out}")
    return EXIT_OK


def cmd_diagnose(args: argparse.Namespace, settings: LabSettings) -> int:
    spec = spec_from_args(args)
    diagnostics = [d.strip() for d in args.diagnostics.split(",") if d.strip()]
    unknown = [d for d in diagnostics if d not in DIAGNOSTICS]
    if unknown:
        raise SpecValidationError("diagnostics", f"unknown diagnostics {unknown}; choose from {list(DIAGNOSTICS)}")
    bases = None
    if args.base_energy:
        bases = (args.base_energy[0], args.base_energy[-1])
    evaluation = evaluate_point(spec, diagnostics, settings, base_energies=bases, seed=_seed(args),
                                keep_decomposition=True)
    dec = evaluation.decomposition
    row = evaluation.record.to_row()
    log_imag_max, log_imag_min = log_imag_extrema(realness(dec, tol_imag_rel=settings.spectral.tol_imag_rel))
    row["log10_imag_max"], row["log10_imag_min"] = log_imag_max, log_imag_min
    print(spec_to_text(spec), end="")
    print(json.dumps(row, indent=2))
    if args.histogram:
        agr = adjacent_gap_ratio(dec, settings.level_stats.degenerate_rel)
        write_csv(histogram_frame(agr, bins=args.bins), Path(args.histogram))
        print(f"gap-ratio histogram ({len(agr.g_values)} ratios) written to {args.histogram}")
    if args.out:
        write_json({"spec": spec.model_dump(mode="json"), "record": row,
                    "winding_convention": WINDING_CONVENTION,
                    "wall_time": evaluation.record.wall_time}, Path(args.out))
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, settings: LabSettings) -> int:
    plan = load_plan(args.plan)
    if args.output:
        plan = plan.model_copy(update={"output": args.output})
    if args.seed is not None:
        plan = plan.model_copy(update={"seed": args.seed})
    if args.fresh:
        checkpoint = plan.paths()["checkpoint"]
        if checkpoint.exists():
            logger.info(f"Removing checkpoint {checkpoint}")
            checkpoint.unlink()
    result = run_sweep(plan, settings, workers=args.workers, progress=not args.no_progress)
    print(f"{len(result.records)} rows written to {plan.paths()['csv']}")
    if not result.complete:
        logger.warning(f"{result.n_errors} points failed and {result.n_degraded} lost a diagnostic; "
                       f"see the status and error columns")
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_es_scan(args: argparse.Namespace, settings: LabSettings) -> int:
    spec = spec_from_args(args)
    dec = decompose(build_hamiltonian(spec), settings.spectral, seed=_seed(args))
    scan = es_vs_energy_scan(dec, n_cutoffs=args.n_cutoffs, settings=settings.entanglement)
    write_csv(es_scan_frame(scan), Path(args.out))
    print(f"{len(scan)} cutoffs written to {args.out}")
    return EXIT_OK


def cmd_winding_trace(args: argparse.Namespace, settings: LabSettings) -> int:
    spec = spec_from_args(args)
    base = complex(args.base_energy, args.base_energy_imag)
    trace = winding_trace(spec, base, settings.topology, workers=settings.sweep.workers)
    write_csv(winding_trace_frame(trace), Path(args.out))
    print(f"winding {trace.winding} around E={base} ({trace.n_points} flux points) written to {args.out}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace, settings: LabSettings) -> int:
    results = run_validation(settings, n_random=args.n_random, seed=_seed(args))
    for result in results:
        print(f"{'PASS' if result.passed else 'FAIL'}  {result.name}: {result.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVALID


COMMANDS: Dict[str, Callable[[argparse.Namespace, LabSettings], int]] = {
    "spectrum": cmd_spectrum,
    "diagnose": cmd_diagnose,
    "sweep": cmd_sweep,
    "es-scan": cmd_es_scan,
    "winding-trace": cmd_winding_trace,
    "validate": cmd_validate,
}


def main(argv: Optional[List[str]] = None,
         configure_logging: Optional[Callable[[str, bool], None]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if configure_logging is not None:
        configure_logging(args.log_level, args.quiet)

    try:
        settings = settings_from_args(args)
        return COMMANDS[args.command](args, settings)
    except (SpecValidationError, PlanValidationError, MemoryBudgetExceeded) as e:
        logger.error(f"Validation failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except LabError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR
    except KeyboardInterrupt:
        logger.info("Interrupted; completed points stay in the checkpoint")
        return EXIT_PARTIAL
