"""Command-line entry point.

    lezbackcast simulate  [--no-lez] [--reference] [--control schedule.csv]
    lezbackcast optimize  (--beta B | --cap TCO2)
    lezbackcast pareto
    lezbackcast verify
    lezbackcast validate

Exit status: 0 success, 1 validation failure, 2 infeasible optimisation
(outputs still written), 64 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .errors import LezError, ScenarioError
from .fleet import simulate
from .ga import (
    EmissionTarget,
    GaConfig,
    OptimizationOutcome,
    check_outcome,
    evolve,
    no_lez_scenario,
    pareto_sweep,
    reference_control,
)
from .oracle import TinyInstance, enumerate_optimal
from .policy import relaxing_control, validate_control
from .results import ParetoPoint, ResultsBundle, read_schedule, write_results
from .scenario import Scenario, load_scenario

log = logging.getLogger("lezbackcast")

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits 2 by default
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--scenario", default=None, help="scenario file or bundled name (idf_fixture, tiny_instance)")
    common.add_argument("--out", default=None, help="output directory (default: results/<command>)")
    common.add_argument("-v", "--verbose", action="store_true")

    ga = _Parser(add_help=False)
    defaults = GaConfig()
    ga.add_argument("--seed", type=int, default=defaults.rng_seed)
    ga.add_argument("--pop", type=int, default=defaults.population_size)
    ga.add_argument("--gens", type=int, default=defaults.generations)
    ga.add_argument("--cx", type=float, default=defaults.crossover_rate)
    ga.add_argument("--mut", type=float, default=defaults.mutation_rate)
    ga.add_argument("--workers", type=int, default=defaults.workers, help="processes for fitness evaluation")

    parser = _Parser(prog="lezbackcast", description="LEZ ban-schedule backcasting")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="forward runs under fixed schedules")
    p.add_argument("--no-lez", action="store_true", help="bans never existed")
    p.add_argument("--reference", action="store_true", help="keep existing bans, add none")
    p.add_argument("--control", type=Path, help="schedule.csv whose first scenario is replayed")

    p = sub.add_parser("optimize", parents=[common, ga], help="optimise one emission target")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--beta", type=float, help="reduction fraction against the reference terminal emissions")
    g.add_argument("--cap", type=float, help="terminal cap in tCO2")

    p = sub.add_parser("pareto", parents=[common, ga], help="sweep the scenario's targets")
    p.add_argument("--betas", type=float, nargs="+", help="override the scenario's reduction fractions")

    p = sub.add_parser("verify", parents=[common, ga], help="GA against exhaustive search on a tiny instance")
    p.add_argument("--runs", type=int, default=20, help="number of GA seeds")
    p.add_argument("--beta", type=float, help="reduction fraction (default: the instance's first target)")

    sub.add_parser("validate", parents=[common], help="check a scenario file")
    return parser


def _config(args) -> GaConfig:
    return GaConfig(
        population_size=args.pop,
        generations=args.gens,
        crossover_rate=args.cx,
        mutation_rate=args.mut,
        rng_seed=args.seed,
        workers=args.workers,
    )


def _manifest(args, scenario: Scenario, config: GaConfig | None = None, **extra) -> dict:
    options = {
        k: (str(v) if isinstance(v, Path) else v)
        for k, v in sorted(vars(args).items())
        if k not in ("out", "verbose", "workers", "command")
    }
    doc = {
        "command": args.command,
        "options": options,
        "scenario": {
            "name": scenario.name,
            "sha256": scenario.provenance.get("sha256"),
            "provenance": dict(scenario.provenance),
            "synthetic": scenario.synthetic,
        },
        "versions": {"lezbackcast": __version__, "numpy": np.__version__, "python": platform.python_version()},
    }
    if config is not None:
        doc["ga_config"] = {k: v for k, v in asdict(config).items() if k != "workers"}
        doc["seed"] = config.rng_seed
    doc.update(extra)
    return doc


def _target_doc(t: EmissionTarget) -> dict:
    return {"beta": t.beta, "cap_tCO2": t.cap}


def _outcome_doc(o: OptimizationOutcome) -> dict:
    return {
        **_target_doc(o.target),
        "R_total": o.objective_R,
        "E_T_tCO2": o.terminal_E,
        "feasible": o.feasible,
        "evaluations": o.evaluations,
        "seed": o.seed,
        "adopted_from_beta": o.adopted_from,
        "control": o.best_control.tolist(),
    }


def _baselines(scenario: Scenario):
    no_lez = simulate(no_lez_scenario(scenario), relaxing_control(scenario.zones, scenario.horizon))
    reference = simulate(scenario, reference_control(scenario))
    return no_lez, reference


def _control_from_schedule(path: Path, scenario: Scenario) -> np.ndarray:
    if not path.exists():
        raise UsageError(f"control file {path} not found")
    schedules = read_schedule(path)
    if not schedules:
        raise UsageError(f"{path} holds no schedule rows")
    _, I = next(iter(schedules.values()))
    if I.shape != (scenario.zones, scenario.horizon + 1):
        raise ScenarioError(str(path), f"schedule shape {I.shape} does not match the scenario")
    if tuple(I[:, 0]) != scenario.initial_I:
        raise ScenarioError(str(path), "first year must equal the scenario's initial ban ages")
    return I[:, :-1] - I[:, 1:]


def cmd_simulate(args, scenario: Scenario, out: Path) -> int:
    wanted = {"no_lez": args.no_lez, "reference": args.reference}
    if not any(wanted.values()) and args.control is None:
        wanted = {"no_lez": True, "reference": True}
    no_lez, reference = _baselines(scenario)
    traces = {k: v for k, v in (("no_lez", no_lez), ("reference", reference)) if wanted.get(k)}
    if args.control is not None:
        J = _control_from_schedule(args.control, scenario)
        report = validate_control(J, scenario.initial_I, scenario.topology, scenario.max_age)
        if not report.feasible:
            for v in report.violations:
                print(f"violation: {v.kind} zone {v.zone + 1} t={v.step}: {v.detail}", file=sys.stderr)
            return EXIT_INVALID
        traces["custom"] = simulate(scenario, J)
    bundle = ResultsBundle(
        scenario.max_age,
        traces,
        schedules=traces,
        manifest=_manifest(
            args,
            scenario,
            runs={k: {"R_total": t.total_disposals, "E_T_tCO2": t.terminal_emissions} for k, t in traces.items()},
        ),
    )
    write_results(bundle, out)
    for label, t in traces.items():
        print(f"{label}: E(T)={t.terminal_emissions / 1e6:.6g} MtCO2  R={t.total_disposals / 1e6:.6g} Mveh")
    return EXIT_OK


def _emit_outcomes(args, scenario, config, outcomes, labels, reference, no_lez, out: Path) -> int:
    problems = {label: check_outcome(scenario, o) for label, o in zip(labels, outcomes)}
    traces = {"no_lez": no_lez, "reference": reference}
    traces.update({label: o.trace for label, o in zip(labels, outcomes)})
    schedules = {"reference": reference}
    schedules.update({label: o.trace for label, o in zip(labels, outcomes)})
    bundle = ResultsBundle(
        scenario.max_age,
        traces,
        schedules=schedules,
        pareto=tuple(ParetoPoint(o.target.beta, o.objective_R, o.terminal_E, o.feasible) for o in outcomes),
        manifest=_manifest(
            args,
            scenario,
            config,
            reference={"R_total": reference.total_disposals, "E_T_tCO2": reference.terminal_emissions},
            outcomes={label: _outcome_doc(o) for label, o in zip(labels, outcomes)},
        ),
    )
    write_results(bundle, out)
    for label, o in zip(labels, outcomes):
        flag = "feasible" if o.feasible else "INFEASIBLE"
        print(
            f"{label} beta={o.target.beta:.4g}: R={o.objective_R / 1e6:.6g} Mveh  "
            f"E(T)={o.terminal_E / 1e6:.6g} MtCO2 (cap {o.target.cap / 1e6:.6g}) {flag}"
        )
    bad = {k: v for k, v in problems.items() if v}
    if bad:
        for k, v in bad.items():
            print(f"{k}: {'; '.join(v)}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK if all(o.feasible for o in outcomes) else EXIT_INFEASIBLE


def cmd_optimize(args, scenario: Scenario, out: Path) -> int:
    config = _config(args)
    no_lez, reference = _baselines(scenario)
    ref_E = reference.terminal_emissions
    if args.cap is not None:
        target = EmissionTarget.from_cap(args.cap, ref_E)
    else:
        beta = args.beta if args.beta is not None else scenario.targets[0]
        target = EmissionTarget.from_beta(beta, ref_E)
    outcome = evolve(scenario, target, config)
    return _emit_outcomes(args, scenario, config, [outcome], ["optimized"], reference, no_lez, out)


def cmd_pareto(args, scenario: Scenario, out: Path) -> int:
    config = _config(args)
    no_lez, reference = _baselines(scenario)
    betas = args.betas if args.betas else scenario.targets
    targets = [EmissionTarget.from_beta(b, reference.terminal_emissions) for b in betas]
    outcomes = pareto_sweep(scenario, targets, config)
    labels = [f"T{i + 1}" for i in range(len(outcomes))]
    return _emit_outcomes(args, scenario, config, outcomes, labels, reference, no_lez, out)


def cmd_verify(args, scenario: Scenario, out: Path) -> int:
    config = _config(args)
    reference = simulate(scenario, reference_control(scenario))
    beta = args.beta if args.beta is not None else scenario.targets[0]
    target = EmissionTarget.from_beta(beta, reference.terminal_emissions)
    oracle = enumerate_optimal(TinyInstance(scenario), target)
    print(
        f"oracle: {oracle.distinct} distinct controls of {oracle.candidates}, "
        f"optimum R={oracle.optimal_R:.10g}, {len(oracle.argmin)} minimiser(s)"
    )
    runs = []
    for k in range(args.runs):
        o = evolve(scenario, target, replace(config, rng_seed=config.rng_seed + k))
        runs.append(o)
    matched = sum(1 for o in runs if o.feasible and o.objective_R == oracle.optimal_R)
    feasible = sum(1 for o in runs if o.feasible)
    print(f"GA matched oracle {matched}/{args.runs} seeds ({feasible}/{args.runs} feasible)")
    report = {
        "oracle": {"optimal_R": oracle.optimal_R, "argmin": [g.tolist() for g in oracle.argmin], "distinct": oracle.distinct},
        "runs": [{"seed": o.seed, "R_total": o.objective_R, "feasible": o.feasible} for o in runs],
        "matched": matched,
        "feasible": feasible,
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "verify.json").write_text(
        json.dumps({**_manifest(args, scenario, config, target=_target_doc(target)), "report": report}, indent=2) + "\n",
        encoding="utf-8",
    )
    need = args.runs - args.runs // 20
    ok = matched >= need and (feasible == args.runs or not oracle.feasible)
    return EXIT_OK if ok else EXIT_INVALID


def cmd_validate(args, scenario: Scenario, out: Path) -> int:
    prov = scenario.provenance
    print(
        f"{scenario.name}: Z={scenario.zones} A={scenario.max_age} T={scenario.horizon} "
        f"years {scenario.base_year}-{scenario.last_year}; I0={list(scenario.initial_I)} "
        f"D={list(scenario.topology.max_slope)}; behavior {prov.get('behavior')}, "
        f"age distribution {prov.get('age_distribution')}; sha256 {prov.get('sha256')}"
    )
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "pareto": cmd_pareto,
    "verify": cmd_verify,
    "validate": cmd_validate,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    default_scenario = "tiny_instance" if args.command == "verify" else "idf_fixture"
    out = Path(args.out) if args.out else Path("results") / args.command
    try:
        scenario = load_scenario(args.scenario or default_scenario)
        return COMMANDS[args.command](args, scenario, out)
    except (FileNotFoundError, UsageError) as exc:
        print(f"lezbackcast: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LezError as exc:
        print(f"lezbackcast: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
