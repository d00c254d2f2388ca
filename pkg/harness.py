"""
Cooperative data exchange: command-line harness and experiment sweeps.

Subcommands:
- gen           random (or canned) instance -> instance JSON
- bounds        instance -> bounds report JSON
- ie / leader / uncoded / random-order
                instance -> verified schedule JSON
- oracle        instance -> exact optimum JSON, or the bound bracket
- verify        instance + schedule -> replay report
- simulate      instance + schedule -> per-client decode report
- experiment    config -> CSV of averaged curves (+ .meta.json sidecar)

Exit codes: 0 ok, 1 usage error, 2 verification failure, 3 oracle budget exhausted.
"""
import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Dict, Optional, Tuple

import numpy as np
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

from bounds import bounds_report, lower_bound, upper_bound_leader
from errors import (CapacityError, CDEError, ExperimentInvariantError,
                    ParseError, UsageError, VerificationError, explain,
                    exit_code_for)
from field import FieldSpec, smallest_prime_geq
from instance import (DEFAULT_DENSITY, normalize_unique, parse, random_instance,
                      serialize)
from oracle import DEFAULT_BUDGET, optimal_tau
from scenarios import get_scenario
from schemes import (SCHEME_TYPES, get_scheme_info, random_average_exact,
                     random_average_mc, random_tau, run_ie,
                     schedule_from_document, simulate_payloads, verify_schedule)
import schemes
import storage

logger = logging.getLogger(__name__)

LOG_LEVEL = os.environ.get("CDE_LOG_LEVEL", "INFO").upper()

CURVES = ("lower", "ie", "upper_leader", "trivial", "random_exact", "random_mc")

CSV_HEADER = [
    "n", "k", "trials", "u_mean",
    "lower_mean", "lower_sd",
    "ie_mean", "ie_sd",
    "upper_leader_mean", "upper_leader_sd",
    "trivial",
    "random_mean", "random_sd",
]

# default oracle envelope; larger instances need an explicit --budget
ORACLE_MAX_N, ORACLE_MAX_K, ORACLE_MAX_Q = 5, 4, 3

RANDOM_MODEL = "independent Bernoulli(density) membership; uncovered packets assigned to one uniform client"


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


# config key -> (description, check) for JSON config documents
_CONFIG_CHECKS = {
    "k": ("an integer", _is_int),
    "n_values": ("a list of integers", lambda v: isinstance(v, list) and all(_is_int(x) for x in v)),
    "trials": ("an integer", _is_int),
    "density": ("a number", _is_number),
    "seed": ("an integer", _is_int),
    "field_q": ("an integer or null", lambda v: v is None or _is_int(v)),
    "schemes": ("a list of curve names", lambda v: isinstance(v, list) and all(isinstance(x, str) for x in v)),
    "normalize": ("true or false", lambda v: isinstance(v, bool)),
    "mc_samples": ("an integer", _is_int),
    "workers": ("an integer", _is_int),
}


# ─── EXPERIMENTS ─────────────────────────────────────────────────────

@dataclass(frozen=True)
class ExperimentConfig:
    k: int = 3
    n_values: Tuple[int, ...] = (10, 20, 30, 40, 50)
    trials: int = 100
    density: float = DEFAULT_DENSITY
    seed: int = 2010
    # None: smallest prime >= k
    field_q: Optional[int] = None
    schemes: Tuple[str, ...] = ("lower", "ie", "upper_leader", "trivial", "random_exact")
    normalize: bool = True
    mc_samples: int = 200
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "n_values", tuple(self.n_values))
        object.__setattr__(self, "schemes", tuple(self.schemes))

    @property
    def field(self):
        return FieldSpec(self.field_q if self.field_q is not None else smallest_prime_geq(self.k))

    def validate(self):
        if self.k < 1:
            raise UsageError(f"k must be >= 1, got {self.k}")
        if not self.n_values or any(n < 1 for n in self.n_values):
            raise UsageError(f"n values must be positive, got {list(self.n_values)}")
        if self.trials < 1:
            raise UsageError(f"trials must be >= 1, got {self.trials}")
        if not 0 < self.density <= 1:
            raise UsageError(f"density must lie in (0, 1], got {self.density}")
        unknown = [s for s in self.schemes if s not in CURVES]
        if unknown:
            raise UsageError(f"Unknown curves {unknown}; choose from {list(CURVES)}")
        if "random_mc" in self.schemes and self.mc_samples < 2:
            raise UsageError(f"mc_samples must be >= 2, got {self.mc_samples}")
        if self.workers < 1:
            raise UsageError(f"workers must be >= 1, got {self.workers}")
        if self.field.q < self.k:
            raise UsageError(f"field_q={self.field.q} is smaller than k={self.k}")
        return self

    @classmethod
    def from_dict(cls, doc):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ParseError(f"Unknown config keys {unknown}", "$")
        for key, value in doc.items():
            expected, ok = _CONFIG_CHECKS[key]
            if not ok(value):
                raise ParseError(f"'{key}' must be {expected}, got {value!r}", key)
        return cls(**doc)

    @classmethod
    def from_file(cls, path):
        try:
            doc = json.loads(storage.read_text(path))
        except json.JSONDecodeError as e:
            raise ParseError(f"Invalid JSON in {path}: {e.msg}", f"line {e.lineno} column {e.colno}")
        if not isinstance(doc, dict):
            raise ParseError(f"Config {path} must be a JSON object", "$")
        try:
            return cls.from_dict(doc)
        except ParseError as e:
            raise ParseError(f"Config {path}: {e}") from e


@dataclass(frozen=True)
class ExperimentRow:
    n: int
    k: int
    trials: int
    u_mean: float
    means: Dict[str, float]
    sds: Dict[str, float]

    def cells(self):
        def fmt(x):
            return "" if x is None else f"{x:.4f}"

        random_key = next((c for c in ("random_exact", "random_mc") if c in self.means), None)
        return [
            str(self.n), str(self.k), str(self.trials), fmt(self.u_mean),
            fmt(self.means.get("lower")), fmt(self.sds.get("lower")),
            fmt(self.means.get("ie")), fmt(self.sds.get("ie")),
            fmt(self.means.get("upper_leader")), fmt(self.sds.get("upper_leader")),
            str(self.n) if "trivial" in self.means else "",
            fmt(self.means.get(random_key)), fmt(self.sds.get(random_key)),
        ]


def trial_seed(master, n, trial):
    """Per-trial seed derived from (master, n, trial) alone."""
    return int(np.random.SeedSequence([master, n, trial]).generate_state(1)[0])


def run_trial(config, n, trial):
    """One random instance through every requested curve; returns {curve: value, 'u': u}."""
    seed = trial_seed(config.seed, n, trial)
    inst = random_instance(n, config.k, config.density, seed)
    if config.normalize:
        normalized = normalize_unique(inst)
        work, u = normalized.reduced, normalized.unique_count
    else:
        work, u = inst, 0

    values = {"u": u}
    if "lower" in config.schemes:
        values["lower"] = lower_bound(work) + u
    if "ie" in config.schemes:
        schedule, _ = run_ie(work, config.field)
        values["ie"] = schedule.total + u
    if "upper_leader" in config.schemes:
        values["upper_leader"] = upper_bound_leader(work)[0] + u
    if "trivial" in config.schemes:
        values["trivial"] = n
    if "random_exact" in config.schemes:
        values["random_exact"] = float(random_average_exact(work)) + u
    if "random_mc" in config.schemes:
        values["random_mc"] = random_average_mc(work, config.mc_samples, seed).estimate + u

    _check_curve_order(values, inst, n, trial)
    return values


def _check_curve_order(values, inst, n, trial):
    """lower <= IE <= min(upper_leader, n) for the curves that were computed."""
    lower = values.get("lower")
    ie = values.get("ie")
    cap = min(values.get("upper_leader", n), n)
    broken = (lower is not None and ie is not None and lower > ie) or (ie is not None and ie > cap)
    if lower is not None and ie is None:
        broken = broken or lower > cap
    if broken:
        dump = serialize(inst)
        logger.error(f"Trial {trial} at n={n} broke lower <= IE <= min(upper_leader, n): {values}; instance {dump.strip()}")
        raise ExperimentInvariantError(f"Trial {trial} at n={n} violated the curve ordering: {values}", dump)


def _run_trial_args(args):
    return run_trial(*args)


def _aggregate(config, n, results):
    curves = [c for c in CURVES if c in config.schemes]
    means = {}
    sds = {}
    for c in curves:
        data = np.array([r[c] for r in results], dtype=float)
        means[c] = float(data.mean())
        sds[c] = float(data.std(ddof=1)) if len(data) > 1 else 0.0
    u_mean = float(np.mean([r["u"] for r in results]))
    return ExperimentRow(n, config.k, config.trials, u_mean, means, sds)


def run_experiment(config):
    """Average every requested curve over config.trials random instances per n."""
    config.validate()
    rows = []
    for n in config.n_values:
        jobs = [(config, n, t) for t in range(config.trials)]
        if config.workers > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                results = list(pool.map(_run_trial_args, jobs))
        else:
            results = [run_trial(*job) for job in jobs]
        row = _aggregate(config, n, results)
        logger.info(f"n={n}: " + ", ".join(f"{c}={m:.2f}" for c, m in row.means.items()))
        rows.append(row)
    return rows


def gap_report(rows):
    """Mean IE-lower and upper_leader-lower gaps across rows, with the soft check."""
    report = {}
    if rows and all("ie" in r.means and "lower" in r.means for r in rows):
        report["ie_gap_mean"] = float(np.mean([r.means["ie"] - r.means["lower"] for r in rows]))
    if rows and all("upper_leader" in r.means and "lower" in r.means for r in rows):
        report["leader_gap_mean"] = float(np.mean([r.means["upper_leader"] - r.means["lower"] for r in rows]))
    if "ie_gap_mean" in report and "leader_gap_mean" in report:
        report["ie_closer_than_leader"] = report["ie_gap_mean"] < report["leader_gap_mean"]
        if not report["ie_closer_than_leader"]:
            logger.warning(
                f"IE gap {report['ie_gap_mean']:.3f} is not below the leader gap {report['leader_gap_mean']:.3f}"
            )
    return report


def experiment_metadata(config, rows):
    steps = sorted({b - a for a, b in zip(config.n_values, config.n_values[1:])})
    return {
        "config": asdict(config),
        "field_q": config.field.q,
        "random_model": RANDOM_MODEL,
        "n_steps": steps,
        "unique_packets": "normalized; u added to every curve" if config.normalize else "raw instances",
        "gaps": gap_report(rows),
    }


def write_experiment(rows, config, path):
    storage.write_csv(path, CSV_HEADER, [r.cells() for r in rows])
    if path is not None:
        storage.write_metadata(path, experiment_metadata(config, rows))


# ─── COMMANDS ────────────────────────────────────────────────────────

def _field_for(args, inst):
    q = args.q if args.q is not None else smallest_prime_geq(max(inst.k, 1))
    return FieldSpec(q)


def _load_instance(path):
    return parse(storage.read_text(path))


def _load_schedule(path, inst):
    try:
        doc = json.loads(storage.read_text(path))
    except json.JSONDecodeError as e:
        raise ParseError(f"Invalid JSON in {path}: {e.msg}", f"line {e.lineno} column {e.colno}")
    return schedule_from_document(doc, inst.n)


def _emit_schedule(inst, schedule, out, extra=None):
    """Only schedules that replay cleanly are written."""
    report = verify_schedule(inst, schedule)
    if not report.ok:
        raise VerificationError(f"{schedule.scheme} schedule failed verification", report)
    doc = schedule.to_document()
    if extra:
        doc.update(extra)
    storage.write_json(out, doc)
    return 0


def cmd_gen(args):
    if args.scenario:
        inst = get_scenario(args.scenario)
    else:
        if args.n is None or args.k is None:
            raise UsageError("gen needs --n and --k (or --scenario)")
        inst = random_instance(args.n, args.k, args.rho, args.seed)
    storage.write_text(args.out, serialize(inst))
    return 0


def cmd_bounds(args):
    inst = _load_instance(args.instance)
    storage.write_json(args.out, bounds_report(inst).to_dict())
    return 0


def cmd_schedule(args):
    """ie, leader and uncoded: run the registered runner and emit its schedule."""
    inst = _load_instance(args.instance)
    field = _field_for(args, inst)
    runner = getattr(schemes, get_scheme_info(args.scheme)["runner"])
    extra = None
    if args.scheme == "ie":
        schedule, transcript = runner(inst, field)
        if args.transcript:
            extra = {"merges": [[m.round, m.survivor + 1, m.removed + 1] for m in transcript.merges]}
    elif args.scheme == "leader":
        schedule = runner(inst, field, args.leader - 1 if args.leader is not None else None)
    else:
        schedule = runner(inst, field)
    return _emit_schedule(inst, schedule, args.out, extra)


def _parse_perm(text, k):
    try:
        perm = [int(x) - 1 for x in text.split(",")]
    except ValueError:
        raise UsageError(f"--perm must be comma-separated client numbers, got {text!r}")
    if sorted(perm) != list(range(k)):
        raise UsageError(f"--perm {text!r} is not a permutation of 1..{k}")
    return perm


def cmd_random_order(args):
    inst = _load_instance(args.instance)
    if args.perm is not None:
        ordering = _parse_perm(args.perm, inst.k)
        counts = random_tau(inst, ordering)
        runner = getattr(schemes, SCHEME_TYPES["random"]["runner"])
        schedule = runner(inst, ordering, _field_for(args, inst))
        extra = {"ordering": [c + 1 for c in ordering], "per_step": list(counts.per_step)}
        return _emit_schedule(inst, schedule, args.out, extra)
    if args.samples is not None:
        est = random_average_mc(inst, args.samples, args.seed)
        storage.write_json(args.out, {"estimate": est.estimate, "stderr": est.stderr, "samples": est.samples})
        return 0
    avg = random_average_exact(inst)
    storage.write_json(args.out, {"average": float(avg), "numerator": avg.numerator, "denominator": avg.denominator})
    return 0


def _outside_oracle_envelope(inst, field):
    return inst.n > ORACLE_MAX_N or inst.k > ORACLE_MAX_K or field.q > ORACLE_MAX_Q


def cmd_oracle(args):
    inst = _load_instance(args.instance)
    field = _field_for(args, inst)
    if not args.no_cache:
        cached = storage.lookup_oracle(inst, field.q)
        if cached is not None:
            logger.info("Oracle result served from cache")
            storage.write_json(args.out, cached)
            return 0
    budget = args.budget if args.budget is not None else DEFAULT_BUDGET
    try:
        # an explicit --budget lifts the size envelope
        if args.budget is None and _outside_oracle_envelope(inst, field):
            raise CapacityError(
                f"n={inst.n}, k={inst.k}, q={field.q} is outside the default oracle envelope "
                f"(n <= {ORACLE_MAX_N}, k <= {ORACLE_MAX_K}, q <= {ORACLE_MAX_Q}); pass --budget to search anyway",
                bracket=(lower_bound(inst), upper_bound_leader(inst)[0]),
            )
        result = optimal_tau(inst, field, budget)
    except CapacityError as e:
        lower, upper = e.bracket
        storage.write_json(args.out, {
            "tau_star": None,
            "field_q": field.q,
            "bracket": [lower, upper],
            "detail": str(e),
        })
        return exit_code_for(e)
    doc = result.to_document()
    if not args.no_cache:
        storage.store_oracle(inst, field.q, doc)
    storage.write_json(args.out, doc)
    return 0


def cmd_verify(args):
    inst = _load_instance(args.instance)
    report = verify_schedule(inst, _load_schedule(args.schedule, inst))
    storage.write_json(args.out, report.to_dict())
    return 0 if report.ok else 2


def cmd_simulate(args):
    inst = _load_instance(args.instance)
    schedule = _load_schedule(args.schedule, inst)
    report = verify_schedule(inst, schedule)
    if not report.ok:
        raise VerificationError("Schedule does not satisfy every client; nothing to decode", report)
    result = simulate_payloads(inst, schedule, args.seed)
    storage.write_json(args.out, result.to_dict())
    return 0 if result.all_decoded else 2


def cmd_experiment(args):
    config = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.k is not None:
        overrides["k"] = args.k
    if args.n is not None:
        try:
            overrides["n_values"] = tuple(int(x) for x in args.n.split(","))
        except ValueError:
            raise UsageError(f"--n must be comma-separated integers, got {args.n!r}")
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.rho is not None:
        overrides["density"] = args.rho
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.q is not None:
        overrides["field_q"] = args.q
    if args.samples is not None:
        overrides["mc_samples"] = args.samples
    if args.normalize is not None:
        overrides["normalize"] = args.normalize
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.curves is not None:
        overrides["schemes"] = tuple(args.curves.split(","))
    config = ExperimentConfig(**{**asdict(config), **overrides})

    rows = run_experiment(config)
    write_experiment(rows, config, args.out)
    gaps = gap_report(rows)
    if gaps:
        logger.info(f"Gaps: {gaps}")
    return 0


# ─── PARSER ──────────────────────────────────────────────────────────

class _Parser(argparse.ArgumentParser):
    """argparse that raises UsageError instead of exiting with status 2."""

    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="harness.py", description="Cooperative data exchange solver")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gen", help="write a random or canned instance")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--rho", type=float, default=DEFAULT_DENSITY)
    p.add_argument("--seed", type=int)
    p.add_argument("--scenario")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bounds", help="lower/upper bounds of an instance")
    p.add_argument("instance")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bounds)

    for tag, info in SCHEME_TYPES.items():
        if info["ordering"]:
            continue
        p = sub.add_parser(info["command"], help=f"{info['label']} schedule")
        p.add_argument("instance")
        p.add_argument("--q", type=int)
        p.add_argument("--out")
        if tag == "ie":
            p.add_argument("--transcript", action="store_true", help="include merge events")
        if tag == "leader":
            p.add_argument("--leader", type=int, help="1-based leader client (default: best)")
        p.set_defaults(func=cmd_schedule, scheme=tag)

    p = sub.add_parser(SCHEME_TYPES["random"]["command"], help=f"{SCHEME_TYPES['random']['label']} scheme")
    p.add_argument("instance")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--perm", help="comma-separated 1-based client ordering")
    group.add_argument("--samples", type=int, help="Monte Carlo sample count")
    p.add_argument("--seed", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_random_order)

    p = sub.add_parser("oracle", help="exact optimum by exhaustive search")
    p.add_argument("instance")
    p.add_argument("--q", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--no-cache", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)

    for name, func, help_text in (
        ("verify", cmd_verify, "replay a schedule"),
        ("simulate", cmd_simulate, "decode random payloads through a schedule"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("instance")
        p.add_argument("schedule")
        p.add_argument("--out")
        if name == "simulate":
            p.add_argument("--seed", type=int)
        p.set_defaults(func=func)

    p = sub.add_parser("experiment", help="averaged curves over random instances")
    p.add_argument("--config")
    p.add_argument("--k", type=int)
    p.add_argument("--n", help="comma-separated packet counts")
    p.add_argument("--trials", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--curves", help=f"comma-separated subset of {','.join(CURVES)}")
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_experiment)
    return parser


# ─── MAIN ────────────────────────────────────────────────────────────

def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        sys.stderr.write(f"error: {e}\n")
        return 1

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else LOG_LEVEL,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CDEError as e:
        info = explain(e)
        sys.stderr.write(f"error: {info['name']}: {info['detail']}\n")
        report = getattr(e, "report", None)
        if report is not None:
            sys.stderr.write(json.dumps(report.to_dict()) + "\n")
        return info["exit_code"]


if __name__ == "__main__":
    sys.exit(main())
