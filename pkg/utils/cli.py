"""
命令行入口
子命令: gen | sample | estimate | select | select-active | oracle | bound | verify

参数来源: --config 指向的 JSON 实验配置 + 命令行参数 (命令行优先)。
所有参数在开始计算之前校验完毕；每次运行写一条 run ledger 记录。
"""

import argparse
import hashlib
import itertools
import json
import sqlite3
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

import config
from config import (
    DEFAULT_CI_TOL, DEFAULT_TAU, DEFAULT_WORKERS, EXIT_OK, EXIT_UNEXPECTED,
)
from utils.bounds import (
    BoundParams, bound_crossover_n, required_n, deviation_bound, tv_deviation_bound,
)
from utils.common import (
    PropertyViolation, TsInfoError, UnattainableError, ValidationError,
    dump_json, load_json, make_rng, write_csv, csv_text,
)
from utils.core import identity_table, read_series, representation_from_json, representation_to_json, write_series
from utils.db import log_run
from utils.logger import get_logger, setup_logger
from utils.mdp import (
    build_ideal_mdp, load_mdp, mdp_to_json, policy_from_json, random_ideal_mdp, random_mdp,
    sample_mdp, uniform_policy,
)
from utils.oracle import (
    ci_check_markov, chain_to_json, entropy_rate_sandwich, exact_h0, exact_hk, exact_ik,
    induced_label_transition, load_chain, stationary_distribution,
)
from utils.processes import (
    IdealChainRecipe, build_ideal_chain, cycle_chain, enumerate_family, iid_chain,
    mixing_profile, random_chain, random_ideal_recipe, sample_chain, uniform_recipe,
)
from utils.selection import (
    FixedK, Schedule, score_family, score_rows, select_active, select_passive, write_report,
)
from utils.verify import SUITES, run_suites

MODULE = "cli"
logger = get_logger("tsinfo.cli")

GEN_KINDS = ["ideal", "random-ideal", "random", "iid", "cycle", "ideal-mdp", "random-ideal-mdp", "random-mdp"]
BOUND_AXES = ["d", "epsilon", "n", "gamma", "k", "alphabet_size"]
DEFAULT_K_MAX = 5
DEFAULT_SEEDS = (0,)


# ============== Experiment Config ==============

@dataclass
class ExperimentConfig:
    subcommand: str
    params: Dict[str, Any]
    seeds: Tuple[int, ...] = DEFAULT_SEEDS
    out_dir: Path = field(default_factory=lambda: Path(config.OUT_DIR))
    k: Optional[int] = None
    schedule: bool = False
    tau: float = DEFAULT_TAU
    workers: int = DEFAULT_WORKERS

    @property
    def mode(self):
        return Schedule() if self.schedule else FixedK(self.k or 1)

    def digest(self):
        """sha256 of the canonical JSON form, recorded in the run ledger"""
        payload = {
            "subcommand": self.subcommand,
            "params": self.params,
            "seeds": list(self.seeds),
            "out_dir": str(self.out_dir),
            "k": self.k,
            "schedule": self.schedule,
            "tau": self.tau,
            "workers": self.workers,
        }
        text = json.dumps(payload, sort_keys=True, default=str)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _fail(operation, message):
    raise ValidationError(MODULE, operation, message)


def _require(params, keys, operation):
    missing = [key for key in keys if params.get(key) is None]
    if missing:
        _fail(operation, f"missing parameter(s) {missing}")


def _require_file(params, key, operation):
    value = params.get(key)
    if isinstance(value, str) and not Path(value).exists():
        _fail(operation, f"{key} file not found: {value}")


def _positive_int(params, key, operation, minimum=1):
    value = params.get(key)
    if value is None:
        return
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        _fail(operation, f"{key} must be an integer >= {minimum}, got {value!r}")


def _check_family_source(params, operation):
    _require(params, ["family"], operation)
    family = params["family"]
    if isinstance(family, str):
        _require_file(params, "family", operation)
    elif not isinstance(family, (dict, list)):
        _fail(operation, "family must be a file path, an inline list or an {\"enumerate\": ...} object")


def _check_series_files(params, seeds, operation):
    template = params["series"]
    for seed in seeds:
        path = Path(template.format(seed=seed))
        if not path.exists():
            _fail(operation, f"series file not found: {path}")


def validate_config(cfg):
    """Reject a bad configuration before any computation starts."""
    sub = cfg.subcommand
    op = f"validate[{sub}]"
    params = cfg.params

    if not cfg.seeds:
        _fail(op, "at least one seed is required")
    for seed in cfg.seeds:
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
            _fail(op, f"seed {seed!r} is not a 64-bit unsigned integer")
    if cfg.k is not None and (not isinstance(cfg.k, int) or cfg.k < 1):
        _fail(op, f"k must be >= 1, got {cfg.k!r}")
    if cfg.k is not None and cfg.schedule:
        _fail(op, "--k and --schedule are mutually exclusive")
    if not isinstance(cfg.tau, (int, float)) or not cfg.tau >= 0:
        _fail(op, f"tau must be >= 0, got {cfg.tau!r}")
    if not isinstance(cfg.workers, int) or cfg.workers < 1:
        _fail(op, f"workers must be >= 1, got {cfg.workers!r}")

    if sub == "gen":
        kind = params.get("kind")
        if kind not in GEN_KINDS:
            _fail(op, f"kind must be one of {GEN_KINDS}, got {kind!r}")
        needed = {
            "ideal": ["label_transition", "preimage_sizes"],
            "random-ideal": ["n_labels", "n_states"],
            "random": ["n_states"],
            "iid": ["probs"],
            "cycle": ["n_states"],
            "ideal-mdp": ["label_transitions", "preimage_sizes"],
            "random-ideal-mdp": ["n_labels", "n_states", "n_actions"],
            "random-mdp": ["n_states", "n_actions"],
        }[kind]
        _require(params, needed, op)
        for key in ("n_labels", "n_states", "n_actions"):
            _positive_int(params, key, op)

    elif sub == "sample":
        _require(params, ["n"], op)
        _positive_int(params, "n", op)
        _positive_int(params, "burn_in", op, minimum=0)
        if (params.get("chain") is None) == (params.get("mdp") is None):
            _fail(op, "exactly one of chain / mdp is required")
        if params.get("policy") is not None and params.get("mdp") is None:
            _fail(op, "policy needs an mdp")
        for key in ("chain", "mdp", "policy"):
            _require_file(params, key, op)

    elif sub in ("estimate", "select"):
        _require(params, ["series"], op)
        _check_series_files(params, cfg.seeds, op)
        _check_family_source(params, op)

    elif sub == "select-active":
        _require(params, ["mdp", "n"], op)
        _require_file(params, "mdp", op)
        _positive_int(params, "n", op)
        _positive_int(params, "burn_in", op, minimum=0)
        _check_family_source(params, op)
        if cfg.schedule or (cfg.k is not None and cfg.k != 1):
            _fail(op, "select-active always scores with k=1")

    elif sub == "oracle":
        _require(params, ["chain"], op)
        _require_file(params, "chain", op)
        _require_file(params, "representation", op)
        _positive_int(params, "k_max", op)
        _positive_int(params, "window", op)

    elif sub == "bound":
        grid = params.get("grid")
        if not isinstance(grid, dict):
            _fail(op, "bound needs a grid object with axes " + ", ".join(BOUND_AXES))
        unknown = sorted(set(grid) - set(BOUND_AXES))
        if unknown:
            _fail(op, f"unknown grid axes {unknown}")
        _require(grid, ["d", "epsilon", "n", "gamma"], op)
        list(bound_grid(grid))
        target = params.get("target")
        if target is not None and (isinstance(target, bool) or not isinstance(target, (int, float)) or not 0 < target < 1):
            _fail(op, f"target must lie in (0, 1), got {target!r}")

    elif sub == "verify":
        suite = params.get("suite", "all")
        if suite != "all" and suite not in SUITES:
            _fail(op, f"unknown suite {suite!r}; choose from {['all'] + list(SUITES)}")

    if sub in ("select", "select-active"):
        if (params.get("gamma") is None) != (params.get("epsilon") is None):
            _fail(op, "bound diagnostics need both gamma and epsilon")
    return cfg


# ============== Argument Parsing ==============

def build_parser():
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="JSON experiment config; flags override its values")
    shared.add_argument("--seed", type=int, action="append", dest="seeds", help="64-bit unsigned seed (repeatable)")
    shared.add_argument("--out", help="output directory (default: config.OUT_DIR)")
    memory = shared.add_mutually_exclusive_group()
    memory.add_argument("--k", type=int, help="block memory k for I_k")
    memory.add_argument("--schedule", action="store_true", default=None, help="use the k_n schedule (I_inf estimate)")
    shared.add_argument("--tau", type=float, help="selection equivalence tolerance in bits")
    shared.add_argument("--workers", type=int, help="threads for candidate evaluation")

    parser = argparse.ArgumentParser(
        prog="tsinfo",
        description="Representation selection by time-series information",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    gen = sub.add_parser("gen", parents=[shared], help="generate a chain or MDP spec")
    gen.add_argument("--kind", choices=GEN_KINDS)

    sample = sub.add_parser("sample", parents=[shared], help="sample trajectories")
    sample.add_argument("--chain")
    sample.add_argument("--mdp")
    sample.add_argument("--policy")
    sample.add_argument("--n", type=int)
    sample.add_argument("--burn-in", type=int, dest="burn_in")

    for name, helptext in (("estimate", "score a candidate family"), ("select", "select the best candidate")):
        p = sub.add_parser(name, parents=[shared], help=helptext)
        p.add_argument("--series", help="series file; {seed} is replaced per seed")
        p.add_argument("--family")
        if name == "select":
            p.add_argument("--gamma", type=float)
            p.add_argument("--epsilon", type=float)

    active = sub.add_parser("select-active", parents=[shared], help="explore an MDP, then select")
    active.add_argument("--mdp")
    active.add_argument("--family")
    active.add_argument("--n", type=int)
    active.add_argument("--burn-in", type=int, dest="burn_in")
    active.add_argument("--gamma", type=float)
    active.add_argument("--epsilon", type=float)

    oracle = sub.add_parser("oracle", parents=[shared], help="exact quantities of a chain")
    oracle.add_argument("--chain")
    oracle.add_argument("--representation")
    oracle.add_argument("--window", type=int)
    oracle.add_argument("--ci-tol", type=float, dest="ci_tol")

    bound = sub.add_parser("bound", parents=[shared], help="deviation bound tables")
    bound.add_argument("--target", type=float, help="also report required_n for this target probability")

    verify = sub.add_parser("verify", parents=[shared], help="run the property suites")
    verify.add_argument("--suite", choices=["all"] + list(SUITES))

    return parser


# 这些参数不进 params
_SHARED_KEYS = {"subcommand", "config", "seeds", "out", "k", "schedule", "tau", "workers"}


def load_experiment(args):
    """Merge --config JSON with command-line flags (flags win) and validate."""
    data = {}
    if args.config:
        data = load_json(args.config, MODULE, "load_experiment")
        if not isinstance(data, dict):
            _fail("load_experiment", f"{args.config} must hold a JSON object")

    params = {key: value for key, value in data.items()
              if key not in ("seeds", "out", "k", "schedule", "tau", "workers")}
    for key, value in vars(args).items():
        if key not in _SHARED_KEYS and value is not None:
            params[key] = value

    if args.subcommand == "bound" and args.k is not None:
        params.setdefault("grid", {})
        params["grid"]["k"] = args.k
    if args.subcommand == "oracle" and args.k is not None:
        params["k_max"] = args.k

    seeds = args.seeds if args.seeds else data.get("seeds", list(DEFAULT_SEEDS))
    if isinstance(seeds, int):
        seeds = [seeds]
    schedule = args.schedule if args.schedule is not None else bool(data.get("schedule", False))
    k = args.k if args.k is not None else data.get("k")
    if args.schedule and args.k is None:
        k = None

    cfg = ExperimentConfig(
        subcommand=args.subcommand,
        params=params,
        seeds=tuple(seeds),
        out_dir=Path(args.out or data.get("out") or config.OUT_DIR),
        k=k if args.subcommand not in ("bound", "oracle") else None,
        schedule=schedule,
        tau=args.tau if args.tau is not None else data.get("tau", DEFAULT_TAU),
        workers=args.workers if args.workers is not None else data.get("workers", DEFAULT_WORKERS),
    )
    return validate_config(cfg)


# ============== Loaders ==============

def load_family(source):
    """
    A family is a list of representation objects, {"representations": [...]},
    or {"enumerate": {"n_states": .., "alphabet_size": ..}}; a string is a
    path to a JSON file holding one of these.
    """
    if isinstance(source, str):
        source = load_json(source, MODULE, "load_family")
    if isinstance(source, dict) and "enumerate" in source:
        spec = source["enumerate"]
        return enumerate_family(int(spec["n_states"]), int(spec["alphabet_size"]))
    if isinstance(source, dict):
        source = source.get("representations")
    if not isinstance(source, list) or not source:
        _fail("load_family", "family must list at least one representation")
    return [representation_from_json(item) for item in source]


def load_representation(source, n_states):
    if source is None:
        return identity_table(n_states)
    if isinstance(source, str):
        source = load_json(source, MODULE, "load_representation")
    return representation_from_json(source)


# ============== Subcommands ==============

def cmd_gen(cfg):
    p = cfg.params
    kind = p["kind"]
    seed = cfg.seeds[0]
    if len(cfg.seeds) > 1:
        logger.warning(f"gen uses only the first seed ({seed})")
    rng = make_rng(seed)
    out = cfg.out_dir

    if kind in ("ideal-mdp", "random-ideal-mdp", "random-mdp"):
        if kind == "ideal-mdp":
            T = np.asarray(p["label_transitions"], dtype=np.float64)
            sizes = p["preimage_sizes"]
            weights = p.get("emission_weights") or [[1.0 / s] * s for s in sizes]
            mdp, f = build_ideal_mdp(T, sizes, weights)
        elif kind == "random-ideal-mdp":
            mdp, f = random_ideal_mdp(rng, int(p["n_labels"]), int(p["n_states"]), int(p["n_actions"]))
        else:
            mdp = random_mdp(rng, int(p["n_states"]), int(p["n_actions"]))
            f = identity_table(mdp.n_states)
        return [
            dump_json(mdp_to_json(mdp), out / "mdp.json"),
            dump_json(representation_to_json(f), out / "representation.json"),
        ]

    if kind == "ideal":
        if p.get("emission_weights"):
            recipe = IdealChainRecipe(
                label_transition=np.asarray(p["label_transition"], dtype=np.float64),
                preimage_sizes=tuple(p["preimage_sizes"]),
                emission_weights=tuple(np.asarray(q, dtype=np.float64) for q in p["emission_weights"]),
            )
        else:
            recipe = uniform_recipe(p["label_transition"], p["preimage_sizes"])
        spec, f, mixing = build_ideal_chain(recipe)
    elif kind == "random-ideal":
        spec, f, mixing = build_ideal_chain(random_ideal_recipe(rng, int(p["n_labels"]), int(p["n_states"])))
    else:
        if kind == "random":
            spec = random_chain(rng, int(p["n_states"]))
        elif kind == "iid":
            spec = iid_chain(p["probs"])
        else:
            spec = cycle_chain(int(p["n_states"]))
        f = identity_table(spec.n_states)
        mixing = mixing_profile(spec)

    logger.info(f"gen {kind}: |X|={spec.n_states}, gamma={mixing.gamma:.6g}, certified={mixing.certified}")
    return [
        dump_json(chain_to_json(spec), out / "chain.json"),
        dump_json(representation_to_json(f), out / "representation.json"),
        dump_json({"gamma": mixing.gamma, "certified": mixing.certified}, out / "mixing.json"),
    ]


def cmd_sample(cfg):
    p = cfg.params
    n = int(p["n"])
    burn_in = int(p.get("burn_in", 0))
    artifacts = []
    if p.get("chain"):
        spec = load_chain(p["chain"])
        draw = lambda seed: sample_chain(spec, n, seed, burn_in=burn_in)
    else:
        mdp = load_mdp(p["mdp"])
        if p.get("policy"):
            policy = policy_from_json(load_json(p["policy"], MODULE, "cmd_sample"))
        else:
            policy = uniform_policy(mdp.n_states, mdp.n_actions)
        draw = lambda seed: sample_mdp(mdp, policy, n, seed, burn_in=burn_in)
    for seed in cfg.seeds:
        artifacts.append(write_series(draw(seed), cfg.out_dir / f"series_{seed}.txt"))
    logger.info(f"sample: {len(cfg.seeds)} series of length {n}")
    return artifacts


def _series_for(cfg, seed):
    return read_series(cfg.params["series"].format(seed=seed), seed=seed)


def cmd_estimate(cfg):
    family = load_family(cfg.params["family"])
    artifacts = []
    for seed in cfg.seeds:
        scores = score_family(family, _series_for(cfg, seed), cfg.mode, cfg.workers)
        artifacts.append(write_csv(
            score_rows(scores), cfg.out_dir / f"scores_{seed}.csv",
            columns=["index", "score", "k_used", "n_effective"],
        ))
    return artifacts


def cmd_select(cfg):
    family = load_family(cfg.params["family"])
    artifacts = []
    for seed in cfg.seeds:
        report = select_passive(
            family, _series_for(cfg, seed), cfg.mode, tau=cfg.tau, workers=cfg.workers,
            gamma=cfg.params.get("gamma"), epsilon=cfg.params.get("epsilon"),
        )
        artifacts.extend(write_report(report, cfg.out_dir))
    return artifacts


def cmd_select_active(cfg):
    p = cfg.params
    mdp = load_mdp(p["mdp"])
    family = load_family(p["family"])
    artifacts = []
    for seed in cfg.seeds:
        report = select_active(
            mdp, family, int(p["n"]), seed, tau=cfg.tau, burn_in=int(p.get("burn_in", 0)),
            workers=cfg.workers, gamma=p.get("gamma"), epsilon=p.get("epsilon"),
        )
        artifacts.extend(write_report(report, cfg.out_dir))
    return artifacts


def cmd_oracle(cfg):
    p = cfg.params
    spec = load_chain(p["chain"])
    f = load_representation(p.get("representation"), spec.n_states)
    k_max = int(p.get("k_max", DEFAULT_K_MAX))
    tol = float(p.get("ci_tol", DEFAULT_CI_TOL))

    rows = []
    for k in range(1, k_max + 1):
        sandwich = entropy_rate_sandwich(spec, f, k)
        rows.append({
            "k": k,
            "h_k": exact_hk(spec, f, k),
            "I_k": exact_ik(spec, f, k),
            "sandwich_lower": sandwich.lower,
            "sandwich_upper": sandwich.upper,
        })
    ci = ci_check_markov(spec, f, tol=tol, window=int(p.get("window", 1)))
    mixing = mixing_profile(spec)
    summary = {
        "stationary": stationary_distribution(spec),
        "h_0": exact_h0(spec, f),
        "ci_passed": ci.passed,
        "ci_max_violation": ci.max_violation,
        "ci_tol": tol,
        "label_transition": induced_label_transition(spec, f),
        "gamma": mixing.gamma,
        "certified": mixing.certified,
    }
    logger.info(f"oracle: I_1={rows[0]['I_k']:.6g}, CI {'passes' if ci.passed else 'fails'} "
                f"(max violation {ci.max_violation:.3g})")
    return [
        write_csv(rows, cfg.out_dir / "oracle.csv",
                  columns=["k", "h_k", "I_k", "sandwich_lower", "sandwich_upper"]),
        dump_json(summary, cfg.out_dir / "oracle.json"),
    ]


def _grid_axis(grid, key, default):
    value = grid.get(key, default)
    return value if isinstance(value, list) else [value]


def bound_grid(grid):
    """BoundParams for every grid point, axes varied in BOUND_AXES order"""
    axes = [
        _grid_axis(grid, "d", None), _grid_axis(grid, "epsilon", None), _grid_axis(grid, "n", None),
        _grid_axis(grid, "gamma", None), _grid_axis(grid, "k", 1), _grid_axis(grid, "alphabet_size", 2),
    ]
    return [
        BoundParams(d=d, epsilon=eps, n=n, gamma=gamma, k=k, alphabet_size=Y)
        for d, eps, n, gamma, k, Y in itertools.product(*axes)
    ]


def bound_rows(grid, target=None):
    rows = []
    for params in bound_grid(grid):
        bound = deviation_bound(params)
        row = {axis: getattr(params, axis) for axis in BOUND_AXES}
        row.update({
            "deviation_bound": bound.value,
            "vacuous": bound.vacuous,
            "saturated": bound.saturated,
            "tv_deviation": tv_deviation_bound(params).value,
            "crossover_n": bound_crossover_n(params),
        })
        if target is not None:
            try:
                row["required_n"] = required_n(params, target)
            except UnattainableError as e:
                logger.warning(str(e))
                row["required_n"] = None
        rows.append(row)
    return rows


def cmd_bound(cfg):
    target = cfg.params.get("target")
    rows = bound_rows(cfg.params["grid"], target)
    columns = BOUND_AXES + ["deviation_bound", "vacuous", "saturated", "tv_deviation", "crossover_n"]
    if target is not None:
        columns.append("required_n")
    dtypes = {"required_n": "Int64"} if target is not None else None
    path = write_csv(rows, cfg.out_dir / "bounds.csv", columns=columns, dtypes=dtypes)
    print(csv_text(rows, columns=columns, dtypes=dtypes), end="")
    return [path]


def cmd_verify(cfg):
    suite = cfg.params.get("suite", "all")
    rows = []
    failed = []
    for seed in cfg.seeds:
        for result in run_suites(suite, seed=seed):
            rows.append({"seed": seed, **result.as_row()})
            if not result.passed:
                failed.append(f"{result.name}[seed={seed}]")
    path = write_csv(rows, cfg.out_dir / "verify.csv")
    if failed:
        raise PropertyViolation(MODULE, "verify", f"violations in {', '.join(failed)} (see {path})")
    return [path]


COMMANDS = {
    "gen": cmd_gen,
    "sample": cmd_sample,
    "estimate": cmd_estimate,
    "select": cmd_select,
    "select-active": cmd_select_active,
    "oracle": cmd_oracle,
    "bound": cmd_bound,
    "verify": cmd_verify,
}

# ============== Run ==============

def _record(subcommand, digest, status, artifacts, message):
    try:
        log_run(subcommand, digest, status, [str(a) for a in artifacts], message)
    except sqlite3.Error as e:
        logger.warning(f"run ledger not updated: {e}")


def run(argv=None):
    """Parse, validate, execute; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_UNEXPECTED

    digest = ""
    artifacts: List[Path] = []
    try:
        cfg = load_experiment(args)
        digest = cfg.digest()
        logger.info(f"{cfg.subcommand}: seeds={list(cfg.seeds)}, out={cfg.out_dir}")
        artifacts = COMMANDS[cfg.subcommand](cfg)
    except PropertyViolation as e:
        logger.error(str(e))
        _record(args.subcommand, digest, "violation", artifacts, str(e))
        return e.exit_code
    except TsInfoError as e:
        logger.error(str(e))
        _record(args.subcommand, digest, "failed", artifacts, str(e))
        return e.exit_code
    except Exception as e:
        logger.error(f"{args.subcommand} crashed: {e}", exc_info=True)
        _record(args.subcommand, digest, "error", artifacts, str(e))
        return EXIT_UNEXPECTED

    _record(args.subcommand, digest, "success", artifacts, f"{len(artifacts)} artifacts")
    logger.info(f"{args.subcommand}: wrote {len(artifacts)} artifacts")
    return EXIT_OK


def main(argv=None):
    setup_logger()
    return run(argv)
