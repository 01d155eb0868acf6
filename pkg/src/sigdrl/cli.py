"""Command-line entry point: gen-leaders, train, eval.

Settings resolve in three layers: built-in defaults, then an INI file passed
with ``--config``, then explicit command-line flags. Every run writes the fully
resolved settings to ``resolved_config.ini`` next to its outputs; feeding that
file back through ``--config`` repeats the run.

INI sections: ``[sim]`` and ``[schedule]`` for the simulator, ``[ddpg]`` and
``[sac]`` for agent hyperparameters, ``[train]``, ``[eval]`` and
``[gen-leaders]`` for per-command options.

Exit codes: 0 success, 2 usage error, 3 data error, 4 runtime contract violation.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import logging
import os
import sys
from pathlib import Path

from .config import SignalSchedule, SimConfig
from .data import CfPair, DataError, load_corpus, split, synthetic_pairs, write_manifest, write_trajectories
from .ddpg import DdpgConfig
from .evaluation import SUITES, run_benchmark_suite
from .leaders import critical_brake_profile
from .sac import SacConfig
from .scenarios import corpus_factory, ou_pool, pool_factory
from .training import TrainingError, load_agent, make_agent, save_agent, train

log = logging.getLogger("sigdrl")

OUT_ENV = "SIGDRL_OUT"
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CONTRACT = 0, 2, 3, 4

COMMAND_DEFAULTS = {
    "gen-leaders": {"kind": "ou", "count": 200, "duration": 100.0, "seed": 0, "train_fraction": 0.6},
    "train": {
        "algo": "ddpg", "episodes": 1200, "seed": 0, "corpus": "", "pool_size": 200,
        "leader_duration": 100.0, "p_free": 0.0, "p_signal": 0.0, "mask": True,
    },
    "eval": {"checkpoint": "", "corpus": "", "suite": "all", "seed": 0, "plots": False, "grid_traces": False},
}


class UsageError(Exception):
    pass


def _default_out() -> str:
    return os.environ.get(OUT_ENV, "runs")


def _coerce(raw: str, like):
    if isinstance(like, bool):
        v = raw.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"not a boolean: {raw!r}")
    if isinstance(like, tuple):
        return tuple(int(x) for x in raw.replace(",", " ").split())
    try:
        return type(like)(raw)
    except ValueError:
        raise UsageError(f"cannot read {raw!r} as {type(like).__name__}") from None


def _section(cp, name: str, defaults: dict) -> dict:
    out = dict(defaults)
    if cp is None or not cp.has_section(name):
        return out
    for key, raw in cp.items(name):
        if key not in defaults:
            raise UsageError(f"[{name}] has unknown key {key!r}")
        out[key] = _coerce(raw, defaults[key])
    return out


def _dc_defaults(obj) -> dict:
    return {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj) if f.name != "schedule"}


def read_config(path):
    if not path:
        return None
    cp = configparser.ConfigParser()
    cp.optionxform = str
    if not cp.read(path, encoding="utf-8"):
        raise UsageError(f"config file {path} not found")
    return cp


def resolve_sim(cp) -> SimConfig:
    base = SimConfig()
    sim = _section(cp, "sim", _dc_defaults(base))
    sched = _section(cp, "schedule", dataclasses.asdict(base.schedule))
    try:
        return SimConfig(**sim, schedule=SignalSchedule(**sched))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid simulator settings: {exc}") from None


def resolve_hyper(cp, algo: str) -> dict:
    cls = {"ddpg": DdpgConfig, "sac": SacConfig}[algo]
    return _section(cp, algo, dataclasses.asdict(cls()))


def resolve_command(cp, name: str, args) -> dict:
    opts = _section(cp, name, COMMAND_DEFAULTS[name])
    for key in opts:
        v = getattr(args, key, None)
        if v is not None:
            opts[key] = v
    return opts


def write_resolved(path, sim: SimConfig, sections: dict) -> None:
    cp = configparser.ConfigParser()
    cp.optionxform = str

    def put(name, d):
        cp[name] = {k: ",".join(map(str, v)) if isinstance(v, tuple) else repr(v) if isinstance(v, float) else str(v)
                    for k, v in d.items()}

    put("sim", _dc_defaults(sim))
    put("schedule", dataclasses.asdict(sim.schedule))
    for name, d in sections.items():
        put(name, d)
    with open(path, "w", encoding="utf-8") as fh:
        cp.write(fh)


# -- commands ------------------------------------------------------------------------


def cmd_gen_leaders(args) -> int:
    cp = read_config(args.config)
    sim = resolve_sim(cp)
    o = resolve_command(cp, "gen-leaders", args)
    out = Path(args.out or _default_out())
    out.mkdir(parents=True, exist_ok=True)
    if o["count"] < 0:
        raise UsageError("--count must be nonnegative")
    rows = []
    if o["kind"] == "ou":
        if o["duration"] <= 0:
            raise UsageError("--duration must be positive")
        try:
            pool = ou_pool(sim, o["count"], o["duration"], o["seed"])
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        width = max(4, len(str(o["count"])))
        for i, tr in enumerate(pool):
            pid = f"ou{i:0{width}d}"
            fname = f"{pid}.csv"
            write_trajectories(out / fname, [CfPair(pid, tr)])
            rows.append({"pair_id": pid, "source": "ou", "split": "train", "signal_offset": "", "file": fname})
    elif o["kind"] == "critical-brake":
        write_trajectories(out / "critical_brake.csv", [CfPair("critical_brake", critical_brake_profile(sim))])
        rows.append({"pair_id": "critical_brake", "source": "scripted", "split": "test",
                     "signal_offset": "", "file": "critical_brake.csv"})
    elif o["kind"] == "pairs":
        pairs = synthetic_pairs(o["count"], sim, o["seed"], duration=o["duration"])
        write_trajectories(out / "pairs.csv", pairs)
        train_set, test_set = split(pairs, o["train_fraction"], o["seed"]) if pairs else ([], [])
        which = {p.id: "train" for p in train_set} | {p.id: "test" for p in test_set}
        for p in pairs:
            rows.append({"pair_id": p.id, "source": "real", "split": which[p.id],
                         "signal_offset": "", "file": "pairs.csv"})
    else:
        raise UsageError(f"unknown --kind {o['kind']!r}")
    write_manifest(out / "manifest.csv", rows)
    write_resolved(out / "resolved_config.ini", sim, {"gen-leaders": o})
    log.info("wrote %d trajectories to %s", len(rows), out)
    return EXIT_OK


def _training_factory(sim: SimConfig, o: dict):
    if not o["corpus"]:
        pool = ou_pool(sim, o["pool_size"], o["leader_duration"], o["seed"])
        return pool_factory(pool, sim, o["p_free"], o["p_signal"])
    pairs = load_corpus(o["corpus"], "train")
    with_follower = [p for p in pairs if p.follower is not None]
    leaders_only = [p.leader for p in pairs if p.follower is None]
    if not pairs:
        raise DataError(f"{o['corpus']}: no training entries")
    return corpus_factory(with_follower, sim, leaders_only, o["p_free"], o["p_signal"])


def cmd_train(args) -> int:
    cp = read_config(args.config)
    sim = resolve_sim(cp)
    o = resolve_command(cp, "train", args)
    if o["algo"] not in ("ddpg", "sac"):
        raise UsageError(f"unknown --algo {o['algo']!r}")
    if o["episodes"] < 0:
        raise UsageError("--episodes must be nonnegative")
    hyper = resolve_hyper(cp, o["algo"])
    out = Path(args.out or _default_out())
    out.mkdir(parents=True, exist_ok=True)
    write_resolved(out / "resolved_config.ini", sim, {"train": o, o["algo"]: hyper})
    try:
        agent = make_agent(o["algo"], sim, o["seed"], **hyper)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid {o['algo']} settings: {exc}") from None
    factory = _training_factory(sim, o)

    def progress(row):
        if row["episode"] % 50 == 0:
            log.info("episode %d reward %.2f", row["episode"], row["total_reward"])

    train(agent, factory, o["episodes"], o["seed"], mask=o["mask"], log_path=out / "train_log.csv", progress=progress)
    save_agent(agent, out / "checkpoint.zip")
    log.info("checkpoint written to %s", out / "checkpoint.zip")
    return EXIT_OK


def cmd_eval(args) -> int:
    cp = read_config(args.config)
    o = resolve_command(cp, "eval", args)
    if not o["checkpoint"]:
        raise UsageError("--checkpoint is required")
    if not Path(o["checkpoint"]).is_file():
        raise DataError(f"checkpoint {o['checkpoint']} not found")
    suites = SUITES if o["suite"] == "all" else (o["suite"],)
    if not set(suites) <= set(SUITES):
        raise UsageError(f"unknown --suite {o['suite']!r}")
    try:
        agent = load_agent(o["checkpoint"])
    except (KeyError, ValueError, OSError) as exc:
        raise DataError(f"cannot read checkpoint {o['checkpoint']}: {exc}") from None
    sim = agent.sim if cp is None or not cp.has_section("sim") else resolve_sim(cp)
    pairs = []
    if "ecdf" in suites:
        if not o["corpus"]:
            raise UsageError("the ecdf suite needs --corpus")
        if not Path(o["corpus"]).is_file():
            raise DataError(f"corpus manifest {o['corpus']} not found")
        pairs = [p for p in load_corpus(o["corpus"], "test") if p.follower is not None]
        if not pairs:
            raise DataError(f"{o['corpus']}: no test pairs with recorded followers")
    out = Path(args.out or _default_out())
    out.mkdir(parents=True, exist_ok=True)
    write_resolved(out / "resolved_config.ini", sim, {"eval": o})
    bundle = run_benchmark_suite(
        lambda obs: agent.act(obs, explore=False), pairs, sim, o["seed"], out,
        suites=suites, plots=o["plots"], grid_traces=o["grid_traces"],
    )
    for row in bundle.summary:
        log.info("%s/%s: episodes=%s collisions=%s red_violations=%s min_gap=%s", *row[:3], row[4], row[5], row[6])
    return EXIT_OK


# -- parser ------------------------------------------------------------------------------


def _bool_flag(p, name, help):
    p.add_argument(f"--{name}", dest=name.replace("-", "_"), action=argparse.BooleanOptionalAction, default=None, help=help)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sigdrl", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI settings file")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./runs)")
        p.add_argument("--seed", type=int)

    g = sub.add_parser("gen-leaders", help="write leader trajectories and a manifest")
    common(g)
    g.add_argument("--kind", choices=["ou", "critical-brake", "pairs"])
    g.add_argument("--count", type=int)
    g.add_argument("--duration", type=float)
    g.add_argument("--train-fraction", type=float)
    g.set_defaults(func=cmd_gen_leaders)

    t = sub.add_parser("train", help="train a DDPG or SAC agent")
    common(t)
    t.add_argument("--algo", choices=["ddpg", "sac"])
    t.add_argument("--episodes", type=int)
    t.add_argument("--corpus", help="manifest of training trajectories (default: in-memory OU pool)")
    t.add_argument("--pool-size", type=int)
    t.add_argument("--leader-duration", type=float)
    t.add_argument("--p-free", type=float, help="share of episodes without a leader")
    t.add_argument("--p-signal", type=float, help="share of OU episodes started just before an amber or red onset")
    _bool_flag(t, "mask", "safety mask during training")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="run the benchmark suites on a checkpoint")
    common(e)
    e.add_argument("--checkpoint")
    e.add_argument("--corpus", help="manifest with test pairs (ecdf suite)")
    e.add_argument("--suite", choices=[*SUITES, "all"])
    _bool_flag(e, "plots", "also write SVG charts")
    _bool_flag(e, "grid-traces", "write a trace file per grid scenario")
    e.set_defaults(func=cmd_eval)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except (TrainingError, ValueError, FloatingPointError) as exc:
        log.error("contract violation: %s", exc)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
