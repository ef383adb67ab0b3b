"""Command-line entry point: ``batchrl {explore,train,eval,coverage,report}``.

Settings come from, in increasing priority: built-in defaults, a JSON file
given with ``--config``, and command-line flags. ``BRL_SEED`` supplies the
seed when neither the file nor the flags do.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone

import numpy as np

from ..dataset import coverage, dataset_read, dataset_write, file_hash
from ..envs import make_env, parse_reward
from ..errors import BatchRLError, ConfigError, CorruptionError, FormatError, ReportError, UsageError
from ..explore import make_explorer
from ..explore.base import collect
from ..offline.train import LOG_COLUMNS, load_policy, save_policy, train_offline
from .config import ExperimentConfig, load_config_file
from .evaluate import RandomLinearBaseline, evaluate
from .report import EVAL_COLUMNS, emit_report, write_csv

DEFAULTS = {
    "explore": {"steps": 50_000, "max_episode_steps": 200},
    "train": {"steps": 30_000, "log_every": 1000},
    "eval": {"episodes": 20, "max_episode_steps": 200},
    "coverage": {"bins": 20, "joint_dims": 3, "bounds": "env"},
    "report": {},
}

# exit codes
OK, FAILURE, USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _key_value(text):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def _seed_list(text):
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser():
    parser = _Parser(prog="batchrl", description="Task-agnostic exploration and offline RL at desk scale.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, seeded=True):
        p.add_argument("--config", help="JSON file with default settings; flags override it")
        if seeded:
            p.add_argument("--seed", type=int, default=None)
            p.add_argument("--seeds", type=_seed_list, default=None, help="run several seeds; use {seed} in output paths")
            p.add_argument("--jobs", type=int, default=None, help="parallel processes for --seeds")

    p = sub.add_parser("explore", help="collect a task-agnostic dataset")
    common(p)
    p.add_argument("--env")
    p.add_argument("--method")
    p.add_argument("--steps", type=int)
    p.add_argument("--max-episode-steps", type=int, dest="max_episode_steps")
    p.add_argument("--set", type=_key_value, action="append", dest="hyperparams", metavar="KEY=VALUE")
    p.add_argument("--out")

    p = sub.add_parser("train", help="train an offline learner on a relabeled dataset")
    common(p)
    p.add_argument("--dataset")
    p.add_argument("--algo")
    p.add_argument("--reward")
    p.add_argument("--steps", type=int)
    p.add_argument("--log-every", type=int, dest="log_every")
    p.add_argument("--set", type=_key_value, action="append", dest="hyperparams", metavar="KEY=VALUE")
    p.add_argument("--label")
    p.add_argument("--out")
    p.add_argument("--log", help="loss CSV path (default: next to the checkpoint)")

    p = sub.add_parser("eval", help="evaluate a checkpoint or the random-linear baseline")
    common(p)
    p.add_argument("--policy", help="checkpoint path or 'random-linear'")
    p.add_argument("--env")
    p.add_argument("--reward", help="defaults to the reward the policy was trained on")
    p.add_argument("--episodes", type=int)
    p.add_argument("--max-episode-steps", type=int, dest="max_episode_steps")
    p.add_argument("--label")
    p.add_argument("--csv")

    p = sub.add_parser("coverage", help="occupied-bin histogram of a dataset")
    common(p, seeded=False)
    p.add_argument("--dataset")
    p.add_argument("--bins", type=int)
    p.add_argument("--joint-dims", type=int, dest="joint_dims")
    p.add_argument("--bounds", choices=("env", "data"))
    p.add_argument("--csv")

    p = sub.add_parser("report", help="render CSV logs as SVG charts")
    common(p, seeded=False)
    p.add_argument("inputs", nargs="*")
    p.add_argument("--out")
    return parser


def resolve_settings(args, environ=None):
    """Merge defaults, the ``--config`` file, flags and ``BRL_SEED``."""
    environ = os.environ if environ is None else environ
    settings = dict(DEFAULTS[args.command])
    if args.config:
        settings.update(load_config_file(args.config))
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        if key == "hyperparams":
            merged = dict(settings.get("hyperparams") or {})
            merged.update(dict(value))
            settings["hyperparams"] = merged
        elif key == "inputs" and not value:
            continue
        else:
            settings[key] = value
    if args.command in ("explore", "train", "eval") and settings.get("seed") is None:
        if "BRL_SEED" in environ:
            try:
                settings["seed"] = int(environ["BRL_SEED"])
            except ValueError:
                raise ConfigError(f"BRL_SEED must be an integer, got {environ['BRL_SEED']!r}") from None
        else:
            settings["seed"] = 0
    return settings


def _require(settings, *keys):
    missing = [k for k in keys if settings.get(k) in (None, "")]
    if missing:
        raise UsageError("missing required settings: " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _created_utc():
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    moment = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return moment.strftime("%Y-%m-%dT%H:%M:%SZ")


def run_explore(s):
    _require(s, "env", "method", "steps", "out")
    env = make_env(s["env"], max_episode_steps=s["max_episode_steps"])
    hyper = dict(s.get("hyperparams") or {})
    config = ExperimentConfig(
        "explore", env=s["env"], method=s["method"], steps=s["steps"], seed=s["seed"],
        hyperparams={**hyper, "max_episode_steps": s["max_episode_steps"]}, outputs={"dataset": s["out"]},
    )
    explorer = make_explorer(s["method"], env.spec, np.random.default_rng(s["seed"]), **hyper)
    data = collect(explorer, env, s["steps"], s["seed"], {"config_hash": config.config_hash(), "created_utc": _created_utc()})
    dataset_write(data, s["out"])
    print(f"wrote {len(data)} transitions to {s['out']}")


def _default_log_path(out):
    return os.path.splitext(out)[0] + "_loss.csv"


def run_train(s):
    _require(s, "dataset", "algo", "reward", "steps", "out")
    data = dataset_read(s["dataset"])
    reward = parse_reward(s["reward"])
    hyper = dict(s.get("hyperparams") or {})
    config = ExperimentConfig(
        "train", env=data.env, method=data.metadata.get("method"), algo=s["algo"], steps=s["steps"], seed=s["seed"],
        reward=reward.spec_string, hyperparams=hyper, inputs={"dataset": s["dataset"]},
        outputs={"policy": s["out"]}, input_hashes={"dataset": data.content_hash()},
    )
    label = s.get("label") or f"{data.metadata.get('method') or 'data'}-{s['algo']}"
    meta = {"config_hash": config.config_hash(), "label": label, "method": data.metadata.get("method")}
    policy, rows = train_offline(data, reward, s["algo"], s["steps"], s["seed"], hyper, s["log_every"], meta)
    save_policy(policy, s["out"])
    log_path = s.get("log") or _default_log_path(s["out"])
    csv_meta = {"phase": "train", "config_hash": config.config_hash(), "env": data.env, "reward": reward.spec_string,
                "label": label, "algo": s["algo"], "seed": s["seed"]}
    write_csv(log_path, csv_meta, LOG_COLUMNS, rows)
    print(f"wrote checkpoint {s['out']} and loss log {log_path}")


def run_eval(s):
    _require(s, "policy", "episodes", "csv")
    if s["policy"] == "random-linear":
        _require(s, "env", "reward")
        env = make_env(s["env"], max_episode_steps=s["max_episode_steps"])
        policy = RandomLinearBaseline(env.spec)
        label, input_hashes = s.get("label") or "random-linear", {}
    else:
        policy = load_policy(s["policy"])
        env_name = s.get("env") or policy.env
        env = make_env(env_name, max_episode_steps=s["max_episode_steps"])
        s.setdefault("reward", None)
        s["reward"] = s["reward"] or policy.metadata.get("reward")
        _require(s, "reward")
        label = s.get("label") or policy.metadata.get("label") or policy.algorithm
        input_hashes = {"policy": file_hash(s["policy"])}
    reward = parse_reward(s["reward"])
    config = ExperimentConfig(
        "eval", env=env.spec.name, steps=s["max_episode_steps"], seed=s["seed"], reward=reward.spec_string,
        episodes=s["episodes"], inputs={"policy": s["policy"]}, outputs={"csv": s["csv"]}, input_hashes=input_hashes,
    )
    report = evaluate(policy, env, s["episodes"], s["seed"], reward)
    meta = {"phase": "eval", "config_hash": config.config_hash(), "env": env.spec.name, "reward": reward.spec_string,
            "label": label, "seed": s["seed"]}
    write_csv(s["csv"], meta, EVAL_COLUMNS, report.rows())
    print(f"mean return {report.mean:.6g} (std {report.std:.6g}) over {s['episodes']} episodes -> {s['csv']}")


def run_coverage(s):
    _require(s, "dataset", "csv")
    data = dataset_read(s["dataset"])
    bounds = None
    if s["bounds"] == "env":
        spec = make_env(data.env).spec
        bounds = (spec.obs_low, spec.obs_high)
    result = coverage(data, s["bins"], bounds, s["joint_dims"])
    rows = []
    for dims, hist in result.histograms.items():
        for idx in zip(*np.nonzero(hist)):
            rows.append((":".join(map(str, dims)), ":".join(str(int(i)) for i in idx), str(int(hist[idx]))))
    config = ExperimentConfig("coverage", env=data.env, hyperparams={"bins": s["bins"], "joint_dims": s["joint_dims"],
                              "bounds": s["bounds"]}, input_hashes={"dataset": data.content_hash()})
    meta = {"phase": "coverage", "config_hash": config.config_hash(), "env": data.env,
            "occupied": repr(result.occupied), "bins": s["bins"]}
    write_csv(s["csv"], meta, ("dims", "bin", "count"), rows)
    print(f"occupied bins {result.occupied:.6g} -> {s['csv']}")


def run_report(s):
    _require(s, "out")
    if not s.get("inputs"):
        raise UsageError("report needs at least one input CSV")
    result = emit_report(s["inputs"], s["out"])
    for path in result.files:
        print(f"wrote {path}")


RUNNERS = {"explore": run_explore, "train": run_train, "eval": run_eval, "coverage": run_coverage, "report": run_report}
_PATH_KEYS = ("out", "log", "csv", "dataset", "policy")


def _run_seed(command, settings, seed):
    s = dict(settings, seed=seed)
    for key in _PATH_KEYS:
        if isinstance(s.get(key), str):
            s[key] = s[key].replace("{seed}", str(seed))
    RUNNERS[command](s)


def dispatch(command, settings):
    seeds = settings.pop("seeds", None)
    jobs = settings.pop("jobs", None) or 1
    if command not in ("explore", "train", "eval") or not seeds:
        RUNNERS[command](settings)
        return
    templated = [k for k in _PATH_KEYS if isinstance(settings.get(k), str) and "{seed}" in settings[k]]
    if len(seeds) > 1 and not templated:
        raise UsageError("--seeds with several seeds needs '{seed}' in the output paths")
    if jobs <= 1:
        for seed in seeds:
            _run_seed(command, settings, seed)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for fut in [pool.submit(_run_seed, command, settings, seed) for seed in seeds]:
            fut.result()


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("batchrl: a subcommand is required (explore, train, eval, coverage, report)")
        settings = resolve_settings(args)
        dispatch(args.command, settings)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    except (OSError, FormatError, CorruptionError, ReportError, BatchRLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILURE
    return OK


if __name__ == "__main__":
    sys.exit(main())
