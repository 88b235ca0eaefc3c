"""Command-line front end: training runs, evaluation, variance reports, game sizes.

Configuration comes from three layers, highest precedence first: command-line
flags, a flat ``key = value`` file given by ``--config``, dataclass defaults.
Relative output paths are placed under ``$VRPO_OUT_ROOT`` when it is set.

Every failure ends with a single JSON line on stderr, e.g.
``{"error": "InvalidConfig", "field": "game", "message": "..."}``, and a
nonzero exit code.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .estimators import gae_advantages, qboost_advantages, CentralizedQCritic, CentralizedVCritic
from .games import (build_matching_pennies, enumerate_game, load_game, make_trajectory,
                    SizeGuardExceeded)
from .learner import (ALGORITHMS, TrainerConfig, evaluate, init_state, load_checkpoint,
                      save_checkpoint, train_iteration)
from .oracle import exact_values

OUT_ROOT_ENV = "VRPO_OUT_ROOT"
CSV_COLUMNS = ("iteration", "exploitability", "adv_std", "clip_fraction", "kl_ref", "kl_uniform",
               "mean_return_p1", "mean_traj_len", "lr_actor", "lr_critic", "eps", "alpha")


class CliError(Exception):
    kind = "Error"

    def __init__(self, field_name: str, message: str):
        super().__init__(message)
        self.field = field_name
        self.message = message

    def line(self) -> str:
        return json.dumps({"error": self.kind, "field": self.field, "message": self.message})


class InvalidConfig(CliError):
    kind = "InvalidConfig"


class IoFailure(CliError):
    kind = "IoFailure"


@dataclass
class ExperimentConfig:
    game: str = "matching_pennies_imperfect"
    algo: str = "vrpo"
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    eval_interval: int = 10
    out: str = "runs"
    seeds: tuple[int, ...] = (0,)

    def validate(self) -> None:
        try:
            load_game(self.game)
        except (KeyError, ValueError, SizeGuardExceeded) as exc:
            raise InvalidConfig("game", f"cannot build game {self.game!r}: {exc}") from None
        if self.algo not in ALGORITHMS:
            raise InvalidConfig("algo", f"unknown algorithm {self.algo!r}; expected one of {ALGORITHMS}")
        if not self.seeds:
            raise InvalidConfig("seeds", "at least one seed is required")
        if self.eval_interval < 1:
            raise InvalidConfig("eval_interval", "must be positive")
        try:
            self.trainer.validate()
        except ValueError as exc:
            raise InvalidConfig(str(exc).split()[0], str(exc)) from None

    def output_dir(self) -> Path:
        out = Path(self.out)
        root = os.environ.get(OUT_ROOT_ENV)
        return Path(root) / out if root and not out.is_absolute() else out


@dataclass
class RunArtifact:
    seed: int
    metrics: Path
    checkpoint: Path
    summary: Path


# ---------------------------------------------------------------------------
# config parsing

_TRAINER_FIELDS = {f.name: f for f in fields(TrainerConfig)}
_TOP_FIELDS = ("game", "algo", "eval_interval", "out", "seeds")


def _convert(key: str, raw: str):
    if key in ("game", "algo", "out"):
        return raw
    if key == "seeds":
        try:
            return tuple(int(s) for s in str(raw).replace(",", " ").split())
        except ValueError:
            raise InvalidConfig("seeds", f"not a list of integers: {raw!r}") from None
    kind = int if key == "eval_interval" else _TRAINER_FIELDS[key].type
    try:
        if kind in (int, "int"):
            return int(raw)
        if kind in (float, "float"):
            return float(raw)
        return str(raw)
    except ValueError:
        raise InvalidConfig(key, f"cannot parse {raw!r}") from None


def read_config_file(path: str | Path) -> dict[str, object]:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoFailure("config", f"cannot read {path}: {exc.strerror}") from None
    values: dict[str, object] = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig("config", f"line {n}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _TOP_FIELDS and key not in _TRAINER_FIELDS:
            raise InvalidConfig(key, f"unknown key on line {n}")
        values[key] = _convert(key, raw)
    return values


def build_config(file_values: dict[str, object], overrides: dict[str, object]) -> ExperimentConfig:
    merged = {**file_values, **{k: v for k, v in overrides.items() if v is not None}}
    trainer = TrainerConfig(**{k: v for k, v in merged.items() if k in _TRAINER_FIELDS})
    top = {k: v for k, v in merged.items() if k in _TOP_FIELDS}
    cfg = ExperimentConfig(trainer=trainer, **top)
    cfg.validate()
    return cfg


def dump_config(cfg: ExperimentConfig) -> str:
    lines = [f"game = {cfg.game}", f"algo = {cfg.algo}", f"eval_interval = {cfg.eval_interval}",
             f"out = {cfg.out}", "seeds = " + ",".join(map(str, cfg.seeds))]
    lines += [f"{k} = {v}" for k, v in asdict(cfg.trainer).items()]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# operations


def _fmt(x) -> str:
    return "" if x is None else repr(float(x)) if not isinstance(x, int) else str(x)


def run_seed(cfg: ExperimentConfig, seed: int) -> RunArtifact:
    game = load_game(cfg.game)
    trainer = replace(cfg.trainer, seed=seed)
    out = cfg.output_dir() / f"seed_{seed}"
    try:
        out.mkdir(parents=True, exist_ok=True)
        metrics_path = out / "metrics.csv"
        fh = open(metrics_path, "w", newline="")
    except OSError as exc:
        raise IoFailure("out", f"cannot write to {out}: {exc.strerror}") from None
    start = time.perf_counter()
    state = init_state(game, trainer, cfg.algo)
    expl, stds = None, []
    try:
        with fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            fh.flush()
            for it in range(1, trainer.total_iterations + 1):
                m = train_iteration(state)
                row_expl = None
                if it % cfg.eval_interval == 0 or it == trainer.total_iterations:
                    row_expl = expl = evaluate(state).exploitability
                stds.append(m.adv_std)
                s = m.schedule
                writer.writerow([it, _fmt(row_expl), _fmt(m.adv_std), _fmt(m.clip_fraction),
                                 _fmt(m.kl_ref), _fmt(m.kl_uniform), _fmt(m.mean_return_p1),
                                 _fmt(m.mean_traj_len), _fmt(s.lr_actor), _fmt(s.lr_critic),
                                 _fmt(s.eps), _fmt(s.alpha)])
                fh.flush()
        checkpoint = out / "checkpoint.npz"
        save_checkpoint(state, checkpoint)
        summary = {
            "game": cfg.game,
            "algo": cfg.algo,
            "seed": seed,
            "iterations": trainer.total_iterations,
            "final_exploitability": expl,
            "mean_adv_std": float(np.mean(stds)) if stds else None,
            "wall_time": time.perf_counter() - start,
        }
        summary_path = out / "summary.json"
        summary_path.write_text(json.dumps(summary, indent=2) + "\n")
    except OSError as exc:
        raise IoFailure("out", f"write failed under {out}: {exc.strerror}") from None
    return RunArtifact(seed, metrics_path, checkpoint, summary_path)


def run(cfg: ExperimentConfig) -> list[RunArtifact]:
    cfg.validate()
    return [run_seed(cfg, seed) for seed in cfg.seeds]


def variance_report(cfg: ExperimentConfig, iterations: int, algos=ALGORITHMS,
                    path: str | Path | None = None) -> Path:
    """Per-iteration advantage std for each algorithm and seed, one row per (seed, iteration).

    ``adv_std_<algo>`` pools every record used by actor updates;
    ``adv_std_<algo>_p<k>`` restricts to the decisions of player k (1-based).
    """
    cfg.validate()
    for a in algos:
        if a not in ALGORITHMS:
            raise InvalidConfig("algo", f"unknown algorithm {a!r}")
    if iterations < 0:
        raise InvalidConfig("iterations", "must be non-negative")
    path = Path(path) if path else cfg.output_dir() / "variance_report.csv"
    game = load_game(cfg.game)
    trainer = replace(cfg.trainer, total_iterations=max(iterations, 1))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fh = open(path, "w", newline="")
    except OSError as exc:
        raise IoFailure("out", f"cannot write {path}: {exc.strerror}") from None
    with fh:
        writer = csv.writer(fh, lineterminator="\n")
        players = range(1, game.n_players + 1)
        header = ["seed", "iteration"]
        for a in algos:
            header += [f"adv_std_{a}", *(f"adv_std_{a}_p{k}" for k in players)]
        writer.writerow(header)
        for seed in cfg.seeds if iterations else ():
            states = [init_state(game, replace(trainer, seed=seed), a) for a in algos]
            for it in range(1, iterations + 1):
                row = [seed, it]
                for s in states:
                    m = train_iteration(s)
                    row += [_fmt(m.adv_std), *map(_fmt, m.adv_std_by_player)]
                writer.writerow(row)
                fh.flush()
    return path


def figure1_demo() -> str:
    """Recompute the matching-pennies comparison of GAE and Q-boosting at the root.

    Uses exact critics and lam = gamma = 1.  The imperfect game pairs a
    uniform first player with a uniform second player; in the perfect game
    the second player mismatches deterministically.
    """
    lines = []
    results = {}
    for imperfect in (False, True):
        game = build_matching_pennies(imperfect)
        profile = game.uniform_profile()
        if not imperfect:
            for a in range(2):  # second player picks the other face
                info = game.infoset[game.children[0, a]]
                profile[info] = np.eye(2)[1 - a]
        exact = exact_values(game, profile, 1.0)
        vcrit, qcrit = CentralizedVCritic(exact.v), CentralizedQCritic(exact.q)
        kind = "imperfect" if imperfect else "perfect"
        lines.append(f"[{kind} information]  V1(root) = {exact.v[0, 0]:+g}")
        for a in range(2):
            s = game.children[0, a]
            lines.append(f"  V1({'ht'[a]}) = {exact.v[s, 0]:+g}   "
                         + "  ".join(f"Q1({'ht'[a]},{'ht'[b]}) = {exact.q[s, b, 0]:+g}" for b in range(2)))
        for a in range(2):
            for b in range(2):
                name = "ht"[a] + "ht"[b]
                s1 = game.children[0, a]
                traj = make_trajectory(game, [0, s1], [a, b])
                gae = gae_advantages(game, traj, vcrit, 1.0, 1.0, 0)[0].advantage
                boost = qboost_advantages(game, traj, qcrit, profile, 1.0, 1.0, 0)[0].advantage
                nxt = traj.next_states()
                v = np.where(game.terminal[nxt], 0.0, exact.v[nxt, 0])
                delta = traj.rewards[:, 0] + v - exact.v[traj.states, 0]
                vbar = np.einsum("sa,sa->s", game.state_policy(profile)[nxt], exact.q[nxt, :, 0])
                dplus = traj.rewards[:, 0] + vbar - exact.q[traj.states, traj.actions, 0]
                results[kind, name] = (gae, boost)
                lines.append(f"  {name}: delta = {delta.tolist()}  delta+ = {dplus.tolist()}  "
                             f"A_gae = {gae:+g}  A_boost = {boost:+g}")
    checks = [
        (results["imperfect", "ht"], (-1.0, 0.0)),
        (results["imperfect", "hh"], (1.0, 0.0)),
    ]
    for got, want in checks:
        assert abs(got[0] - want[0]) <= 1e-12 and abs(got[1] - want[1]) <= 1e-12, (got, want)
    assert abs(results["perfect", "ht"][0]) <= 1e-12
    mean_gae = np.mean([results["imperfect", n][0] for n in ("hh", "ht", "th", "tt")])
    assert abs(mean_gae) <= 1e-12
    lines.append("checks passed: imperfect ht gives GAE -1 and Q-boost 0, hh gives +1 and 0, perfect ht gives GAE 0")
    return "\n".join(lines)


def enumerate_report(name: str) -> dict[str, object]:
    try:
        game = load_game(name)
    except (KeyError, ValueError, SizeGuardExceeded) as exc:
        raise InvalidConfig("game", f"cannot build game {name!r}: {exc}") from None
    e = enumerate_game(game)
    return {"game": name, "states": e.n_states, "infosets": int(sum(e.infosets_per_player)),
            "infosets_per_player": list(e.infosets_per_player)}


# ---------------------------------------------------------------------------
# argument handling


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vrpo", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp):
        sp.add_argument("--config", help="flat key = value file")
        sp.add_argument("--game")
        sp.add_argument("--algo")
        sp.add_argument("--out")
        sp.add_argument("--seed", dest="seeds", help="seed or comma-separated seed list")
        sp.add_argument("--eval-interval", dest="eval_interval")
        for name in _TRAINER_FIELDS:
            if name != "seed":
                sp.add_argument("--" + name.replace("_", "-"), dest=name)

    common(sub.add_parser("train", help="train and write metrics, checkpoint, summary"))
    vr = sub.add_parser("variance-report", help="advantage std per iteration for each algorithm")
    common(vr)
    vr.add_argument("--iterations", type=int, default=200)
    vr.add_argument("--algos", default=",".join(ALGORITHMS))
    ev = sub.add_parser("evaluate", help="exploitability of a checkpoint")
    ev.add_argument("checkpoint")
    ev.add_argument("--ema", action="store_true", help="evaluate the averaged policy")
    sub.add_parser("figure1-demo", help="GAE vs Q-boosting on matching pennies")
    en = sub.add_parser("enumerate", help="state and infoset counts")
    en.add_argument("--game", required=True)
    return p


def _config_from_args(args) -> ExperimentConfig:
    file_values = read_config_file(args.config) if args.config else {}
    overrides = {}
    for key in (*_TOP_FIELDS, *_TRAINER_FIELDS):
        raw = getattr(args, key, None)
        if raw is not None:
            overrides[key] = _convert(key, raw)
    return build_config(file_values, overrides)


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.verb == "train":
            for art in run(_config_from_args(args)):
                print(art.summary)
        elif args.verb == "variance-report":
            cfg = _config_from_args(args)
            algos = tuple(a for a in args.algos.split(",") if a)
            print(variance_report(cfg, args.iterations, algos))
        elif args.verb == "evaluate":
            try:
                state = load_checkpoint(args.checkpoint)
            except (OSError, KeyError, ValueError) as exc:
                raise IoFailure("checkpoint", f"cannot load {args.checkpoint}: {exc}") from None
            report = evaluate(state, ema=args.ema)
            print(json.dumps({"iteration": state.iteration, **report.to_row()}))
        elif args.verb == "figure1-demo":
            print(figure1_demo())
        elif args.verb == "enumerate":
            print(json.dumps(enumerate_report(args.game)))
    except CliError as exc:
        print(exc.line(), file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report anything else as one line too
        print(json.dumps({"error": type(exc).__name__, "field": None, "message": str(exc)}),
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
