"""Command-line front-end: prune, evaluate, and sweep (prune with periodic evaluation).

Exit codes: 0 success, 1 usage or input error, 2 interval-magnitude explosion.
All diagnostics go to standard error; outputs are UTF-8.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

from . import __version__
from .annealing import EnergyWeights
from .evaluation import REPORT_COLUMNS, AttackConfig, evaluate_pair, report_row, write_reports
from .intervals import MagnitudeExplosionError
from .model import Network, compact, load_dataset, load_network, save_network
from .pruning import PruningConfig, PruningRun, hidden_sparsity, one_shot_baseline, run

AUTO_ALPHA_RELU = 0.75
AUTO_ALPHA_SIGMOID = 0.05


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad flags; remap to the documented code 1.
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


@dataclass
class RunManifest:
    command: str
    config: dict
    inputs: dict
    outputs: dict
    seed: int | None
    duration_seconds: float
    engine_version: str

    def write(self, path) -> None:
        # Atomic: readers never observe a half-written manifest.
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(json.dumps(asdict(self), indent=2) + "\n", encoding="utf-8")
        os.replace(tmp, path)


def _threads_flag(parser):
    parser.add_argument(
        "--threads", type=int,
        default=int(os.environ.get("DFPRUNE_THREADS", "0")),
        help="worker cap for parallel sections (0 = auto); recorded in the manifest",
    )


def _prune_flags(parser):
    parser.add_argument("--model", required=True, help="input model JSON")
    parser.add_argument("--target", type=float, required=True, help="fraction of hidden units to prune")
    parser.add_argument("--batch", type=float, default=0.0156,
                        help="fraction of each layer's alive units considered per epoch")
    parser.add_argument("--alpha", default="auto",
                        help="scale-metric weight in [0,1], or 'auto' (0.75 relu / 0.05 sigmoid)")
    parser.add_argument("--phi", type=float, default=0.9, help="similarity threshold")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True, help="output path for the pruned (compacted) model")
    parser.add_argument("--mode", choices=("stochastic", "one-shot"), default="stochastic")
    parser.add_argument("--trace", help="optional trace CSV path")
    parser.add_argument("--max-epochs", type=int, default=1000)
    _threads_flag(parser)


def _eval_flags(parser, require_models: bool = True):
    if require_models:
        parser.add_argument("--original", required=True, help="unpruned model JSON")
        parser.add_argument("--pruned", required=True, help="pruned model JSON")
    parser.add_argument("--dataset", required=True, help="NNDS dataset file")
    parser.add_argument("--epsilon", required=True, help="attack budget(s), comma separated")
    parser.add_argument("--craft-on", choices=("pruned", "original"), default="pruned",
                        help="which model the adversary attacks")
    parser.add_argument("--topk", type=int, help="also report top-K set preservation")
    if require_models:
        parser.add_argument("--out", required=True, help="report CSV path")
        _threads_flag(parser)


def _build_parser() -> _Parser:
    parser = _Parser(prog="dfprune", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    _prune_flags(sub.add_parser("prune", help="prune a model to a sparsity target"))
    _eval_flags(sub.add_parser("eval", help="evaluate robustness preservation of a model pair"))
    sweep = sub.add_parser("sweep", help="prune with periodic evaluation")
    _prune_flags(sweep)
    _eval_flags(sweep, require_models=False)
    sweep.add_argument("--report", required=True, help="long-form metrics CSV path")
    sweep.add_argument("--eval-every", type=int, default=1, help="evaluate every N epochs")
    return parser


def _parse_epsilons(raw: str) -> list[float]:
    try:
        values = [float(part) for part in raw.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise UsageError(f"bad --epsilon value: {raw!r}") from exc
    if not values:
        raise UsageError("--epsilon needs at least one value")
    return values


def _resolve_alpha(raw, net: Network) -> float:
    if raw != "auto":
        try:
            return float(raw)
        except ValueError as exc:
            raise UsageError(f"--alpha must be a float or 'auto', got {raw!r}") from exc
    kinds = [layer.activation for layer in net.layers[:-1]]
    sigmoid = sum(k == "sigmoid" for k in kinds)
    return AUTO_ALPHA_SIGMOID if sigmoid > len(kinds) - sigmoid else AUTO_ALPHA_RELU


def _pruning_config(args, net: Network) -> PruningConfig:
    alpha = _resolve_alpha(args.alpha, net)
    return PruningConfig(
        target=args.target,
        batch_fraction=args.batch,
        weights=EnergyWeights(alpha=alpha, phi=args.phi),
        seed=args.seed,
        max_epochs=args.max_epochs,
        mode=args.mode.replace("-", "_"),
    )


def _model_label(net: Network, path: str) -> str:
    return net.name or Path(path).stem


def _cmd_prune(args) -> int:
    t0 = time.perf_counter()
    net = load_network(args.model)
    cfg = _pruning_config(args, net)
    try:
        pruned, trace = run(net, cfg)
    except MagnitudeExplosionError as exc:
        if args.trace and getattr(exc, "partial_trace", None) is not None:
            exc.partial_trace.write_csv(args.trace)
        raise
    save_network(compact(pruned), args.out)
    if args.trace:
        trace.write_csv(args.trace)
    outputs = {"model": args.out}
    if args.trace:
        outputs["trace"] = args.trace
    manifest = RunManifest(
        command="prune",
        config={**cfg.echo(), "threads": args.threads},
        inputs={"model": args.model},
        outputs=outputs,
        seed=cfg.seed,
        duration_seconds=max(time.perf_counter() - t0, 1e-9),
        engine_version=__version__,
    )
    manifest.write(args.out + ".manifest.json")
    if not trace.completed:
        print(f"warning: target not reached (sparsity {trace.sparsity:.4f})", file=sys.stderr)
    return 0


def _cmd_eval(args) -> int:
    t0 = time.perf_counter()
    original = load_network(args.original)
    pruned = load_network(args.pruned)
    ds = load_dataset(args.dataset)
    sparsity = 1.0 - pruned.alive_hidden_units() / max(original.alive_hidden_units(), 1)
    label = _model_label(pruned, args.pruned)
    rows = []
    for eps in _parse_epsilons(args.epsilon):
        cfg = AttackConfig(epsilon=eps, craft_on=args.craft_on)
        rep = evaluate_pair(original, pruned, ds, cfg, topk=args.topk)
        rows.append(report_row(label, sparsity, rep))
    write_reports(args.out, rows)
    manifest = RunManifest(
        command="eval",
        config={"epsilon": args.epsilon, "craft_on": args.craft_on, "topk": args.topk,
                "threads": args.threads},
        inputs={"original": args.original, "pruned": args.pruned, "dataset": args.dataset},
        outputs={"report": args.out},
        seed=None,
        duration_seconds=max(time.perf_counter() - t0, 1e-9),
        engine_version=__version__,
    )
    manifest.write(args.out + ".manifest.json")
    return 0


def _cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    net = load_network(args.model)
    ds = load_dataset(args.dataset)
    cfg = _pruning_config(args, net)
    epsilons = _parse_epsilons(args.epsilon)
    label = _model_label(net, args.model)
    if args.eval_every < 1:
        raise UsageError("--eval-every must be >= 1")

    rows_written = 0

    def _evaluate(current: Network, fh, writer) -> None:
        nonlocal rows_written
        sparsity = hidden_sparsity(current)
        for eps in epsilons:
            rep = evaluate_pair(net, current, ds, AttackConfig(epsilon=eps, craft_on=args.craft_on),
                                topk=args.topk)
            writer.writerow(report_row(label, sparsity, rep))
            rows_written += 1
        fh.flush()

    with open(args.report, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        fh.flush()
        if cfg.mode == "one_shot":
            _evaluate(net, fh, writer)
            pruned, trace = one_shot_baseline(net, cfg.target)
            _evaluate(pruned, fh, writer)
        else:
            session = PruningRun(net, cfg)
            _evaluate(session.net, fh, writer)
            try:
                while not session.done():
                    session.step()
                    if session.epoch % args.eval_every == 0 or session.done():
                        _evaluate(session.net, fh, writer)
            except MagnitudeExplosionError as exc:
                if args.trace and getattr(exc, "partial_trace", None) is not None:
                    exc.partial_trace.write_csv(args.trace)
                raise
            pruned, trace = session.finish()
    save_network(compact(pruned), args.out)
    if args.trace:
        trace.write_csv(args.trace)
    outputs = {"model": args.out, "report": args.report}
    if args.trace:
        outputs["trace"] = args.trace
    manifest = RunManifest(
        command="sweep",
        config={**cfg.echo(), "epsilon": args.epsilon, "craft_on": args.craft_on,
                "topk": args.topk, "eval_every": args.eval_every, "threads": args.threads},
        inputs={"model": args.model, "dataset": args.dataset},
        outputs=outputs,
        seed=cfg.seed,
        duration_seconds=max(time.perf_counter() - t0, 1e-9),
        engine_version=__version__,
    )
    manifest.write(args.out + ".manifest.json")
    return 0


_COMMANDS = {"prune": _cmd_prune, "eval": _cmd_eval, "sweep": _cmd_sweep}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)
    except MagnitudeExplosionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
