"""Command-line front end: ``python -m qpredict <command> ...``.

Failures print a one-line JSON object ``{"error": category, "message": ...}``
to stderr and exit with 1 (validation), 2 (numerical) or 3 (size guard).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .bound import classical_lower_bound
from .distortion import EvalProtocol, distortion
from .errors import QPredictError, ValidationError
from .process import all_words, past_belief, propagate_words, sample_sequence, stationary_distribution
from .process import synchronized_state, uniform_renewal
from .quantum import bloch_coordinates, complete_unitary, encode_past
from .sweep import SweepSpec, run_sweep
from .trainer import TrainConfig, train

log = logging.getLogger("qpredict")


def _add_machine_args(p: argparse.ArgumentParser) -> None:
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--machine", type=Path, help="machine definition JSON")
    group.add_argument("--renewal", type=int, metavar="N", help="built-in uniform renewal process")


def _machine(args):
    if args.machine is not None:
        return io.read_machine(args.machine)
    return uniform_renewal(args.renewal)


def _add_train_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--max-iters", type=int, default=10_000)
    p.add_argument("--delta-c", type=float, default=0.1, help="stall threshold in bits")
    p.add_argument("--stall-window", type=int, default=10)
    p.add_argument("--fd-step", type=float, default=1e-6)


def _train_config(args, dim: int, alphabet_size: int, seed: int) -> TrainConfig:
    return TrainConfig(
        dim=dim,
        alphabet_size=alphabet_size,
        learning_rate=args.learning_rate,
        restarts=args.restarts,
        delta_c_threshold=args.delta_c,
        stall_window=args.stall_window,
        max_iters=args.max_iters,
        fd_step=args.fd_step,
        seed=seed,
    )


def _protocol(args) -> EvalProtocol:
    return EvalProtocol(args.past_length, args.future_length, args.floor)


def _emit(doc: dict, out: Path | None) -> None:
    text = json.dumps(doc, indent=2, allow_nan=False)
    if out is None:
        print(text)
    else:
        out.write_text(text + "\n")


def cmd_gen(args) -> None:
    machine = _machine(args)
    io.write_sequence(args.out, sample_sequence(machine, args.length, args.seed))


def cmd_train(args) -> None:
    data = io.read_sequence(args.data)
    alphabet = args.alphabet_size or (int(data.max()) + 1 if data.size else 1)
    config = _train_config(args, args.dim, alphabet, args.seed)
    result = train(data, config)
    io.write_model(args.out, result.best_model, {"seed": args.seed, "final_cost": result.final_cost})
    if args.report is not None:
        _emit(
            {
                "data": str(args.data),
                "length": int(data.size),
                "dim": args.dim,
                "alphabet_size": alphabet,
                "seed": args.seed,
                "final_cost": result.final_cost,
                "restart_costs": result.restart_costs,
                "iterations_used": result.iterations_used,
                "best_restart": result.best_restart,
                "cost_trace": result.cost_trace,
                "completeness_error": result.best_model.completeness_error(),
            },
            args.report,
        )


def cmd_eval(args) -> None:
    machine = _machine(args)
    model, _ = io.read_model(args.model, tol=args.model_tol)
    report = distortion(machine, model, _protocol(args))
    _emit(io.distortion_document(report), args.out)


def cmd_bound(args) -> None:
    report = classical_lower_bound(_machine(args), args.dim, K=args.K)
    if args.out is None:
        print(json.dumps({"bound": report.bound, "K": report.K, "tight": report.tight}))
    else:
        io.write_bound_report(args.out, report)


def cmd_sweep(args) -> None:
    if args.renewal:
        family, params = "renewal", tuple(args.renewal)
    else:
        family, params = "files", tuple(str(p) for p in args.machines)
    spec = SweepSpec(
        family=family,
        params=params,
        dims=tuple(args.dims),
        seeds=tuple(args.seeds),
        length=args.length,
        train_config=_train_config(args, 1, 2, 0),
        protocol=_protocol(args),
        cap_dims=args.cap_dims,
    )
    io.write_sweep_csv(args.out, run_sweep(spec, jobs=args.jobs))


def cmd_unitary(args) -> None:
    model, _ = io.read_model(args.model, tol=args.model_tol)
    io.write_matrix(args.out, complete_unitary(model))


def bloch_rows(machine, model, past_length: int) -> list[dict]:
    """Encoded state of every allowed past, with its weight and causal state."""
    if model.dim != 2:
        raise ValidationError(f"Bloch coordinates need a qubit model, got dim {model.dim}")
    weights = propagate_words(machine, stationary_distribution(machine), past_length).sum(axis=1)
    rows = []
    for word, w in zip(all_words(machine.alphabet_size, past_length), weights):
        if w <= 0:
            continue
        state = synchronized_state(machine, word)
        if state is None:
            # not synchronized: report the most likely state
            state = int(np.argmax(past_belief(machine, word)))
        x, y, z = bloch_coordinates(encode_past(model, word))
        rows.append({"past": "".join(map(str, word)), "probability": float(w), "causal_state": machine.state_names[state], "x": x, "y": y, "z": z})
    return rows


def cmd_bloch(args) -> None:
    model, _ = io.read_model(args.model, tol=args.model_tol)
    io.write_bloch_csv(args.out, bloch_rows(_machine(args), model, args.past_length))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qpredict", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="sample a symbol sequence from a machine")
    _add_machine_args(p)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="fit a Kraus model to a sequence")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--alphabet-size", type=int, default=None, help="default: largest symbol + 1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True, help="model file")
    p.add_argument("--report", type=Path, default=None, help="run report JSON")
    _add_train_args(p)
    p.set_defaults(func=cmd_train)

    def eval_args(p):
        p.add_argument("--past-length", type=int, default=None, help="default: max(5, Markov order)")
        p.add_argument("--future-length", type=int, default=1)
        p.add_argument("--floor", type=float, default=1e-12)

    p = sub.add_parser("eval", help="distortion of a model against a machine")
    _add_machine_args(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--model-tol", type=float, default=1e-10, help="completeness tolerance on load")
    p.add_argument("--out", type=Path, default=None)
    eval_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bound", help="classical lower bound at a model dimension")
    _add_machine_args(p)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--K", type=int, default=None, help="block length; default: Markov order")
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("sweep", help="train and score over a grid, write CSV")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--renewal", type=int, nargs="+", metavar="N")
    group.add_argument("--machines", type=Path, nargs="+")
    p.add_argument("--dims", type=int, nargs="+", required=True)
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--length", type=int, default=5000)
    p.add_argument("--cap-dims", action="store_true", help="skip dims above the machine's state count")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", type=Path, required=True)
    _add_train_args(p)
    eval_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("unitary", help="complete a model's Kraus set to a unitary")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--model-tol", type=float, default=1e-9)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_unitary)

    p = sub.add_parser("bloch", help="Bloch coordinates of encoded pasts (qubit models)")
    _add_machine_args(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--model-tol", type=float, default=1e-10)
    p.add_argument("--past-length", type=int, default=5)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_bloch)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        args.func(args)
    except QPredictError as exc:
        print(json.dumps({"error": exc.category, "message": str(exc)}), file=sys.stderr)
        return exc.exit_code
    return 0
