"""Command-line entry point.

Exit status is 0 on success, 1 when an input fails validation and 2 for any
other runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from ggti.decode import PerfectPair, algorithm1_decode, get_decoder, majority_vote, make_single_isolation_pair
from ggti.errors import GGTIError, ValidationError
from ggti.experiment import ExperimentConfig, emit_report, run_experiment
from ggti.matrix import (
    MeasurementMatrix,
    bernoulli_matrix,
    bit_test_matrix,
    default_blocks,
    format_matrix,
    isolation_matrix,
    read_matrix,
    tensor_product,
)
from ggti.model import (
    ItemType,
    NoiseSpec,
    PerRunRole,
    PerTestRole,
    enumerate_model_space,
    parse_gap_policy,
    sample_ground_truth,
    spec_from_dict,
    truth_from_dict,
    truth_to_dict,
    validate_spec,
)
from ggti.neuro import ConnectivityGraph, NeuronScenario, feasible_classify, graph_closeness
from ggti.oracle import apply_noise, format_outcomes, read_outcomes, run_tests


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _load_json(path):
    if path is None:
        raise ValidationError("--config is required for this command")
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc


def _emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)


def _hybrid_policy(text: str, seed: int):
    if text == "per-test":
        return PerTestRole(seed)
    if text.startswith("per-run"):
        _, _, role = text.partition(":")
        return PerRunRole(ItemType(role or "defective"))
    raise ValidationError(f"unknown hybrid policy {text!r}")


def cmd_enumerate_models(args):
    count = enumerate_model_space()
    if args.format == "json":
        _emit(json.dumps({"factors": count.factors, "total": count.total}, indent=2) + "\n", args.out)
    else:
        lines = [f"{name} {value}" for name, value in count.factors.items()]
        lines.append(f"total {count.total}")
        _emit("\n".join(lines) + "\n", args.out)


def cmd_gen_matrix(args):
    family = args.family
    if family == "bernoulli":
        T = bernoulli_matrix(args.t, args.n, args.p, args.seed)
    elif family == "bit-test":
        T = bit_test_matrix(args.n)
    elif family == "identity":
        T = MeasurementMatrix.identity(args.n)
    elif family in ("isolation", "pair"):
        blocks = args.blocks or default_blocks(args.n, args.m0)
        T = isolation_matrix(args.n, args.m0, blocks, args.seed)
        if family == "pair":
            T = tensor_product(T, bit_test_matrix(args.n))
    else:
        raise ValidationError(f"unknown matrix family {family!r}")
    _emit(format_matrix(T), args.out)


def cmd_simulate(args):
    spec, n, seed = spec_from_dict(_load_json(args.config))
    if args.seed is not None:
        seed = args.seed
    if args.gap_policy:
        spec = replace(spec, gap=parse_gap_policy({"type": args.gap_policy, "seed": seed}))
    if args.hybrid_policy:
        spec = replace(spec, hybrid=_hybrid_policy(args.hybrid_policy, seed))
    if args.noise_z is not None or args.noise_mode:
        spec = replace(
            spec,
            noise=NoiseSpec(
                args.noise_z if args.noise_z is not None else spec.noise.z,
                args.noise_mode or spec.noise.mode,
                seed,
            ),
        )
    spec = validate_spec(spec, n).raise_if_invalid()
    T = read_matrix(args.matrix)
    truth = truth_from_dict(_load_json(args.truth)) if args.truth else sample_ground_truth(n, spec, seed)
    y = apply_noise(run_tests(T, truth, spec), spec.noise)
    if args.truth_out:
        with open(args.truth_out, "w") as fh:
            json.dump(truth_to_dict(truth), fh)
            fh.write("\n")
    _emit(format_outcomes(y), args.out)


def _load_pair(doc) -> tuple[PerfectPair, int]:
    reps = int(doc.get("repetition", 1))
    if "G" in doc:
        G, M = read_matrix(doc["G"]), read_matrix(doc["M"])
        names = doc.get("decoders", {"defective": "bit-test"})
        pair = PerfectPair(
            G,
            M,
            int(doc["m0"]),
            *(get_decoder(names[k]) if names.get(k) else None for k in ("defective", "inhibitor", "hybrid")),
        )
        return pair, reps
    if doc.get("decoder", "bit-test") != "bit-test":
        raise ValidationError("generated pairs use the bit-test decoder; give G and M files for others")
    pair = make_single_isolation_pair(int(doc["n"]), int(doc["m0"]), int(doc.get("seed", 0)), doc.get("g_blocks"))
    return pair, reps


def cmd_decode(args):
    try:
        pair, reps = _load_pair(_load_json(args.pair))
    except KeyError as exc:
        raise ValidationError(f"pair document missing {exc}") from exc
    y = read_outcomes(args.outcomes)
    if reps > 1:
        y = majority_vote(y, pair.k, reps)
    _emit(algorithm1_decode(y, pair).as_lines(), args.out)


def cmd_bench(args):
    cfg = ExperimentConfig.from_dict(_load_json(args.config))
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    fmt = args.format or cfg.format
    out = args.out or cfg.output
    reports = run_experiment(cfg)
    if out is None:
        raise ValidationError("bench needs --out or an output path in the config")
    emit_report(reports, out, fmt)


def cmd_neuro_classify(args):
    doc = _load_json(args.scenario)
    sc = NeuronScenario(tuple(doc["types"]), int(doc.get("stimulus_id", 0)))
    T = read_matrix(args.matrix)
    negative, firing = feasible_classify(T, sc)
    result = {"negative": sorted(negative), "non_negative": sorted(firing)}
    if args.graph:
        adj = _load_json(args.graph)
        result["closeness"] = graph_closeness(ConnectivityGraph(tuple(adj["adjacency"])), T)
    _emit(json.dumps(result) + "\n", args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ggti", description="Group testing with inhibitors and hybrid items.")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--config", default=None, help="JSON config for the subcommand")
    parser.add_argument("--out", default=None, help="output path (default: stdout)")
    parser.add_argument("--format", choices=("csv", "json"), default=None)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("enumerate-models", help="count model-space instance classes")

    p = sub.add_parser("gen-matrix", help="construct a measurement matrix")
    p.add_argument("--family", required=True, choices=("bernoulli", "bit-test", "identity", "isolation", "pair"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--t", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--m0", type=int, default=1)
    p.add_argument("--blocks", type=int)

    p = sub.add_parser("simulate", help="run tests for a model spec on a matrix")
    p.add_argument("--matrix", required=True)
    p.add_argument("--truth", help="ground-truth JSON (default: sample from the spec)")
    p.add_argument("--truth-out")
    p.add_argument("--gap-policy", choices=("always_negative", "always_positive", "random", "adversarial"))
    p.add_argument("--hybrid-policy", help="per-test | per-run[:defective|:inhibitor]")
    p.add_argument("--noise-z", type=int)
    p.add_argument("--noise-mode", choices=("random", "adversarial"))

    p = sub.add_parser("decode", help="block-decode an outcome file")
    p.add_argument("--pair", required=True, help="perfect-pair JSON")
    p.add_argument("--outcomes", required=True)

    sub.add_parser("bench", help="run a seeded experiment batch")

    p = sub.add_parser("neuro-classify", help="negative / non-negative neuron split")
    p.add_argument("--scenario", required=True)
    p.add_argument("--matrix", required=True)
    p.add_argument("--graph", help="connectivity JSON for a closeness score")
    return parser


COMMANDS = {
    "enumerate-models": cmd_enumerate_models,
    "gen-matrix": cmd_gen_matrix,
    "simulate": cmd_simulate,
    "decode": cmd_decode,
    "bench": cmd_bench,
    "neuro-classify": cmd_neuro_classify,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "gen-matrix" and args.seed is None:
            args.seed = 0
        COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (GGTIError, OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
