"""Command-line surface tying calibrate -> route -> evaluate together."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import baselines, evaluation, storage
from .calibrator import aggregate_wasserstein, calibrate, wasserstein_error
from .core import InvalidInputError, RoutingConfig, UnsupportedDiagnosticError, UnsupportedLossError
from .diagnostics import check_entropy_lipschitz, check_loss_lipschitz, run_lemma_checks
from .losses import CROSS_ENTROPY, KINDS, LossSpec
from .partition import fit, partition_quality
from .router import OracleSpec, Router
from .synthetic import KINDS as SYNTH_KINDS
from .synthetic import generate


def parse_loss(text: str) -> LossSpec:
    """``brier`` | ``crossentropy[:eps]`` | ``weighted_fp_fn:CFP:CFN`` |
    ``asymmetric_class:GAMMA`` | ``classification`` | ``three_part``"""
    parts = text.split(":")
    kind = parts[0]
    if kind not in KINDS:
        raise InvalidInputError(f"unknown loss {kind!r}; choose from {KINDS}")
    if kind == CROSS_ENTROPY and len(parts) == 2:
        return LossSpec(kind, epsilon=float(parts[1]))
    if kind == "weighted_fp_fn" and len(parts) == 3:
        return LossSpec(kind, c_fp=float(parts[1]), c_fn=float(parts[2]))
    if kind == "asymmetric_class" and len(parts) == 2:
        return LossSpec(kind, gamma=float(parts[1]))
    if len(parts) > 1:
        raise InvalidInputError(f"unexpected parameters for loss {kind!r}: {text!r}")
    return LossSpec(kind)


def parse_partition(text: str):
    """``topclass:BUCKETS`` | ``feature:BUCKETS[:INDEX]`` | ``levelset``"""
    parts = text.split(":")
    kind = parts[0]
    if kind == "levelset":
        return {"kind": kind}
    if kind in ("topclass", "feature") and len(parts) >= 2:
        spec = {"kind": kind, "buckets": int(parts[1])}
        if kind == "feature":
            spec["feature_index"] = int(parts[2]) if len(parts) > 2 else 0
        return spec
    raise InvalidInputError(f"bad partition spec {text!r}")


def parse_beta(text: str) -> float:
    return math.inf if text.lower() in ("inf", "infinity") else float(text)


def parse_oracle(text: str) -> OracleSpec:
    """``bayes`` | ``aggregated:ANNOTATORS:mean|majority``"""
    parts = text.split(":")
    if parts[0] == "bayes" and len(parts) == 1:
        return OracleSpec(kind="bayes")
    if parts[0] == "aggregated" and len(parts) == 3:
        return OracleSpec(kind="aggregated", num_annotators=int(parts[1]), aggregation=parts[2])
    raise InvalidInputError(f"bad oracle spec {text!r}")


def parse_grid(text: str) -> list[float]:
    """Inclusive ``lo:hi:step`` grid (endpoints within half a step)."""
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise InvalidInputError(f"bad grid {text!r}, expected lo:hi:step") from None
    if step <= 0 or hi < lo:
        raise InvalidInputError(f"bad grid {text!r}: need step > 0 and hi >= lo")
    values = []
    i = 0
    while True:
        v = lo + i * step
        if v > hi + step / 2.0:
            break
        values.append(v)
        i += 1
    return values


def _manifest_path(args: argparse.Namespace, out: str | None, fallback: str) -> Path:
    if getattr(args, "manifest", None):
        return Path(args.manifest)
    return Path(str(out) + ".manifest.json") if out else Path(fallback)


def _args_record(args: argparse.Namespace) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def _require_files(*paths: str) -> None:
    missing = [p for p in paths if p and not Path(p).exists()]
    if missing:
        raise InvalidInputError(f"input file(s) not found: {', '.join(missing)}")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_generate_synthetic(args: argparse.Namespace) -> int:
    data = generate(
        args.kind,
        sizes=(args.train, args.cal, args.test),
        k=args.k,
        seed=args.seed,
        weak_bins=args.weak_bins,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cal_path = out_dir / "calibration.jsonl"
    test_path = out_dir / "test.jsonl"
    storage.write_dataset(cal_path, data.calibration)
    storage.write_dataset(test_path, data.test)
    storage.write_manifest(
        _manifest_path(args, None, str(out_dir / "manifest.json")),
        command="generate-synthetic",
        args=_args_record(args),
        outputs=[cal_path, test_path],
        seed=args.seed,
    )
    print(f"wrote {cal_path} ({len(data.calibration)} records) and {test_path} ({len(data.test)} records)")
    return 0


def cmd_calibrate(args: argparse.Namespace) -> int:
    _require_files(args.input)
    examples = storage.ingest(args.input)
    part = parse_partition(args.partition)
    spec = fit(
        part["kind"],
        examples,
        buckets=part.get("buckets", 1),
        feature_index=part.get("feature_index", 0),
    )
    model = calibrate(spec, examples, recalibrate=args.recalibrate)
    storage.save_model(args.out, model)
    storage.write_manifest(
        _manifest_path(args, args.out, "calibrate.manifest.json"),
        command="calibrate",
        args=_args_record(args),
        inputs=[args.input],
        outputs=[args.out],
    )
    print(f"calibrated {len(examples)} examples into {len(model.mixtures)} bins -> {args.out}")
    return 0


def cmd_route(args: argparse.Namespace) -> int:
    _require_files(args.model, args.input or "")
    model = storage.load_model(args.model)
    config = RoutingConfig(
        loss=parse_loss(args.loss),
        route_penalties=tuple(args.alpha),
        abstain_penalty=parse_beta(args.beta),
    )
    oracles = [parse_oracle(o) for o in args.oracle] if args.oracle else None
    router = Router(model, config, oracles)
    in_stream = open(args.input) if args.input else sys.stdin
    out_stream = open(args.out, "w") if args.out else sys.stdout
    lines = 0
    try:
        for lineno, line in enumerate(in_stream, start=1):
            if not line.strip():
                continue
            query = storage.parse_query(line, model.num_classes, lineno)
            bin_id, decision = router.decide(query)
            out_stream.write(
                json.dumps(
                    {"id": query.id, "bin": bin_id, "action": decision.action, "est_costs": decision.est_costs}
                )
                + "\n"
            )
            lines += 1
    finally:
        if args.input:
            in_stream.close()
        if args.out:
            out_stream.close()
    storage.write_manifest(
        _manifest_path(args, args.out, "route.manifest.json"),
        command="route",
        args=_args_record(args),
        inputs=[p for p in (args.model, args.input) if p],
        outputs=[p for p in (args.out,) if p],
    )
    return 0


def cmd_curve(args: argparse.Namespace) -> int:
    _require_files(args.model, args.test)
    model = storage.load_model(args.model)
    test = storage.ingest(args.test)
    loss = parse_loss(args.loss)
    use_recal = not args.raw_predictions
    wanted = [p.strip() for p in args.policies.split(",") if p.strip()]
    curves = []
    for name in wanted:
        if name == evaluation.HOC_ROUTER:
            policy = evaluation.router_scores(model, test, loss)
        elif name == baselines.TOTAL_UNCERTAINTY:
            policy = baselines.total_uncertainty_scores(test, loss, model, use_recalibrated=use_recal)
        elif name == baselines.BUCKET_OPTIMAL:
            policy = baselines.bucket_optimal_scores(test, loss, model, use_recalibrated=use_recal)
        elif name == baselines.POINTWISE_OPTIMAL:
            policy = baselines.pointwise_optimal_scores(test, loss, model, use_recalibrated=use_recal)
        elif name == baselines.RANDOM:
            policy = baselines.random_scores(test, seed=args.seed)
        else:
            raise InvalidInputError(f"unknown policy {name!r}")
        curves.append(evaluation.routing_curve(policy, test, loss, model, use_recalibrated=use_recal))
    for label_path in args.scores:
        name, _, path = label_path.partition("=")
        if not path:
            raise InvalidInputError("external scores need NAME=PATH")
        _require_files(path)
        policy = baselines.external_scores(test, storage.read_scores_csv(path), name=name)
        curves.append(evaluation.routing_curve(policy, test, loss, model, use_recalibrated=use_recal))
    storage.write_curves_csv(args.out, curves)
    storage.write_manifest(
        _manifest_path(args, args.out, "curve.manifest.json"),
        command="curve",
        args=_args_record(args),
        inputs=[args.model, args.test],
        outputs=[args.out],
        seed=args.seed,
    )
    print(f"wrote {len(curves)} curves -> {args.out}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    _require_files(args.model, args.test)
    model = storage.load_model(args.model)
    test = storage.ingest(args.test)
    sweep = evaluation.cost_sweep(
        model,
        test,
        parse_loss(args.loss),
        alpha=args.alpha,
        betas=parse_grid(args.beta),
        use_recalibrated=not args.raw_predictions,
    )
    storage.write_sweep_csv(args.out, sweep)
    storage.write_manifest(
        _manifest_path(args, args.out, "sweep.manifest.json"),
        command="sweep",
        args=_args_record(args),
        inputs=[args.model, args.test],
        outputs=[args.out],
    )
    print(f"wrote {len(sweep.rows)} sweep rows -> {args.out}")
    return 0


def cmd_diagnose(args: argparse.Namespace) -> int:
    report: dict = {}
    failed = False
    if args.self_test:
        results = [r.to_record() for r in run_lemma_checks(seed=args.seed, trials=args.trials)]
        failed = any(not r["passed"] for r in results)
        report["self_test"] = results
    if args.model and args.test:
        _require_files(args.model, args.test)
        model = storage.load_model(args.model)
        test = storage.ingest(args.test)
        loss = parse_loss(args.loss)
        quality = partition_quality(model.partition, test, loss)
        report["partition_quality"] = {
            "per_bin": quality.per_bin,
            "aggregate": quality.aggregate,
            "empty_bins": quality.empty_bins,
        }
        try:
            report["wasserstein"] = {
                "per_bin": wasserstein_error(model, test),
                "weighted_mean": aggregate_wasserstein(model, test),
            }
        except UnsupportedDiagnosticError as err:
            report["wasserstein"] = {"skipped": str(err)}
        rng = np.random.default_rng(args.seed)
        spots = [
            check_loss_lipschitz(loss, model.num_classes, 5000, rng),
            check_entropy_lipschitz(loss, model.num_classes, 5000, rng),
        ]
        report["lipschitz_spot_check"] = [r.to_record() for r in spots]
        failed = failed or any(not r.passed for r in spots)
    elif not args.self_test:
        raise InvalidInputError("diagnose needs --self-test and/or --model with --test")
    print(json.dumps(report, indent=2, sort_keys=True))
    storage.write_manifest(
        _manifest_path(args, None, "diagnose.manifest.json"),
        command="diagnose",
        args=_args_record(args),
        inputs=[p for p in (args.model, args.test) if p],
        seed=args.seed,
    )
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# Parser and dispatch
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hocroute",
        description="Uncertainty-aware predict/route/abstain decisions from snapshot-calibrated predictors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-synthetic", help="write a synthetic snapshot dataset")
    p.add_argument("--kind", choices=SYNTH_KINDS, default="sinusoidal")
    p.add_argument("--train", type=int, default=10_000)
    p.add_argument("--cal", type=int, default=5_000)
    p.add_argument("--test", type=int, default=100_000)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weak-bins", type=int, default=50)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_generate_synthetic)

    p = sub.add_parser("calibrate", help="fit a partition and store per-bin mixtures")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--partition", default="topclass:10")
    p.add_argument("--recalibrate", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("route", help="stream decisions for JSONL queries")
    p.add_argument("--model", required=True)
    p.add_argument("--loss", default="brier")
    p.add_argument("--alpha", type=float, nargs="+", default=[0.05])
    p.add_argument("--beta", default="inf")
    p.add_argument("--oracle", action="append", default=[], metavar="SPEC",
                   help="one per --alpha value: bayes | aggregated:K:mean|majority")
    p.add_argument("--in", dest="input")
    p.add_argument("--out")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("curve", help="write routing curves as CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--loss", default="brier")
    p.add_argument(
        "--policies",
        default="hoc_router,total_uncertainty,bucket_optimal,pointwise_optimal",
    )
    p.add_argument("--scores", action="append", default=[], metavar="NAME=PATH")
    p.add_argument("--raw-predictions", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("sweep", help="three-way vs two-way cost sweep over abstention penalties")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--loss", default="brier")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--beta", required=True, help="grid lo:hi:step")
    p.add_argument("--raw-predictions", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("diagnose", help="calibration diagnostics and the self-test suite")
    p.add_argument("--model")
    p.add_argument("--test")
    p.add_argument("--loss", default="brier")
    p.add_argument("--self-test", action="store_true")
    p.add_argument("--trials", type=int, default=20_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_diagnose)

    return parser


def cli_dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints usage itself
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (InvalidInputError, UnsupportedLossError, UnsupportedDiagnosticError, OSError) as err:
        print(json.dumps({"error": type(err).__name__, "message": str(err)}), file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
