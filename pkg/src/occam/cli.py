"""Command-line entry point for the intervention pipeline and its reports.

Subcommands: ``run``, ``metrics``, ``ontology``, ``query``, ``report``,
``ablate``, ``fixtures``.  Configuration can come from a JSON file
(``--config``); command-line flags override file values, which override
built-in defaults.  Every file-writing subcommand drops a
``resolved_config.json`` snapshot next to its outputs, so any invocation can
be replayed from the snapshot alone.

Exit codes: 0 on success, 2 when a run completed but degraded (more than
half of the images failed), 1 on errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional

from .backends import (
    ENDPOINT_KINDS,
    OPERATOR_NAMES,
    FixtureSuite,
    OperatorEndpoint,
    RecordingSuite,
    resolve_suite,
)
from .engine import load_run_result, run_dataset
from .errors import OccamError
from .evaluate import write_metrics_report
from .formatting import sig9
from .io import dump_json, load_json
from .ontology import (
    QUERY_NAMES,
    RANKINGS,
    build_graph,
    check_consistency,
    class_concept_stats,
    concept_cooccurrence,
    export_turtle,
    import_turtle,
    top_k_concepts,
)
from .reporting import (
    PAYLOAD_SETTINGS,
    progressive_ablation,
    write_ablation_csv,
    write_payloads,
)
from .types import MASK_DIM_POLICIES, RunConfig

CACHE_ENV = "OCCAM_CACHE_DIR"

#: config keys, their defaults, and the flag that overrides each
DEFAULTS = {
    "run_id": "run",
    "seed": 0,
    "epsilon": 1e-8,
    "area_exclusion_pct": 99.0,
    "mask_policy": "error",
    "workers": os.cpu_count() or 1,
    "backends": None,
    "locator": None,
    "backend_options": {},
    "endpoints": {},
    "output_root": None,
    "min_similarity": None,
}


class CliError(OccamError):
    """A user-facing invocation problem; message printed, exit code 1."""


def load_config(path: Optional[str], args: argparse.Namespace) -> dict:
    """Merge defaults, config file, and explicit flags (highest wins)."""
    merged = dict(DEFAULTS)
    if path is not None:
        data = load_json(Path(path))
        if not isinstance(data, dict):
            raise CliError(f"config file {path} must hold a JSON object")
        unknown = sorted(set(data) - set(DEFAULTS))
        if unknown:
            raise CliError(
                f"config file {path} has unknown keys: {', '.join(unknown)}; "
                f"known keys: {', '.join(sorted(DEFAULTS))}"
            )
        merged.update(data)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _output_root(config: dict) -> Path:
    if config.get("output_root"):
        return Path(config["output_root"])
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path("occam-runs")


def _build_endpoints(config: dict, manifest_path: Optional[str]) -> dict:
    """Endpoint descriptions for RunConfig: default plus per-operator."""
    kind = config.get("backends")
    if not kind:
        raise CliError(
            "no backend configured; pass --backends "
            f"{{{'|'.join(ENDPOINT_KINDS)}}} or set \"backends\" in the config"
        )
    if kind not in ENDPOINT_KINDS:
        raise CliError(
            f"unknown backend kind {kind!r}; choose from {', '.join(ENDPOINT_KINDS)}"
        )
    locator = config.get("locator")
    if not locator and kind == "synthetic" and manifest_path:
        candidate = Path(manifest_path).parent / "world.json"
        if candidate.is_file():
            locator = str(candidate)
    if not locator:
        raise CliError(
            f"backend kind {kind!r} needs --locator "
            "(world file, fixture dir, command line, or base URL)"
        )
    default = OperatorEndpoint(
        kind=kind, locator=str(locator), options=config.get("backend_options") or {}
    )
    endpoints = {op: default for op in OPERATOR_NAMES}
    for op, spec in (config.get("endpoints") or {}).items():
        if op not in OPERATOR_NAMES:
            raise CliError(
                f"unknown operator {op!r} in endpoints; "
                f"known: {', '.join(OPERATOR_NAMES)}"
            )
        endpoints[op] = OperatorEndpoint.from_dict(spec)
    return endpoints


def _snapshot(out_dir: Path, subcommand: str, config: dict, extras: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"subcommand": subcommand, "config": dict(config), **extras}
    dump_json(payload, out_dir / "resolved_config.json")


def _graph_from_args(args: argparse.Namespace):
    if getattr(args, "graph", None):
        return import_turtle(Path(args.graph))
    if getattr(args, "run_dir", None):
        return build_graph(load_run_result(Path(args.run_dir)))
    raise CliError("pass --graph <file.ttl> or --run-dir <dir>")


# --- subcommands -----------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config, args)
    endpoints = _build_endpoints(config, args.manifest)
    run_config = RunConfig(
        run_id=config["run_id"],
        epsilon=config["epsilon"],
        area_exclusion_pct=config["area_exclusion_pct"],
        mask_dim_mismatch_policy=config["mask_policy"],
        rng_seed=config["seed"],
        endpoints=endpoints,
    )
    suite = resolve_suite(endpoints)
    output_root = _output_root(config)
    try:
        result = run_dataset(
            args.manifest, run_config, suite,
            output_root=output_root, workers=int(config["workers"]),
        )
    finally:
        suite.close()
    run_dir = output_root / run_config.run_id
    _snapshot(run_dir, "run", config, {"manifest": str(args.manifest)})
    counters = result.counters
    print(f"run {result.run_id}: {counters.images_ok}/{counters.images_total} "
          f"images ok, {counters.scored} interventions scored")
    print(f"artifacts: {run_dir}")
    if result.degraded:
        print("run degraded: more than half of the images failed",
              file=sys.stderr)
        return 2
    return 0


def cmd_metrics(args: argparse.Namespace) -> int:
    config = load_config(args.config, args)
    out_dir = Path(args.out) if args.out else Path(args.run_dir) / "reports"
    written = write_metrics_report(
        args.run_dir,
        out_dir=out_dir,
        manifest_path=args.manifest,
        min_similarity=config["min_similarity"],
    )
    _snapshot(out_dir, "metrics", config, {
        "run_dir": str(args.run_dir),
        "manifest": str(args.manifest) if args.manifest else None,
    })
    for name in sorted(written):
        print(f"{name}: {written[name]}")
    return 0


def cmd_ontology(args: argparse.Namespace) -> int:
    config = load_config(args.config, args)
    out_dir = Path(args.out) if args.out else Path(args.run_dir) / "ontology"
    out_dir.mkdir(parents=True, exist_ok=True)
    graph = build_graph(load_run_result(Path(args.run_dir)))
    turtle_path = out_dir / "graph.ttl"
    export_turtle(graph, turtle_path)
    violations = check_consistency(graph)
    dump_json(
        {"n_violations": len(violations),
         "violations": [{"kind": v.kind, "detail": v.detail} for v in violations]},
        out_dir / "consistency.json",
    )
    _snapshot(out_dir, "ontology", config, {"run_dir": str(args.run_dir)})
    print(f"graph: {turtle_path} ({len(graph.nodes)} nodes, "
          f"{len(graph.edges)} edges)")
    print(f"consistency: {len(violations)} violation(s)")
    return 0


def cmd_query(args: argparse.Namespace) -> int:
    if args.query not in QUERY_NAMES:
        raise CliError(
            f"unknown query {args.query!r}; available: {', '.join(QUERY_NAMES)}"
        )
    graph = _graph_from_args(args)
    if args.query == "class-concept-stats":
        rows = class_concept_stats(graph, args.class_name)
        print("concept\tn_evidence\tmean_cdp\tmean_contribution\t"
              "mean_mask_area\tmean_normalized_importance\tsupport_fraction")
        for s in rows:
            print(f"{s.concept}\t{s.n_evidence}\t{sig9(s.mean_cdp)}\t"
                  f"{sig9(s.mean_contribution)}\t{sig9(s.mean_mask_area)}\t"
                  f"{sig9(s.mean_normalized_importance)}\t"
                  f"{sig9(s.support_fraction)}")
    elif args.query == "concept-cooccurrence":
        rows = concept_cooccurrence(graph, args.class_name)
        print("concept_a\tconcept_b\tjoint_count\tp_a_given_b\tp_b_given_a")
        for c in rows:
            print(f"{c.concept_a}\t{c.concept_b}\t{c.joint_count}\t"
                  f"{sig9(c.p_a_given_b)}\t{sig9(c.p_b_given_a)}")
    else:  # top-k-concepts
        rows = top_k_concepts(graph, args.class_name, args.k, args.ranking)
        print(f"rank\tconcept\t{args.ranking}")
        for rank, s in enumerate(rows, start=1):
            print(f"{rank}\t{s.concept}\t{sig9(getattr(s, args.ranking))}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    config = load_config(args.config, args)
    graph = _graph_from_args(args)
    settings = PAYLOAD_SETTINGS if args.setting == "all" else (args.setting,)
    out_dir = Path(args.out)
    written = write_payloads(graph, args.class_name, out_dir, settings)
    _snapshot(out_dir, "report", config, {
        "class_name": args.class_name,
        "setting": args.setting,
        "run_dir": str(args.run_dir) if args.run_dir else None,
        "graph": str(args.graph) if args.graph else None,
    })
    for setting in settings:
        print(f"{setting}: {written[setting]}")
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    config = load_config(args.config, args)
    graph = _graph_from_args(args)
    endpoints = _build_endpoints(config, args.manifest)
    suite = resolve_suite(endpoints)
    ks = (args.k,) if args.k is not None else (0, 1, 2, 3)
    try:
        points = progressive_ablation(
            args.manifest, suite, graph,
            class_name=args.class_name,
            ks=ks,
            classifier_id=config["backends"],
            workers=int(config["workers"]),
            mask_policy=config["mask_policy"],
        )
    finally:
        suite.close()
    out_path = Path(args.out)
    write_ablation_csv(points, out_path)
    _snapshot(out_path.parent, "ablate", config, {
        "manifest": str(args.manifest),
        "class_name": args.class_name,
        "k": args.k,
    })
    for point in points:
        print(f"k={point.k}: accuracy {sig9(point.accuracy)} over "
              f"{point.n_images} images, removed {list(point.removed_concepts)}")
    print(f"csv: {out_path}")
    return 0


def cmd_fixtures(args: argparse.Namespace) -> int:
    config = load_config(args.config, args)
    if args.mode == "record":
        endpoints = _build_endpoints(config, args.manifest)
        live = resolve_suite(endpoints)
        recording = RecordingSuite(live, Path(args.fixture_dir))
        run_config = RunConfig(
            run_id=config["run_id"],
            epsilon=config["epsilon"],
            area_exclusion_pct=config["area_exclusion_pct"],
            mask_dim_mismatch_policy=config["mask_policy"],
            rng_seed=config["seed"],
        )
        output_root = _output_root(config)
        try:
            result = run_dataset(
                args.manifest, run_config, recording,
                output_root=output_root, workers=1,
            )
        finally:
            live.close()
        run_dir = output_root / run_config.run_id
        _snapshot(run_dir, "fixtures", config, {
            "mode": "record",
            "manifest": str(args.manifest),
            "fixture_dir": str(args.fixture_dir),
        })
        print(f"fixtures: {args.fixture_dir}")
        print(f"reference run: {run_dir}")
        return 2 if result.degraded else 0

    # replay: rerun against fixtures and compare run manifests byte-for-byte
    reference = load_run_result(Path(args.reference))
    fixture_suite = FixtureSuite(Path(args.fixture_dir))
    output_root = Path(args.out) if args.out else _output_root(config) / "replay"
    result = run_dataset(
        args.manifest, reference.config, fixture_suite,
        output_root=output_root, workers=1,
    )
    replay_bytes = (output_root / reference.config.run_id /
                    "manifest.json").read_bytes()
    reference_bytes = (Path(args.reference) / "manifest.json").read_bytes()
    identical = replay_bytes == reference_bytes
    print(f"replay byte-identical: {identical}")
    if not identical:
        return 1
    return 2 if result.degraded else 0


# --- argument parsing ------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="occam",
        description="Concept-intervention explanations for black-box "
                    "image classifiers.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_config_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--workers", type=int, help="parallel image workers")

    def add_backend_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--backends", choices=ENDPOINT_KINDS,
                       help="operator backend kind for all five operators")
        p.add_argument("--locator",
                       help="backend locator: world file, fixture dir, "
                            "command, or base URL")

    p_run = sub.add_parser("run", help="run the intervention pipeline")
    p_run.add_argument("--manifest", required=True, help="dataset manifest JSON")
    add_backend_flags(p_run)
    add_config_flags(p_run)
    p_run.add_argument("--run-id")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--epsilon", type=float)
    p_run.add_argument("--area-exclusion-pct", type=float,
                       dest="area_exclusion_pct")
    p_run.add_argument("--mask-policy", choices=MASK_DIM_POLICIES,
                       dest="mask_policy")
    p_run.add_argument("--output-root", dest="output_root")
    p_run.set_defaults(func=cmd_run)

    p_metrics = sub.add_parser("metrics", help="write metric reports for a run")
    p_metrics.add_argument("--run-dir", required=True)
    p_metrics.add_argument("--manifest",
                           help="dataset manifest; enables localization "
                                "scores when it carries ground-truth masks")
    p_metrics.add_argument("--out", help="report directory "
                                         "(default <run-dir>/reports)")
    p_metrics.add_argument("--min-similarity", type=float,
                           dest="min_similarity",
                           help="drop concept/ground-truth pairs whose text "
                                "similarity falls below this")
    add_config_flags(p_metrics)
    p_metrics.set_defaults(func=cmd_metrics)

    p_onto = sub.add_parser("ontology",
                            help="export the evidence graph and validate it")
    p_onto.add_argument("--run-dir", required=True)
    p_onto.add_argument("--out", help="output directory "
                                      "(default <run-dir>/ontology)")
    add_config_flags(p_onto)
    p_onto.set_defaults(func=cmd_ontology)

    p_query = sub.add_parser("query", help="run an aggregation query")
    p_query.add_argument("--graph", help="Turtle file")
    p_query.add_argument("--run-dir", help="run directory (graph built on "
                                           "the fly)")
    p_query.add_argument("--query", required=True,
                         help=f"one of: {', '.join(QUERY_NAMES)}")
    p_query.add_argument("--class-name", required=True, dest="class_name")
    p_query.add_argument("--k", type=int, default=3)
    p_query.add_argument("--ranking", choices=RANKINGS, default="mean_cdp")
    p_query.set_defaults(func=cmd_query)

    p_report = sub.add_parser("report", help="write class knowledge payloads")
    p_report.add_argument("--graph")
    p_report.add_argument("--run-dir")
    p_report.add_argument("--class-name", required=True, dest="class_name")
    p_report.add_argument("--setting", default="all",
                          choices=PAYLOAD_SETTINGS + ("all",))
    p_report.add_argument("--out", required=True)
    add_config_flags(p_report)
    p_report.set_defaults(func=cmd_report)

    p_ablate = sub.add_parser("ablate",
                              help="progressive concept-removal accuracy")
    p_ablate.add_argument("--manifest", required=True)
    p_ablate.add_argument("--graph")
    p_ablate.add_argument("--run-dir")
    add_backend_flags(p_ablate)
    add_config_flags(p_ablate)
    p_ablate.add_argument("--class-name", dest="class_name",
                          help="restrict to one class (default: whole "
                               "dataset with a global ranking)")
    p_ablate.add_argument("--k", type=int, choices=(0, 1, 2, 3),
                          help="single ladder point (default: all of 0..3)")
    p_ablate.add_argument("--out", required=True, help="output CSV path")
    p_ablate.add_argument("--mask-policy", choices=MASK_DIM_POLICIES,
                          dest="mask_policy")
    p_ablate.set_defaults(func=cmd_ablate)

    p_fix = sub.add_parser("fixtures", help="record or replay backend fixtures")
    p_fix.add_argument("mode", choices=("record", "replay"))
    p_fix.add_argument("--manifest", required=True)
    add_backend_flags(p_fix)
    add_config_flags(p_fix)
    p_fix.add_argument("--fixture-dir", required=True, dest="fixture_dir")
    p_fix.add_argument("--run-id")
    p_fix.add_argument("--seed", type=int)
    p_fix.add_argument("--reference",
                       help="reference run directory (replay mode)")
    p_fix.add_argument("--out", help="replay output root")
    p_fix.add_argument("--output-root", dest="output_root")
    p_fix.set_defaults(func=cmd_fixtures)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.subcommand == "fixtures" and args.mode == "replay" \
            and not args.reference:
        print("error: replay mode needs --reference <run-dir>", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (OccamError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
