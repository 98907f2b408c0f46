"""Command-line entry point.

Subcommands: pseudonymize, campaign {create,export,stats}, eval {map,accuracy},
mock-serve, serve-annotations. Exit codes: 0 success, 1 partial failure,
2 usage error. Config precedence: flag > environment (PRIVAKIT_*) > file >
default.
"""

from __future__ import annotations

import argparse
import csv
import glob
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .annotation import AnnotationServer, AnnotationStore, ServiceConfig
from .backends import GENERATE_MODES, HttpBackend, MockBackend
from .campaigns import KINDS, build_campaign
from .errors import DegenerateVarianceError, PrivakitError
from .imaging import load_png
from .metrics import (
    aggregate_scores,
    alpha_from_records,
    classification_accuracy,
    mean_ap,
)
from .mockserver import MockServer
from .pipeline import PipelineConfig, pseudonymize_image, write_result
from .records import (
    AnnotationRecord,
    PredictionLabel,
    detection_from_json,
    ground_truth_from_json,
)
from .scenes import SceneRegistry

log = logging.getLogger("privakit")

ENV_PREFIX = "PRIVAKIT_"


def _env_override(name: str, default=None):
    return os.environ.get(ENV_PREFIX + name.upper(), default)


def _load_pipeline_config(args) -> PipelineConfig:
    data: dict = {}
    if args.config:
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
    for key in ("seed", "generator_resolution", "max_parallel_subjects"):
        value = _env_override(key)
        if value is not None:
            data[key] = int(value)
    for key in ("prompt_strategy", "generate_mode", "backend_url"):
        value = _env_override(key)
        if value is not None:
            data[key] = value
    if args.seed is not None:
        data["seed"] = args.seed
    if getattr(args, "jobs", None):
        data["max_parallel_subjects"] = args.jobs
    if getattr(args, "generate_mode", None):
        data["generate_mode"] = args.generate_mode
    if getattr(args, "backend", None):
        data["backend_url"] = args.backend
    if getattr(args, "pii", None):
        data["pii_descriptions"] = args.pii
    return PipelineConfig.from_dict(data)


def cmd_pseudonymize(args) -> int:
    config = _load_pipeline_config(args)
    inputs = sorted(p for pattern in args.input for p in glob.glob(pattern))
    if not inputs:
        print(f"error: no inputs match {args.input}", file=sys.stderr)
        return 2
    if args.mock:
        registry = SceneRegistry.from_directory(args.scenes) if args.scenes else SceneRegistry()
        backend = MockBackend(registry, generate_mode=config.generate_mode)
    elif config.backend_url:
        backend = HttpBackend(config.backend_url, token=args.token)
    else:
        print("error: need --mock or a backend URL (--backend / config)", file=sys.stderr)
        return 2

    out_root = Path(args.out)
    failures = []
    for path in inputs:
        image_id = Path(path).stem
        try:
            image = load_png(path)
            result = pseudonymize_image(image, config, backend, image_id=image_id)
            write_result(result, out_root / image_id)
            print(f"{image_id}: ok digest={result.manifest_digest[:12]}")
        except (PrivakitError, OSError) as exc:
            failures.append((image_id, str(exc)))
            print(f"{image_id}: FAILED {exc}", file=sys.stderr)
            if args.fail_fast:
                break
    if failures:
        print(f"{len(failures)}/{len(inputs)} images failed", file=sys.stderr)
        return 1
    return 0


def _read_sources(args) -> list[str]:
    if args.sources:
        lines = Path(args.sources).read_text(encoding="utf-8").splitlines()
        return [ln.strip() for ln in lines if ln.strip()]
    return [f"img-{i:04d}" for i in range(args.source_count)]


def cmd_campaign_create(args) -> int:
    spec = build_campaign(
        kind=args.kind,
        sources=_read_sources(args),
        seed=args.seed or 0,
        annotators_per_image=args.annotators,
        combos=args.combos,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{spec.kind}-campaign.json"
    path.write_text(spec.to_json(), encoding="utf-8")
    print(
        f"{spec.kind}: prompts={spec.prompt_count} tasks={spec.task_count} "
        f"annotations={spec.annotations_required} -> {path}"
    )
    return 0


def cmd_campaign_export(args) -> int:
    store = AnnotationStore(args.data)
    lines = store.export(args.campaign)
    out = Path(args.out) if args.out else None
    text = "".join(line + "\n" for line in lines)
    if out:
        out.write_text(text, encoding="utf-8")
        print(f"exported {len(lines)} records -> {out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_campaign_stats(args) -> int:
    with open(args.records, encoding="utf-8") as fh:
        records = [AnnotationRecord.from_json(line) for line in fh if line.strip()]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for group_by in ("attribute", "category", "level"):
        rows = aggregate_scores(records, group_by) if records else []
        with (out / f"scores_by_{group_by}.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([group_by, "mean", "std", "count"])
            for row in rows:
                writer.writerow([row.group, f"{row.mean:.4f}", f"{row.std:.4f}", row.count])
    alpha_text = "n/a"
    try:
        alpha = alpha_from_records(records)
        alpha_text = f"{alpha:.4f}"
    except DegenerateVarianceError as exc:
        alpha_text = f"degenerate ({exc})"
    except PrivakitError as exc:
        alpha_text = f"unavailable ({exc})"
    (out / "alpha.txt").write_text(alpha_text + "\n", encoding="utf-8")
    print(f"records={len(records)} alpha={alpha_text} tables -> {out}")
    return 0


def cmd_eval_map(args) -> int:
    with open(args.detections, encoding="utf-8") as fh:
        dets = [detection_from_json(line) for line in fh if line.strip()]
    with open(args.ground_truth, encoding="utf-8") as fh:
        gts = [ground_truth_from_json(line) for line in fh if line.strip()]
    report = mean_ap(dets, gts)
    text = json.dumps(report, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return 0


def cmd_eval_accuracy(args) -> int:
    labels = []
    with open(args.predictions, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                labels.append(
                    PredictionLabel(
                        image_id=d["image_id"],
                        category=d["category"],
                        predicted=d["predicted"],
                        actual=d["actual"],
                    )
                )
    report = classification_accuracy(labels)
    text = json.dumps(report, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return 0


def cmd_mock_serve(args) -> int:
    registry = SceneRegistry.from_directory(args.scenes) if args.scenes else SceneRegistry()
    backend = MockBackend(registry, generate_mode=args.generate_mode)
    server = MockServer(backend, host=args.host, port=args.port, token=args.token)
    print(f"mock backend on {args.host}:{server.port} scenes={len(registry)}")
    server.serve_until_signal()
    return 0


def cmd_serve_annotations(args) -> int:
    config = ServiceConfig.load(args.config)
    if args.data:
        config.data_dir = args.data
    if args.images:
        config.images_dir = args.images
    if args.ui:
        config.ui_dir = args.ui
    if args.port is not None:
        config.port = args.port
    if args.host:
        config.host = args.host
    if args.token:
        config.token = args.token
    store = AnnotationStore(config.data_dir)
    server = AnnotationServer(store, config)
    print(f"annotation service on {config.host}:{server.port} data={config.data_dir}")
    server.serve_until_signal()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="privakit",
        description="Image pseudonymization pipeline and evaluation toolkit",
    )
    parser.add_argument("--version", action="version", version=f"privakit {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pseudonymize", help="replace humans in images in place")
    p.add_argument("--input", nargs="+", required=True, help="input PNG path(s) or glob(s)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--seed", type=int, help="pipeline seed")
    p.add_argument("--mock", action="store_true", help="use in-process mock backends")
    p.add_argument("--scenes", help="planted-scene directory for the mocks")
    p.add_argument("--backend", help="base URL of a backend worker service")
    p.add_argument("--token", help="bearer token for the backend service")
    p.add_argument("--jobs", type=int, help="max concurrent subjects per image")
    p.add_argument("--generate-mode", choices=GENERATE_MODES, help="mock generator mode")
    p.add_argument("--pii", nargs="*", help="PII descriptions to detect and inpaint")
    p.add_argument("--fail-fast", action="store_true")
    p.set_defaults(fn=cmd_pseudonymize)

    c = sub.add_parser("campaign", help="evaluation campaign tools")
    csub = c.add_subparsers(dest="subcommand", required=True)

    cc = csub.add_parser("create", help="materialize a campaign manifest")
    cc.add_argument("--kind", choices=KINDS, required=True)
    cc.add_argument("--sources", help="file with one source image id per line")
    cc.add_argument("--source-count", type=int, default=250,
                    help="generate this many synthetic source ids instead")
    cc.add_argument("--seed", type=int, default=0)
    cc.add_argument("--annotators", type=int, default=3)
    cc.add_argument("--combos", type=int, default=396)
    cc.add_argument("--out", required=True)
    cc.set_defaults(fn=cmd_campaign_create)

    ce = csub.add_parser("export", help="dump a campaign's annotation records")
    ce.add_argument("--data", required=True, help="annotation service data dir")
    ce.add_argument("--campaign", required=True)
    ce.add_argument("--out")
    ce.add_argument("--seed", type=int)
    ce.set_defaults(fn=cmd_campaign_export)

    cs = csub.add_parser("stats", help="mean/std tables and reliability from records")
    cs.add_argument("--records", required=True, help="NDJSON annotation records")
    cs.add_argument("--out", required=True)
    cs.add_argument("--seed", type=int)
    cs.set_defaults(fn=cmd_campaign_stats)

    e = sub.add_parser("eval", help="utility metrics")
    esub = e.add_subparsers(dest="subcommand", required=True)

    em = esub.add_parser("map", help="mean average precision from NDJSON boxes")
    em.add_argument("--detections", required=True)
    em.add_argument("--ground-truth", required=True)
    em.add_argument("--out")
    em.add_argument("--seed", type=int)
    em.set_defaults(fn=cmd_eval_map)

    ea = esub.add_parser("accuracy", help="per-category classification accuracy")
    ea.add_argument("--predictions", required=True)
    ea.add_argument("--out")
    ea.add_argument("--seed", type=int)
    ea.set_defaults(fn=cmd_eval_accuracy)

    m = sub.add_parser("mock-serve", help="serve the six mock model roles over HTTP")
    m.add_argument("--port", type=int, default=8607)
    m.add_argument("--host", default="127.0.0.1")
    m.add_argument("--scenes", help="planted-scene directory")
    m.add_argument("--generate-mode", choices=GENERATE_MODES, default="flat")
    m.add_argument("--token")
    m.add_argument("--seed", type=int)
    m.set_defaults(fn=cmd_mock_serve)

    s = sub.add_parser("serve-annotations", help="run the annotation REST service")
    s.add_argument("--config", help="service config JSON")
    s.add_argument("--data", help="data directory")
    s.add_argument("--images", help="image store directory")
    s.add_argument("--ui", help="static UI bundle directory")
    s.add_argument("--port", type=int)
    s.add_argument("--host")
    s.add_argument("--token")
    s.add_argument("--seed", type=int)
    s.set_defaults(fn=cmd_serve_annotations)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except PrivakitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
