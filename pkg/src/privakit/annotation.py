"""Annotation campaign service: assignment, score ingestion, progress, export.

State is an append-only NDJSON score log plus immutable per-campaign JSON
documents; restart replays the log, so an acknowledged submit survives any
crash. Campaign ids derive from the campaign content, which makes creation
idempotent and assignment tables reproducible.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from .campaigns import CampaignSpec, build_campaign
from .errors import ConflictError, NotFoundError, ValidationError
from .httpd import HttpError, JsonHttpServer, Response, Router
from .records import AnnotationRecord

__all__ = [
    "DEFAULT_POOL",
    "AnnotationStore",
    "ServiceConfig",
    "build_annotation_router",
    "AnnotationServer",
    "assign_annotators",
]

DEFAULT_POOL = tuple(f"ann-{i}" for i in range(1, 9))


def assign_annotators(task_ids, pool, per_task: int, seed: int) -> dict[str, tuple[str, ...]]:
    """Seeded draw of per_task distinct annotators for every task."""
    pool = sorted(pool)
    if len(set(pool)) != len(pool):
        raise ValidationError("annotator ids must be unique")
    if per_task > len(pool):
        raise ValidationError(
            f"need {per_task} annotators per task but the pool has {len(pool)}"
        )
    table = {}
    for task_id in task_ids:
        rng = random.Random(f"{seed}:{task_id}")
        table[task_id] = tuple(rng.sample(pool, per_task))
    return table


@dataclass
class _Campaign:
    campaign_id: str
    spec: CampaignSpec
    pool: tuple[str, ...]
    assignments: dict[str, tuple[str, ...]]
    show_prompt: bool = False
    randomize_order: bool = False

    def task_map(self):
        return {t.task_id: t for t in self.spec.tasks}


class AnnotationStore:
    """Campaign documents + replayable score log under one data directory."""

    def __init__(self, data_dir):
        self.data_dir = Path(data_dir)
        self.campaign_dir = self.data_dir / "campaigns"
        self.campaign_dir.mkdir(parents=True, exist_ok=True)
        self.log_path = self.data_dir / "records.ndjson"
        self.snapshot_path = self.data_dir / "snapshot.json"
        self._lock = threading.Lock()
        self._campaigns: dict[str, _Campaign] = {}
        # (campaign_id, task_id, annotator_id) -> record; insertion order preserved
        self._scores: dict[tuple[str, str, str], AnnotationRecord] = {}
        self._order: list[tuple[str, AnnotationRecord]] = []
        self._replay()

    # -- persistence ------------------------------------------------------

    def _replay(self) -> None:
        for path in sorted(self.campaign_dir.glob("*.json")):
            doc = json.loads(path.read_text(encoding="utf-8"))
            campaign = _Campaign(
                campaign_id=doc["campaign_id"],
                spec=CampaignSpec.from_manifest(doc["manifest"]),
                pool=tuple(doc["pool"]),
                assignments={k: tuple(v) for k, v in doc["assignments"].items()},
                show_prompt=doc.get("show_prompt", False),
                randomize_order=doc.get("randomize_order", False),
            )
            self._campaigns[campaign.campaign_id] = campaign
        if self.log_path.exists():
            with self.log_path.open("r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    data = json.loads(line)
                    record = AnnotationRecord.from_json(line)
                    key = (data["campaign_id"], record.task_id, record.annotator_id)
                    if key not in self._scores:
                        self._scores[key] = record
                        self._order.append((data["campaign_id"], record))

    def _append_record(self, campaign_id: str, record: AnnotationRecord) -> None:
        data = json.loads(record.to_json())
        data["campaign_id"] = campaign_id
        line = json.dumps(data, sort_keys=True)
        with self.log_path.open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def save_snapshot(self) -> None:
        doc = {
            "record_count": len(self._order),
            "campaigns": {
                cid: {"tasks": c.spec.task_count} for cid, c in self._campaigns.items()
            },
            "written_at": time.time(),
        }
        self.snapshot_path.write_text(json.dumps(doc, indent=2), encoding="utf-8")

    # -- operations -------------------------------------------------------

    def create_campaign(
        self,
        spec: CampaignSpec,
        pool=DEFAULT_POOL,
        show_prompt: bool = False,
        randomize_order: bool = False,
        image_ids=None,
    ) -> str:
        if image_ids is not None:
            missing = [s for s in spec.source_ids if s not in image_ids]
            if missing:
                raise ValidationError(f"source images not in store: {sorted(missing)}")
        manifest = spec.to_manifest()
        digest = hashlib.sha256(
            json.dumps(
                {"manifest": manifest, "pool": sorted(pool)}, sort_keys=True
            ).encode("utf-8")
        ).hexdigest()
        campaign_id = f"{spec.kind}-{digest[:10]}"
        with self._lock:
            if campaign_id in self._campaigns:
                return campaign_id
            assignments = assign_annotators(
                [t.task_id for t in spec.tasks], pool, spec.annotators_per_image, spec.seed
            )
            campaign = _Campaign(
                campaign_id=campaign_id,
                spec=spec,
                pool=tuple(sorted(pool)),
                assignments=assignments,
                show_prompt=show_prompt,
                randomize_order=randomize_order,
            )
            doc = {
                "campaign_id": campaign_id,
                "manifest": manifest,
                "pool": list(campaign.pool),
                "assignments": {k: list(v) for k, v in assignments.items()},
                "show_prompt": show_prompt,
                "randomize_order": randomize_order,
            }
            path = self.campaign_dir / f"{campaign_id}.json"
            tmp = path.with_suffix(".json.tmp")
            tmp.write_text(json.dumps(doc), encoding="utf-8")
            os.replace(tmp, path)
            self._campaigns[campaign_id] = campaign
        return campaign_id

    def _campaign(self, campaign_id: str) -> _Campaign:
        campaign = self._campaigns.get(campaign_id)
        if campaign is None:
            raise NotFoundError(f"unknown campaign {campaign_id!r}")
        return campaign

    def next_task(self, annotator_id: str, campaign_id: str) -> dict | None:
        campaign = self._campaign(campaign_id)
        assigned = [
            t for t in campaign.spec.tasks
            if annotator_id in campaign.assignments[t.task_id]
        ]
        if not assigned:
            raise NotFoundError(f"annotator {annotator_id!r} not assigned to {campaign_id!r}")
        if campaign.randomize_order:
            rng = random.Random(f"{campaign.spec.seed}:{annotator_id}")
            rng.shuffle(assigned)
        else:
            assigned.sort(key=lambda t: t.task_id)
        total = len(assigned)
        scored = 0
        pending = None
        for task in assigned:
            if (campaign_id, task.task_id, annotator_id) in self._scores:
                scored += 1
            elif pending is None:
                pending = task
        if pending is None:
            return None
        view = {
            "task_id": pending.task_id,
            "campaign_id": campaign_id,
            "campaign_kind": campaign.spec.kind,
            "image_refs": list(pending.image_refs),
            "category": pending.category,
            "attribute": pending.attribute,
            "level": pending.level,
            "position": scored + 1,
            "total": total,
        }
        if campaign.show_prompt:
            view["prompt"] = pending.positive
        if pending.pair:
            view["pair"] = list(pending.pair)
            view["transition_label"] = pending.transition_label
            view["pair_position"] = pending.pair_position
        return view

    def submit_score(self, annotator_id: str, task_id: str, score: int,
                     campaign_id: str | None = None) -> dict:
        if campaign_id is None:
            owners = [
                cid for cid, c in self._campaigns.items() if task_id in c.assignments
            ]
            if not owners:
                raise NotFoundError(f"unknown task {task_id!r}")
            if len(owners) > 1:
                raise ValidationError(
                    f"task {task_id!r} exists in several campaigns; pass campaign_id"
                )
            campaign_id = owners[0]
        campaign = self._campaign(campaign_id)
        task = campaign.task_map().get(task_id)
        if task is None:
            raise NotFoundError(f"unknown task {task_id!r} in campaign {campaign_id!r}")
        if annotator_id not in campaign.assignments[task_id]:
            raise ValidationError(
                f"annotator {annotator_id!r} is not assigned to task {task_id!r}"
            )
        if not isinstance(score, int) or score not in (1, 2, 3, 4, 5):
            raise ValidationError(f"score must be an integer in 1..5, got {score!r}")
        record = AnnotationRecord(
            task_id=task_id,
            annotator_id=annotator_id,
            score=score,
            timestamp=time.time(),
            pair_position=task.pair_position,
            attribute=task.attribute,
            category=task.category,
            level=task.level,
        )
        with self._lock:
            key = (campaign_id, task_id, annotator_id)
            existing = self._scores.get(key)
            if existing is not None:
                if existing.score == score:
                    return {"stored": True, "duplicate": True}
                raise ConflictError(
                    f"{annotator_id!r} already scored {task_id!r} with {existing.score}"
                )
            self._append_record(campaign_id, record)
            self._scores[key] = record
            self._order.append((campaign_id, record))
        return {"stored": True, "duplicate": False}

    def progress(self, campaign_id: str) -> dict:
        campaign = self._campaign(campaign_id)
        per_annotator = {a: 0 for a in campaign.pool}
        complete = 0
        for task in campaign.spec.tasks:
            assignees = campaign.assignments[task.task_id]
            done = 0
            for annotator in assignees:
                if (campaign_id, task.task_id, annotator) in self._scores:
                    done += 1
                    per_annotator[annotator] = per_annotator.get(annotator, 0) + 1
            if done == len(assignees):
                complete += 1
        return {
            "campaign_id": campaign_id,
            "tasks_total": campaign.spec.task_count,
            "complete": complete,
            "records": sum(per_annotator.values()),
            "per_annotator": per_annotator,
        }

    def export(self, campaign_id: str) -> list[str]:
        self._campaign(campaign_id)
        lines = []
        for cid, record in self._order:
            if cid == campaign_id:
                data = json.loads(record.to_json())
                data["campaign_id"] = campaign_id
                lines.append(json.dumps(data, sort_keys=True))
        return lines

    def campaign_summary(self, campaign_id: str) -> dict:
        campaign = self._campaign(campaign_id)
        return {
            "campaign_id": campaign_id,
            "kind": campaign.spec.kind,
            "task_count": campaign.spec.task_count,
            "prompt_count": campaign.spec.prompt_count,
            "annotations_required": campaign.spec.annotations_required,
            "pool": list(campaign.pool),
        }


@dataclass
class ServiceConfig:
    data_dir: str = "annotation-data"
    images_dir: str | None = None
    ui_dir: str | None = None
    host: str = "127.0.0.1"
    port: int = 8606
    token: str | None = None
    show_prompt: bool = False

    ENV_PREFIX = "PRIVAKIT_"

    @classmethod
    def load(cls, path=None, env=None) -> "ServiceConfig":
        """File values, overridden by PRIVAKIT_* environment variables."""
        env = os.environ if env is None else env
        data: dict = {}
        if path:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        cfg = cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})
        for field_name in ("data_dir", "images_dir", "ui_dir", "host", "token"):
            value = env.get(cls.ENV_PREFIX + field_name.upper())
            if value is not None:
                setattr(cfg, field_name, value)
        port = env.get(cls.ENV_PREFIX + "PORT")
        if port is not None:
            cfg.port = int(port)
        return cfg


_MIME = {".html": "text/html", ".js": "text/javascript", ".css": "text/css",
         ".png": "image/png", ".json": "application/json", ".map": "application/json",
         ".svg": "image/svg+xml"}


def _serve_file(root: Path, relative: str) -> Response:
    target = (root / relative).resolve()
    if not str(target).startswith(str(root.resolve())) or not target.is_file():
        raise HttpError(404, f"no such file: {relative}")
    return Response(
        body=target.read_bytes(),
        content_type=_MIME.get(target.suffix, "application/octet-stream"),
    )


def build_annotation_router(store: AnnotationStore, config: ServiceConfig) -> Router:
    router = Router(token=config.token)
    images_dir = Path(config.images_dir) if config.images_dir else None
    ui_dir = Path(config.ui_dir) if config.ui_dir else None

    def guard(fn):
        def inner(body=None, query=None, **kwargs):
            try:
                return fn(body=body, query=query, **kwargs)
            except NotFoundError as exc:
                raise HttpError(404, str(exc))
            except ConflictError as exc:
                raise HttpError(409, str(exc))
            except ValidationError as exc:
                raise HttpError(403 if "not assigned" in str(exc) else 400, str(exc))
            except (ValueError, KeyError, TypeError) as exc:
                raise HttpError(400, f"{type(exc).__name__}: {exc}")

        return inner

    def create_campaign(body=None, query=None):
        if body is None:
            raise HttpError(400, "missing JSON body")
        spec = build_campaign(
            kind=body["kind"],
            sources=list(body["sources"]),
            seed=int(body.get("seed", 0)),
            annotators_per_image=int(body.get("annotators_per_image", 3)),
            combos=int(body.get("combos", 396)),
            sources_per_combo=int(body.get("sources_per_combo", 3)),
        )
        image_ids = None
        if images_dir is not None:
            image_ids = {p.stem for p in images_dir.glob("*.png")}
        campaign_id = store.create_campaign(
            spec,
            pool=tuple(body.get("pool", DEFAULT_POOL)),
            show_prompt=bool(body.get("show_prompt", config.show_prompt)),
            randomize_order=bool(body.get("randomize_order", False)),
            image_ids=image_ids,
        )
        return Response(payload=store.campaign_summary(campaign_id))

    def progress(body=None, query=None, cid=None):
        return Response(payload=store.progress(cid))

    def next_task(body=None, query=None, aid=None):
        campaign_id = (query or {}).get("campaign")
        if not campaign_id:
            raise HttpError(400, "missing ?campaign= parameter")
        return Response(payload={"task": store.next_task(aid, campaign_id)})

    def submit(body=None, query=None):
        if body is None:
            raise HttpError(400, "missing JSON body")
        score = body.get("score")
        if not isinstance(score, int) or isinstance(score, bool):
            raise HttpError(400, f"score must be an integer, got {score!r}")
        ack = store.submit_score(
            annotator_id=body["annotator_id"],
            task_id=body["task_id"],
            score=score,
            campaign_id=body.get("campaign_id"),
        )
        return Response(payload=ack)

    def export(body=None, query=None, cid=None):
        lines = store.export(cid)
        text = "".join(line + "\n" for line in lines)
        return Response(body=text.encode("utf-8"), content_type="application/x-ndjson")

    def image(body=None, query=None, image_id=None):
        if images_dir is None:
            raise HttpError(404, "no image store configured")
        name = image_id if image_id.endswith(".png") else f"{image_id}.png"
        return _serve_file(images_dir, name)

    def ui_config(body=None, query=None):
        return Response(payload={
            "api_base": "",
            "show_prompt": config.show_prompt,
            "score_labels": {
                "1": "1 — no alignment",
                "2": "2 — weak alignment",
                "3": "3 — partial alignment",
                "4": "4 — good alignment",
                "5": "5 — perfect alignment",
            },
        })

    def healthz(body=None, query=None):
        return Response(payload={"status": "ok", "campaigns": len(store._campaigns)})

    def ui_index(body=None, query=None):
        if ui_dir is None:
            raise HttpError(404, "no UI bundle configured")
        return _serve_file(ui_dir, "index.html")

    def ui_asset(body=None, query=None, asset=None):
        if ui_dir is None:
            raise HttpError(404, "no UI bundle configured")
        return _serve_file(ui_dir, asset)

    router.add("POST", "/campaigns", guard(create_campaign))
    router.add("GET", "/campaigns/{cid}/progress", guard(progress))
    router.add("GET", "/campaigns/{cid}/export", guard(export))
    router.add("GET", "/annotators/{aid}/next", guard(next_task))
    router.add("POST", "/scores", guard(submit))
    router.add("GET", "/images/{image_id}", guard(image))
    router.add("GET", "/ui-config", ui_config)
    router.add("GET", "/healthz", healthz)
    router.add("GET", "/", ui_index)
    router.add("GET", "/ui/{asset}", ui_asset)
    return router


class AnnotationServer(JsonHttpServer):
    def __init__(self, store: AnnotationStore, config: ServiceConfig):
        super().__init__(
            build_annotation_router(store, config), host=config.host, port=config.port
        )
        self.store = store

    def stop(self) -> None:
        self.store.save_snapshot()
        super().stop()
