"""HTTP front for the mock backends: one POST endpoint per model role."""

from __future__ import annotations

from .backends import (
    SCHEMA_VERSION,
    MockBackend,
    decode_edges,
    decode_image,
    decode_mask,
    encode_image,
    encode_mask,
)
from .errors import ProtocolError, ShapeError
from .httpd import HttpError, JsonHttpServer, Response, Router

__all__ = ["build_mock_router", "MockServer"]


def _require(body: dict | None, *keys: str) -> dict:
    if body is None:
        raise HttpError(400, "missing JSON body")
    for key in keys:
        if key not in body:
            raise HttpError(400, f"missing field {key!r}")
    return body


def build_mock_router(backend: MockBackend, token: str | None = None) -> Router:
    router = Router(token=token)

    def _reply(body: dict, **fields) -> Response:
        return Response(payload={"schema": SCHEMA_VERSION, "request_id": body.get("request_id"), **fields})

    def estimate(body=None, query=None):
        body = _require(body, "image")
        subjects = backend.estimate_subjects(decode_image(body["image"]), int(body.get("seed", 0)))
        return _reply(
            body,
            subjects=[{"theta": list(s.theta), "beta": list(s.beta)} for s in subjects],
        )

    def segment(body=None, query=None):
        body = _require(body, "image", "index")
        mask, box = backend.segment_subject(
            decode_image(body["image"]), int(body["index"]), int(body.get("seed", 0))
        )
        return _reply(body, mask=encode_mask(mask), box=list(box.as_tuple()))

    def render(body=None, query=None):
        body = _require(body, "theta", "beta", "width", "height")
        image = backend.render_avatar(
            body["theta"], body["beta"], int(body["width"]), int(body["height"]),
            int(body.get("seed", 0)),
        )
        return _reply(body, image=encode_image(image))

    def generate(body=None, query=None):
        body = _require(body, "image", "edges", "prompt")
        image = backend.generate_crop(
            decode_image(body["image"]),
            decode_edges(body["edges"]),
            body["prompt"],
            body.get("negative_prompt", ""),
            int(body.get("seed", 0)),
        )
        return _reply(body, image=encode_image(image))

    def detect_pii(body=None, query=None):
        body = _require(body, "image", "descriptions")
        regions = backend.detect_pii(decode_image(body["image"]), list(body["descriptions"]))
        return _reply(body, regions=[encode_mask(m) for m in regions])

    def inpaint(body=None, query=None):
        body = _require(body, "image", "mask", "prompt")
        image = backend.inpaint_regions(
            decode_image(body["image"]),
            decode_mask(body["mask"]),
            body["prompt"],
            int(body.get("seed", 0)),
        )
        return _reply(body, image=encode_image(image))

    def healthz(body=None, query=None):
        return Response(payload={"status": "ok", "versions": backend.versions()})

    def wrap(fn):
        def inner(body=None, query=None, **kwargs):
            try:
                return fn(body=body, query=query, **kwargs)
            except (ProtocolError, ShapeError, ValueError) as exc:
                raise HttpError(400, str(exc))

        return inner

    router.add("POST", "/v1/estimate", wrap(estimate))
    router.add("POST", "/v1/segment", wrap(segment))
    router.add("POST", "/v1/render", wrap(render))
    router.add("POST", "/v1/generate", wrap(generate))
    router.add("POST", "/v1/detect-pii", wrap(detect_pii))
    router.add("POST", "/v1/inpaint", wrap(inpaint))
    router.add("GET", "/v1/healthz", healthz)
    return router


class MockServer(JsonHttpServer):
    def __init__(self, backend: MockBackend, host: str = "127.0.0.1", port: int = 0,
                 token: str | None = None):
        super().__init__(build_mock_router(backend, token=token), host=host, port=port)
