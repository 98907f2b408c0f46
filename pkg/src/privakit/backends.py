"""Model-backend wire contract, deterministic mocks, and the HTTP client.

Six roles sit behind the boundary: subject parameter estimation, person
segmentation, avatar rendering, edge-conditioned generation, text-driven
PII detection, and inpainting. Payloads are JSON with base64-PNG images so
real GPU workers can live in any language; the mocks answer from planted
scene sidecars and are pure functions of (payload, seed).
"""

from __future__ import annotations

import base64
import hashlib
import io
import itertools
import time
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from PIL import Image

from .errors import ProtocolError, ShapeError, TransportError
from .imaging import BBox, EdgeMap, ImageBuffer, SoftMask
from .pose import POSE_LEN, SHAPE_LEN, check_params, root_yaw_deg
from .scenes import Scene, SceneRegistry

__all__ = [
    "ROLES",
    "ROLE_PATHS",
    "SubjectParams",
    "Backend",
    "MockBackend",
    "HttpBackend",
    "encode_image",
    "decode_image",
    "encode_mask",
    "decode_mask",
    "encode_edges",
    "decode_edges",
]

SCHEMA_VERSION = "v1"

ROLES = ("estimate", "segment", "render", "generate", "detect_pii", "inpaint")

ROLE_PATHS = {
    "estimate": "/v1/estimate",
    "segment": "/v1/segment",
    "render": "/v1/render",
    "generate": "/v1/generate",
    "detect_pii": "/v1/detect-pii",
    "inpaint": "/v1/inpaint",
}

GENERATE_MODES = ("echo", "flat", "edge-paint")


def _png_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def encode_image(image: ImageBuffer) -> str:
    arr = image.data[:, :, 0] if image.channels == 1 else image.data
    return base64.b64encode(_png_bytes(arr)).decode("ascii")


def decode_image(payload: str) -> ImageBuffer:
    try:
        img = Image.open(io.BytesIO(base64.b64decode(payload)))
        img.load()
    except Exception as exc:
        raise ProtocolError(f"undecodable image payload: {exc}") from exc
    if img.mode == "L":
        return ImageBuffer(np.asarray(img, dtype=np.uint8)[:, :, None].copy())
    return ImageBuffer(np.asarray(img.convert("RGB"), dtype=np.uint8).copy())


def encode_mask(mask: SoftMask) -> str:
    quant = np.clip(np.floor(mask.weights * 255.0 + 0.5), 0, 255).astype(np.uint8)
    return base64.b64encode(_png_bytes(quant)).decode("ascii")


def decode_mask(payload: str) -> SoftMask:
    try:
        img = Image.open(io.BytesIO(base64.b64decode(payload))).convert("L")
    except Exception as exc:
        raise ProtocolError(f"undecodable mask payload: {exc}") from exc
    return SoftMask(np.asarray(img, dtype=np.uint8).astype(np.float64) / 255.0)


def encode_edges(edges: EdgeMap) -> str:
    return base64.b64encode(_png_bytes(np.where(edges.edges, 255, 0).astype(np.uint8))).decode(
        "ascii"
    )


def decode_edges(payload: str) -> EdgeMap:
    try:
        img = Image.open(io.BytesIO(base64.b64decode(payload))).convert("L")
    except Exception as exc:
        raise ProtocolError(f"undecodable edge payload: {exc}") from exc
    return EdgeMap(np.asarray(img, dtype=np.uint8) >= 128)


@dataclass(frozen=True)
class SubjectParams:
    theta: tuple[float, ...]
    beta: tuple[float, ...]

    def __post_init__(self):
        check_params(self.theta, self.beta)


class Backend(Protocol):
    """The callable surface the pipeline needs from any backend."""

    def estimate_subjects(self, image: ImageBuffer, seed: int) -> list[SubjectParams]: ...

    def segment_subject(self, image: ImageBuffer, index: int, seed: int) -> tuple[SoftMask, BBox]: ...

    def render_avatar(self, theta, beta, width: int, height: int, seed: int) -> ImageBuffer: ...

    def generate_crop(
        self, crop: ImageBuffer, edges: EdgeMap, prompt: str, negative: str, seed: int
    ) -> ImageBuffer: ...

    def detect_pii(self, image: ImageBuffer, descriptions: list[str]) -> list[SoftMask]: ...

    def inpaint_regions(
        self, image: ImageBuffer, region: SoftMask, prompt: str, seed: int
    ) -> ImageBuffer: ...

    def versions(self) -> dict[str, str]: ...


def _yaw_to_axis_angle(yaw_deg: float) -> tuple[float, float, float]:
    return (0.0, float(np.radians(yaw_deg)), 0.0)


def _silhouette(width: int, height: int, yaw_deg: float, shade: int) -> np.ndarray:
    """Flat-shaded humanoid, mirror-symmetric at zero yaw.

    Turning narrows the body by |cos yaw| and slides the nose marker by
    sin yaw, so profile views are horizontally asymmetric.
    """
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    cx = (width - 1) / 2.0
    yaw = np.radians(yaw_deg)
    squeeze = 0.35 + 0.65 * abs(np.cos(yaw))
    dx = np.abs(xs - cx)

    head_cy, head_r = height * 0.16, min(width, height) * 0.14
    head = (dx / (head_r * squeeze + 1e-9)) ** 2 + ((ys - head_cy) / head_r) ** 2 <= 1.0

    torso_w = width * 0.22 * squeeze
    torso = (dx <= torso_w) & (ys >= height * 0.26) & (ys <= height * 0.62)

    arm_in, arm_out = width * 0.24 * squeeze, width * 0.34 * squeeze
    arms = (dx >= arm_in) & (dx <= arm_out) & (ys >= height * 0.28) & (ys <= height * 0.55)

    leg_in, leg_out = width * 0.04 * squeeze, width * 0.18 * squeeze
    legs = (dx >= leg_in) & (dx <= leg_out) & (ys >= height * 0.62) & (ys <= height * 0.95)

    body = head | torso | arms | legs
    canvas = np.zeros((height, width, 3), dtype=np.uint8)
    canvas[body] = shade

    nose_x = cx + np.sin(yaw) * head_r * 0.9
    nose = ((xs - nose_x) ** 2 + (ys - head_cy) ** 2) <= max(1.0, head_r * 0.25) ** 2
    canvas[nose & (np.cos(yaw) > -0.05)] = min(255, shade + 60)
    return canvas


class MockBackend:
    """Scene-driven stand-in for all six model roles."""

    def __init__(self, registry: SceneRegistry | None = None, generate_mode: str = "flat"):
        if generate_mode not in GENERATE_MODES:
            raise ProtocolError(f"unknown generate mode {generate_mode!r}")
        self.registry = registry or SceneRegistry()
        self.generate_mode = generate_mode

    def _scene(self, image: ImageBuffer) -> Scene:
        scene = self.registry.lookup(image)
        return scene if scene is not None else Scene(image_id="unknown")

    def estimate_subjects(self, image: ImageBuffer, seed: int) -> list[SubjectParams]:
        params = []
        for subject in self._scene(image).subjects:
            theta = [0.0] * POSE_LEN
            theta[0:3] = _yaw_to_axis_angle(subject.yaw_deg)
            beta = list(subject.beta)[:SHAPE_LEN]
            beta += [0.0] * (SHAPE_LEN - len(beta))
            params.append(SubjectParams(theta=tuple(theta), beta=tuple(beta)))
        return params

    def segment_subject(self, image: ImageBuffer, index: int, seed: int) -> tuple[SoftMask, BBox]:
        scene = self._scene(image)
        if not 0 <= index < len(scene.subjects):
            raise ProtocolError(f"subject index {index} out of range ({len(scene.subjects)})")
        box = scene.subjects[index].box
        return SoftMask.from_box(image.width, image.height, box), box

    def render_avatar(self, theta, beta, width: int, height: int, seed: int) -> ImageBuffer:
        t, b = check_params(theta, beta)
        if width < 1 or height < 1:
            raise ShapeError(f"avatar canvas must be positive, got {width}x{height}")
        digest = hashlib.sha256(np.round(b, 6).tobytes()).digest()
        shade = 120 + digest[0] % 80
        return ImageBuffer(_silhouette(width, height, root_yaw_deg(t), shade))

    def generate_crop(
        self, crop: ImageBuffer, edges: EdgeMap, prompt: str, negative: str, seed: int
    ) -> ImageBuffer:
        if (edges.height, edges.width) != (crop.height, crop.width):
            raise ProtocolError(
                f"edge map {edges.width}x{edges.height} vs crop {crop.width}x{crop.height}"
            )
        if self.generate_mode == "echo":
            return crop.copy()
        if self.generate_mode == "flat":
            digest = hashlib.sha256(f"{prompt}|{seed}".encode()).digest()
            color = tuple(int(c) for c in digest[:3])
            out = np.empty_like(crop.data)
            out[...] = color[: crop.channels]
            return ImageBuffer(out)
        out = crop.data.copy()
        out[edges.edges] = 255 - out[edges.edges]
        return ImageBuffer(out)

    def detect_pii(self, image: ImageBuffer, descriptions: list[str]) -> list[SoftMask]:
        scene = self._scene(image)
        wanted = set(descriptions)
        return [
            SoftMask.from_box(image.width, image.height, region.box)
            for region in scene.pii_regions
            if region.label in wanted
        ]

    def inpaint_regions(
        self, image: ImageBuffer, region: SoftMask, prompt: str, seed: int
    ) -> ImageBuffer:
        from scipy import ndimage

        if (region.height, region.width) != (image.height, image.width):
            raise ShapeError("region mask does not match image dimensions")
        support = region.weights > 0.5
        if not support.any():
            return image.copy()
        out = image.data.copy()
        labels, n = ndimage.label(support, structure=np.ones((3, 3), dtype=bool))
        for comp in range(1, n + 1):
            inside = labels == comp
            ring = ndimage.binary_dilation(inside, np.ones((3, 3), dtype=bool), iterations=4)
            ring &= ~support
            source = ring if ring.any() else ~support
            if not source.any():
                source = np.ones_like(support)
            fill = [
                int(np.floor(image.data[:, :, c][source].mean() + 0.5))
                for c in range(image.channels)
            ]
            for c in range(image.channels):
                out[:, :, c][inside] = fill[c]
        return ImageBuffer(out)

    def versions(self) -> dict[str, str]:
        return {"backend": "mock", "generate_mode": self.generate_mode, "schema": SCHEMA_VERSION}


class HttpBackend:
    """Client for remote backend workers speaking the JSON/base64-PNG protocol."""

    def __init__(
        self,
        base_url: str,
        token: str | None = None,
        generate_timeout: float = 120.0,
        timeout: float = 30.0,
        retries: int = 3,
        backoff: float = 0.5,
    ):
        import requests

        self.base_url = base_url.rstrip("/")
        self.token = token
        self.generate_timeout = generate_timeout
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self._session = requests.Session()
        self._request_ids = itertools.count(1)

    def _post(self, role: str, payload: dict) -> dict:
        import requests

        url = self.base_url + ROLE_PATHS[role]
        request_id = f"req-{next(self._request_ids)}"
        body = {"schema": SCHEMA_VERSION, "request_id": request_id, **payload}
        headers = {"content-type": "application/json"}
        if self.token:
            headers["authorization"] = f"Bearer {self.token}"
        timeout = self.generate_timeout if role == "generate" else self.timeout
        last_error = None
        for attempt in range(self.retries + 1):
            try:
                resp = self._session.post(url, json=body, headers=headers, timeout=timeout)
            except requests.RequestException as exc:
                last_error = exc
            else:
                if resp.status_code >= 500:
                    last_error = RuntimeError(f"server error {resp.status_code}")
                elif resp.status_code >= 400:
                    raise ProtocolError(f"[{role}] {resp.status_code}: {resp.text[:200]}")
                else:
                    data = resp.json()
                    if data.get("request_id") != request_id:
                        raise ProtocolError(f"[{role}] response id mismatch")
                    return data
            if attempt < self.retries:
                time.sleep(self.backoff * (2**attempt))
        raise TransportError(str(last_error), stage=role)

    def estimate_subjects(self, image: ImageBuffer, seed: int) -> list[SubjectParams]:
        data = self._post("estimate", {"image": encode_image(image), "seed": seed})
        try:
            return [
                SubjectParams(theta=tuple(s["theta"]), beta=tuple(s["beta"]))
                for s in data["subjects"]
            ]
        except (KeyError, TypeError, ShapeError) as exc:
            raise ProtocolError(f"[estimate] malformed response: {exc}") from exc

    def segment_subject(self, image: ImageBuffer, index: int, seed: int) -> tuple[SoftMask, BBox]:
        data = self._post("segment", {"image": encode_image(image), "index": index, "seed": seed})
        try:
            return decode_mask(data["mask"]), BBox(*data["box"])
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"[segment] malformed response: {exc}") from exc

    def render_avatar(self, theta, beta, width: int, height: int, seed: int) -> ImageBuffer:
        t, b = check_params(theta, beta)
        data = self._post(
            "render",
            {"theta": list(t), "beta": list(b), "width": width, "height": height, "seed": seed},
        )
        image = decode_image(data["image"])
        if (image.width, image.height) != (width, height):
            raise ProtocolError(f"[render] wrong dimensions {image.width}x{image.height}")
        return image

    def generate_crop(
        self, crop: ImageBuffer, edges: EdgeMap, prompt: str, negative: str, seed: int
    ) -> ImageBuffer:
        data = self._post(
            "generate",
            {
                "image": encode_image(crop),
                "edges": encode_edges(edges),
                "prompt": prompt,
                "negative_prompt": negative,
                "seed": seed,
            },
        )
        image = decode_image(data["image"])
        if (image.width, image.height) != (crop.width, crop.height):
            raise ProtocolError(f"[generate] wrong dimensions {image.width}x{image.height}")
        return image

    def detect_pii(self, image: ImageBuffer, descriptions: list[str]) -> list[SoftMask]:
        data = self._post(
            "detect_pii", {"image": encode_image(image), "descriptions": list(descriptions)}
        )
        try:
            return [decode_mask(m) for m in data["regions"]]
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"[detect_pii] malformed response: {exc}") from exc

    def inpaint_regions(
        self, image: ImageBuffer, region: SoftMask, prompt: str, seed: int
    ) -> ImageBuffer:
        data = self._post(
            "inpaint",
            {
                "image": encode_image(image),
                "mask": encode_mask(region),
                "prompt": prompt,
                "seed": seed,
            },
        )
        out = decode_image(data["image"])
        if (out.width, out.height) != (image.width, image.height):
            raise ProtocolError(f"[inpaint] wrong dimensions {out.width}x{out.height}")
        return out

    def versions(self) -> dict[str, str]:
        import requests

        try:
            resp = self._session.get(self.base_url + "/v1/healthz", timeout=self.timeout)
            resp.raise_for_status()
            return resp.json().get("versions", {})
        except requests.RequestException as exc:
            raise TransportError(str(exc), stage="healthz")
