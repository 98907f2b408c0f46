from __future__ import annotations

import numpy as np
import pytest

from privakit.backends import MockBackend
from privakit.imaging import ImageBuffer, load_png
from privakit.scenes import SceneRegistry, make_demo_corpus


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    directory = tmp_path_factory.mktemp("corpus")
    make_demo_corpus(directory, count=20, seed=20240)
    return directory


@pytest.fixture(scope="session")
def scene_registry(corpus_dir):
    return SceneRegistry.from_directory(corpus_dir)


@pytest.fixture(scope="session")
def corpus_images(corpus_dir):
    return {p.stem: load_png(p) for p in sorted(corpus_dir.glob("*.png"))}


@pytest.fixture
def mock_backend(scene_registry):
    return MockBackend(scene_registry, generate_mode="flat")


@pytest.fixture
def rng():
    return np.random.default_rng(991)


def random_image(rng, width, height, channels=3) -> ImageBuffer:
    return ImageBuffer(rng.integers(0, 256, size=(height, width, channels), dtype=np.uint8))
