"""Shared fixtures: the synthetic demo scene in memory and on disk."""
import pytest

from foodfuse.core import load_categories
from foodfuse.demo import build_demo_scene, write_demo_scene
from foodfuse.mask_io import SceneBundle


@pytest.fixture(scope="session")
def demo_scene():
    return build_demo_scene()


@pytest.fixture(scope="session")
def demo_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("demo_corpus")
    write_demo_scene(root, scene_id="demo")
    return root


@pytest.fixture(scope="session")
def demo_categories(demo_root):
    return load_categories(demo_root / "categories.tsv")


@pytest.fixture(scope="session")
def demo_bundle(demo_root, demo_categories) -> SceneBundle:
    from foodfuse.mask_io import load_scene

    return load_scene(
        semantic_path=demo_root / "demo" / "semantic.png",
        mask_dir=demo_root / "demo" / "sam",
        categories=demo_categories,
        detections_path=demo_root / "demo" / "detections.json",
        image_path=demo_root / "demo" / "image.png",
    )
