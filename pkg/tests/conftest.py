import numpy as np
import pytest
from PIL import Image

from stillmotion.synthetic import make_textured_image, write_texture_corpus


def _natural_photos():
    """Bundled photographs from scikit-image, if available."""
    try:
        from skimage import data
    except ImportError:
        return []
    photos = []
    for name in (
        "astronaut",
        "coffee",
        "chelsea",
        "rocket",
        "hubble_deep_field",
        "immunohistochemistry",
        "retina",
        "cat",
        "stereo_motorcycle",
    ):
        try:
            img = getattr(data, name)()
        except Exception:
            continue
        if isinstance(img, tuple):
            img = img[0]
        if img.ndim == 3 and img.shape[2] == 3:
            photos.append(np.asarray(img, dtype=np.uint8))
    return photos


def build_photo_corpus(out_dir, count):
    """`count` textured photographic sources (distinct crops of bundled
    photos); falls back to procedural textures when none are bundled."""
    out_dir.mkdir(parents=True, exist_ok=True)
    photos = _natural_photos()
    if not photos:
        return write_texture_corpus(out_dir, count=count, seed=99)
    rng = np.random.default_rng(20240917)
    paths = []
    for i in range(count):
        img = photos[i % len(photos)]
        h, w = img.shape[:2]
        side = max(min(min(h, w), 320), int(min(h, w) * 0.75))
        y = int(rng.integers(0, h - side + 1))
        x = int(rng.integers(0, w - side + 1))
        path = out_dir / f"photo_{i:04d}.png"
        Image.fromarray(img[y : y + side, x : x + side]).save(path)
        paths.append(path)
    return paths


@pytest.fixture(scope="session")
def texture_dir(tmp_path_factory):
    """16 procedural textured sources for cheap generation tests."""
    root = tmp_path_factory.mktemp("textures")
    write_texture_corpus(root, count=16, seed=7)
    return root


@pytest.fixture(scope="session")
def small_texture_dir(tmp_path_factory):
    """4 sources, for fast CLI and IO tests."""
    root = tmp_path_factory.mktemp("textures_small")
    write_texture_corpus(root, count=4, seed=13)
    return root


@pytest.fixture(scope="session")
def photo_dir(tmp_path_factory):
    """56 textured photographic sources for oracle agreement runs."""
    root = tmp_path_factory.mktemp("photos")
    build_photo_corpus(root, count=56)
    return root


@pytest.fixture()
def textured_image():
    return make_textured_image(4242)
