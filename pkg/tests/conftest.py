import numpy as np
import pytest

from ghostkit import codec, forge, synth


@pytest.fixture(scope="session")
def small_images():
    """Quick textured rasters for unit tests that need natural-ish content."""
    return synth.corpus(6, width=192, height=144, seed=9000)


@pytest.fixture(scope="session")
def natural_image():
    return synth.textured_image(256, 192, seed=42)


def make_composite(image, cover_q, ghost_q, rect=(64, 40, 48, 48), resave_q=100):
    """Ghost-insert helper returning (decoded composite, truth mask)."""
    spec = forge.ForgerySpec(
        kind="ghost_insert", cover_q=cover_q, ghost_q=ghost_q,
        region=rect, resave_q=resave_q,
    )
    data, truth = forge.ghost_insert(image, spec)
    return codec.decode(data), truth


@pytest.fixture(scope="session")
def small_composite(natural_image):
    """cover 60 / ghost 80 composite on a 256x192 image."""
    comp, truth = make_composite(natural_image, 60, 80)
    return comp, truth
