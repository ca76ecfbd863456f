import random
from array import array

import pytest
from hypothesis import HealthCheck, settings

from foodweight.imaging import Image

settings.register_profile(
    "ci",
    deadline=None,
    max_examples=50,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


def make_image(width, height, channels, values) -> Image:
    return Image(width, height, channels, array("d", values))


def random_image(rng: random.Random, width, height, channels=1) -> Image:
    n = width * height * channels
    return Image(width, height, channels, array("d", (rng.random() for _ in range(n))))


def quantized_random_image(rng: random.Random, width, height, channels=1) -> Image:
    """Random image whose intensities are exact 8-bit fractions k/255."""
    n = width * height * channels
    return Image(
        width, height, channels, array("d", (rng.randrange(256) / 255.0 for _ in range(n)))
    )


@pytest.fixture
def rng():
    return random.Random(0)
