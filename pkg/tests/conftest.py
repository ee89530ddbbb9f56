import numpy as np
import pytest

from earforge.synthetic import random_ear_shape, render_standard


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def ear_sample():
    """One rendered synthetic ear with its 55 ground-truth landmarks."""
    shape = random_ear_shape(np.random.default_rng(7))
    img, lm = render_standard(shape, size=160, rng=8, rotation=10.0,
                              scale_jitter=0.05, width_factor=0.9)
    return img, lm


def random_landmarks(rng, center=(80.0, 80.0), spread=(30.0, 12.0), angle=0.0):
    """55 random points with controlled anisotropic spread (helper, not a fixture)."""
    pts = rng.normal(size=(55, 2)) * np.asarray(spread)
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    return pts @ rot.T + np.asarray(center)
