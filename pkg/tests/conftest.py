"""Shared fixtures and the hypothesis profile used by the whole suite."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "artifact",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("artifact")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
