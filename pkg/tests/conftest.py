from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from monoslicer.candidates import parse_annotations
from monoslicer.model import parse_area_map
from synthetic import FIXTURES, load

settings.register_profile(
    "monoslicer", deadline=None, suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large]
)
settings.load_profile("monoslicer")


@pytest.fixture
def two_facades():
    return load("two_facades")


@pytest.fixture
def business():
    return load("business_actions")


@pytest.fixture
def business_notes():
    return parse_annotations((FIXTURES / "business_actions_annotations.json").read_bytes())


@pytest.fixture
def bank_map():
    return parse_area_map((FIXTURES / "bank_areas.csv").read_bytes())


@pytest.fixture
def fixtures_dir():
    return FIXTURES

