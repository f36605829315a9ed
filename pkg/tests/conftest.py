import json
from fractions import Fraction
from pathlib import Path

import pytest

from onespace.densities import CovarianceTriple
from onespace.models import ExperimentPlan, load_model

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "onespace" / "data"


def load_data(name: str):
    return json.loads((DATA_DIR / name).read_text(encoding="utf-8"))


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def frustrated_triple() -> CovarianceTriple:
    return CovarianceTriple(Fraction(1, 2), Fraction(1, 2), Fraction(-1, 2))


@pytest.fixture
def source_model():
    return load_model(load_data("model_source_only.json"))


@pytest.fixture
def time_slot_model():
    return load_model(load_data("model_frustrated_time_slot.json"))


@pytest.fixture
def angle_model():
    return load_model(load_data("model_angle_chsh.json"))


@pytest.fixture
def three_setting_plan() -> ExperimentPlan:
    document = load_data("plan_three_settings.json")
    document["trials"] = 20000
    return ExperimentPlan.model_validate(document)


@pytest.fixture
def chsh_plan() -> ExperimentPlan:
    document = load_data("plan_chsh.json")
    document["trials"] = 20000
    return ExperimentPlan.model_validate(document)
