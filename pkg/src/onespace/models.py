"""Simulator configuration and records.

Hidden-variable models come in three kinds, told apart by ``kind``:

* ``source_only``: λ from a finite alphabet with exact rational weights and a
  deterministic ±1 response table per station and setting;
* ``source_angle``: λ uniform on [0, 2π) and threshold responses
  sign(cos(λ - θ)) with one angle per station and setting;
* ``time_slot``: one pair density per category, each category measured in its
  own disjoint time slot.
"""

import math
from fractions import Fraction
from typing import Annotated, Literal, Optional, Union

from pydantic import ConfigDict, Field, NonNegativeInt, PositiveInt, TypeAdapter, model_validator

from onespace.densities import PairDensity
from onespace.schemas import Document, PairDensityDocument, RationalStr

DEFAULT_C0 = 1.0
UNIT_NORM_TOLERANCE = 1e-12

Response = Literal[1, -1]
# Category labels are "station1:station2", so a setting name must not contain ":".
SettingName = Annotated[str, Field(min_length=1, pattern=r"^[^:]+$")]


class SettingLabel(Document):
    name: SettingName
    direction: Optional[tuple[float, float, float]] = None

    @model_validator(mode="after")
    def _unit_direction(self):
        if self.direction is not None:
            norm = math.sqrt(sum(component * component for component in self.direction))
            if abs(norm - 1) > UNIT_NORM_TOLERANCE:
                raise ValueError(f"Setting {self.name!r} direction has norm {norm}, expected 1")
        return self


class Category(Document):
    station1: SettingName
    station2: SettingName

    @property
    def label(self) -> str:
        return f"{self.station1}:{self.station2}"


class ExperimentPlan(Document):
    settings: list[SettingLabel] = Field(default_factory=list)
    categories: list[Category] = Field(min_length=1)
    trials: PositiveInt
    seed: int = Field(ge=0, lt=2**64)

    @model_validator(mode="after")
    def _consistent_names(self):
        names = [setting.name for setting in self.settings]
        if len(set(names)) != len(names):
            raise ValueError(f"Setting names must be unique, got {names}")
        if names:
            for category in self.categories:
                for name in (category.station1, category.station2):
                    if name not in names:
                        raise ValueError(f"Category {category.label} uses undeclared setting {name!r}")
        labels = [category.label for category in self.categories]
        if len(set(labels)) != len(labels):
            raise ValueError(f"Categories must be distinct, got {labels}")
        return self


class FiniteSourceModel(Document):
    kind: Literal["source_only"]
    weights: list[RationalStr] = Field(min_length=1)
    station1: dict[SettingName, list[Response]]
    station2: dict[SettingName, list[Response]]

    @model_validator(mode="after")
    def _valid_tables(self):
        if any(weight < 0 for weight in self.weights):
            raise ValueError("λ weights must be nonnegative")
        if sum(self.weights, Fraction(0)) != 1:
            raise ValueError(f"λ weights sum to {sum(self.weights, Fraction(0))}, expected 1")
        for station, table in (("station1", self.station1), ("station2", self.station2)):
            for setting, responses in table.items():
                if len(responses) != len(self.weights):
                    raise ValueError(
                        f"{station} response for {setting!r} has {len(responses)} entries, "
                        f"alphabet has {len(self.weights)}"
                    )
        return self


class AngleSourceModel(Document):
    kind: Literal["source_angle"]
    station1: dict[SettingName, float]
    station2: dict[SettingName, float]
    station2_sign: Response = 1


class TimeSlot(Document):
    category: str
    start: float
    end: float


class TimeSlotModel(Document):
    kind: Literal["time_slot"]
    densities: dict[str, PairDensityDocument]
    slots: list[TimeSlot] = Field(min_length=1)
    c0: float = Field(DEFAULT_C0, gt=0)

    @model_validator(mode="after")
    def _disjoint_slots(self):
        for slot in self.slots:
            if slot.end - slot.start < self.c0:
                raise ValueError(f"Slot for {slot.category} is shorter than c0 = {self.c0}")
            if slot.category not in self.densities:
                raise ValueError(f"Slot for {slot.category} has no configured density")
            self.densities[slot.category].to_density()
        categories = [slot.category for slot in self.slots]
        if len(set(categories)) != len(categories):
            raise ValueError(f"Each category gets exactly one slot, got {categories}")
        ordered = sorted(self.slots, key=lambda slot: slot.start)
        for before, after in zip(ordered, ordered[1:]):
            if after.start < before.end:
                raise ValueError(f"Slots for {before.category} and {after.category} overlap")
        return self

    def density(self, label: str) -> PairDensity:
        return self.densities[label].to_density()

    def slot(self, label: str) -> Optional[TimeSlot]:
        return next((slot for slot in self.slots if slot.category == label), None)


HiddenVariableModel = Annotated[
    Union[FiniteSourceModel, AngleSourceModel, TimeSlotModel],
    Field(discriminator="kind"),
]

_MODEL_ADAPTER = TypeAdapter(HiddenVariableModel)


def load_model(document) -> Union[FiniteSourceModel, AngleSourceModel, TimeSlotModel]:
    return _MODEL_ADAPTER.validate_python(document)


class CategoryTally(Document):
    category: str
    station1: str
    station2: str
    n_pp: NonNegativeInt
    n_pm: NonNegativeInt
    n_mp: NonNegativeInt
    n_mm: NonNegativeInt
    total: NonNegativeInt
    slot: Optional[TimeSlot] = None
    first_time: Optional[float] = None
    last_time: Optional[float] = None

    @model_validator(mode="after")
    def _counts_add_up(self):
        if self.n_pp + self.n_pm + self.n_mp + self.n_mm != self.total:
            raise ValueError(f"Counts for {self.category} do not sum to {self.total}")
        return self

    @property
    def counts(self) -> tuple[int, int, int, int]:
        return (self.n_pp, self.n_pm, self.n_mp, self.n_mm)


class EmpiricalRecord(Document):
    model_config = ConfigDict(Document.model_config, protected_namespaces=())

    model_kind: str
    model_hash: str
    seed: int
    trials: int
    categories: list[CategoryTally] = Field(min_length=1)
