"""Experiment spec files (YAML), validated with pydantic.

A spec describes either an iid study (one or more ``generators``) or a GARCH
study (one or more ``garch_params`` sets). Validation errors name the field
path, e.g. ``garch_params.2.beta``.
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .garch import GarchParams
from .montecarlo import Generator, McConfig


class SpecError(ValueError):
    """Unreadable or invalid experiment spec."""


class GeneratorSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["normal", "student"] = "normal"
    nu: float | None = Field(default=None, gt=2)
    mu: float = 0.0
    sigma: float = Field(default=1.0, gt=0)
    label: str | None = None

    @model_validator(mode="after")
    def _student_needs_nu(self):
        if self.kind == "student" and self.nu is None:
            raise ValueError("student generator needs nu")
        return self

    def build(self) -> Generator:
        return Generator(self.kind, self.mu, self.sigma, self.nu, label=self.label)


class GarchSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    label: str
    omega: float = Field(gt=0)
    alpha: float = Field(ge=0, lt=1)
    beta: float = Field(ge=0, lt=1)
    nu: float | None = Field(default=None, gt=2)
    path_length: int | None = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _stationary(self):
        if self.alpha + self.beta >= 1:
            raise ValueError(f"alpha + beta = {self.alpha + self.beta} is not < 1")
        return self

    def build(self, innovation: str) -> GarchParams:
        nu = self.nu if innovation == "student" else None
        return GarchParams(self.omega, self.alpha, self.beta, nu)


class ExperimentSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "experiment"
    master_seed: int = 0
    replications: int = Field(default=1000, ge=1)
    path_length: int = Field(default=8000, gt=0)
    window: int = Field(default=252, ge=2)
    step: int = Field(default=21, ge=1)
    alphas: list[float] = Field(default=[0.95, 0.99], min_length=1)
    p_values: list[float] = Field(default=[0.0], min_length=1)
    k_values: list[Literal[1, 2]] = Field(default=[1, 2], min_length=1)
    T_years: list[float] = Field(default=[1.0], min_length=1)
    pairing: Literal["rolling", "disjoint"] = "rolling"
    sim_burn_in: int = Field(default=1000, ge=0)
    workers: int = Field(default=1, ge=1)
    generators: list[GeneratorSpec] = Field(default_factory=list)
    garch_params: list[GarchSpec] = Field(default_factory=list)
    innovation: Literal["gaussian", "student"] = "gaussian"

    @model_validator(mode="after")
    def _one_kind(self):
        if bool(self.generators) == bool(self.garch_params):
            raise ValueError("give exactly one of 'generators' or 'garch_params'")
        if any(not 0 < a < 1 for a in self.alphas):
            raise ValueError("alphas must lie in (0, 1)")
        if self.garch_params and self.pairing != "rolling":
            raise ValueError("GARCH experiments use rolling pairing")
        return self

    @property
    def kind(self) -> str:
        return "garch" if self.garch_params else "iid"

    def mc_config(self, generator: Generator | None = None, seed_offset: int = 0) -> McConfig:
        return McConfig(
            generator=generator or Generator(),
            path_length=self.path_length, replications=self.replications,
            window=self.window, step=self.step, alphas=tuple(self.alphas),
            p_values=tuple(self.p_values), k_values=tuple(self.k_values),
            T_years=tuple(self.T_years), master_seed=self.master_seed + seed_offset,
            pairing=self.pairing, sim_burn_in=self.sim_burn_in, workers=self.workers)


def _format_errors(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        where = ".".join(str(x) for x in e["loc"]) or "<root>"
        lines.append(f"{where}: {e['msg']}")
    return "; ".join(lines)


def parse_spec(data: dict) -> ExperimentSpec:
    try:
        return ExperimentSpec.model_validate(data)
    except ValidationError as err:
        raise SpecError(_format_errors(err)) from None


def load_spec(path) -> ExperimentSpec:
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as err:
        raise SpecError(f"{path}: not valid YAML ({err})") from None
    if not isinstance(data, dict):
        raise SpecError(f"{path}: spec must be a mapping")
    return parse_spec(data)
