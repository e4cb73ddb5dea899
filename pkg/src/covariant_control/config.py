"""Scenario configuration: strict JSON parsing with every error reported."""
from __future__ import annotations

import json
from typing import Annotated, Literal, Optional, Union

from pydantic import (BaseModel, ConfigDict, Field, ValidationError, field_validator,
                      model_validator)

from .costs import KINDS, CostModel
from .direct import SCHEMES
from .integrators import METHODS
from .models import ModelError, build_model, list_models
from .shooting import CASES, BoundarySpec

__all__ = ["ConfigError", "ScenarioConfig", "parse_config", "load_config", "dump_config"]

_MODEL_NAMES = [m["name"] for m in list_models()]
_CASE_ALIASES = {"A": CASES[0], "B": CASES[1], "C": CASES[2]}

Real = Annotated[float, Field(allow_inf_nan=False)]
Positive = Annotated[float, Field(gt=0, allow_inf_nan=False)]
Vector = list[Real]


class ConfigError(ValueError):
    """Invalid scenario configuration; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {e}" for e in self.errors))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True)


def _one_of(value, allowed, what):
    if value not in allowed:
        raise ValueError(f"unknown {what} {value!r}; allowed: {list(allowed)}")
    return value


class ModelSection(_Strict):
    name: str
    params: dict[str, Real] = Field(default_factory=dict)

    @field_validator("name")
    @classmethod
    def _name(cls, v):
        return _one_of(v, _MODEL_NAMES, "model")

    @model_validator(mode="after")
    def _params(self):
        try:
            build_model(self.name, self.params, validate=False)
        except ModelError as exc:
            raise ValueError(str(exc)) from None
        return self


class CostSection(_Strict):
    kind: str = "quadratic_control"
    weights: dict[str, Real] = Field(default_factory=dict)

    @field_validator("kind")
    @classmethod
    def _kind(cls, v):
        return _one_of(v, KINDS, "cost kind")

    @model_validator(mode="after")
    def _weights(self):
        CostModel(self.kind, self.weights)
        return self


class BoundarySection(_Strict):
    case: str
    q0: Vector
    zeta0: Optional[Vector] = None
    qT: Optional[Vector] = None
    zetaT: Optional[Vector] = None

    @field_validator("case")
    @classmethod
    def _case(cls, v):
        return _one_of(_CASE_ALIASES.get(v, v), CASES, "boundary case")

    @model_validator(mode="after")
    def _complete(self):
        # completeness only; vector lengths are checked against the model by ScenarioConfig
        present = {k: (None if getattr(self, k) is None else [0.0])
                   for k in ("q0", "zeta0", "qT", "zetaT")}
        BoundarySpec(self.case, **present)
        return self


class SolverSection(_Strict):
    tol: Positive = 1e-9
    max_iter: Annotated[int, Field(ge=1)] = 100
    integrator: str = "rk4"
    fd_step: Positive = 1e-6
    derivatives: Literal["analytic", "finite_difference"] = "analytic"
    initial_guess: Optional[Vector] = None

    @field_validator("integrator")
    @classmethod
    def _integrator(cls, v):
        return _one_of(v, METHODS, "integrator")


class DirectSection(_Strict):
    steps_N: Optional[Annotated[int, Field(ge=2)]] = None
    penalty_weight: Positive = 1e6
    max_evals: Annotated[int, Field(ge=1)] = 20000
    scheme: str = "linear"

    @field_validator("scheme")
    @classmethod
    def _scheme(cls, v):
        return _one_of(v, SCHEMES, "scheme")


class OutputSection(_Strict):
    trajectory_path: Optional[str] = None
    report_path: Optional[str] = None


class ScenarioConfig(_Strict):
    model: ModelSection
    cost: CostSection = Field(default_factory=CostSection)
    horizon_T: Positive
    steps_N: Annotated[int, Field(ge=2)]
    boundary: BoundarySection
    solver: SolverSection = Field(default_factory=SolverSection)
    direct: DirectSection = Field(default_factory=DirectSection)
    control: Optional[Union[list[Vector], Vector]] = None
    output: OutputSection = Field(default_factory=OutputSection)

    @model_validator(mode="after")
    def _dimensions(self):
        n = build_model(self.model.name, self.model.params, validate=False).dim
        errs = []
        for key in ("q0", "zeta0", "qT", "zetaT"):
            v = getattr(self.boundary, key)
            if v is not None and len(v) != n:
                errs.append(f"boundary.{key} has {len(v)} values, model {self.model.name!r} needs {n}")
        g = self.solver.initial_guess
        if g is not None and len(g) != 2 * n:
            errs.append(f"solver.initial_guess has {len(g)} values, expected {2 * n}")
        c = self.control
        if c is not None:
            rows = c if c and isinstance(c[0], list) else None
            ok = (len(c) == n) if rows is None else (len(c) == self.steps_N + 1
                                                       and all(len(r) == n for r in rows))
            if not ok:
                errs.append(f"control must have {n} values or {self.steps_N + 1} rows of {n}")
        if errs:
            raise ValueError("; ".join(errs))
        return self

    def build_model(self):
        model = build_model(self.model.name, self.model.params)
        if self.solver.derivatives == "finite_difference":
            model = model.finite_difference(self.solver.fd_step)
        return model

    def build_cost(self):
        return CostModel(self.cost.kind, self.cost.weights)

    def build_boundary(self):
        return BoundarySpec(**self.boundary.model_dump())


def _format(err):
    loc = ".".join(str(p) for p in err["loc"]) or "<root>"
    msg = err["msg"]
    if msg.startswith("Value error, "):
        msg = msg[len("Value error, "):]
    return f"{loc}: {msg}"


def parse_config(text):
    """Parse and validate scenario text; raises ConfigError listing all problems."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"<root>: not valid JSON ({exc})"]) from None
    if not isinstance(data, dict):
        raise ConfigError(["<root>: expected a JSON object"])
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError([_format(e) for e in exc.errors()]) from None


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"<file>: cannot read {path}: {exc.strerror}"]) from None
    return parse_config(text)


def dump_config(cfg):
    """Canonical JSON text for a config (defaults filled in, keys sorted)."""
    return json.dumps(cfg.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"
