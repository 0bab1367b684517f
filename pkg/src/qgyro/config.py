"""Experiment configuration: INI-style sections, validated before anything runs.

Example::

    [experiment]
    name = trajectory-compare

    [geometry]
    ell = 20, 40, 80

    [source]
    s_z = 0.25

    [initial]
    theta = 2.9452431127

    [run]
    steps = 1920
"""
from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

from .errors import ValidationError

EXPERIMENTS = ("evolve", "thermal-curve", "gap-sweep", "hitting-time", "trajectory-compare", "povm-report")
NAMED_STATES = ("coherent", "mixed", "up", "down", "random")

DEFAULT_TOLERANCES = {
    "trace": 1e-12,
    "positivity": 1e-10,
    "symmetry": 1e-12,
}


@dataclass
class ExperimentConfig:
    experiment: str
    twice_ell: list = field(default_factory=lambda: [40])
    s_z: list = field(default_factory=lambda: [0.25])
    bloch: list | None = None
    initial_state: str = "coherent"
    theta0: float = 0.0
    phi0: float = 0.0
    steps: int = 100
    budget: int = 100_000
    points: int = 201
    epsilon: float = 0.2
    threshold: float | None = None
    n_hat: list = field(default_factory=lambda: [0.0, 0.0, 1.0])
    seed: int = 0
    output: str | None = None
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ValidationError(f"unknown experiment {self.experiment!r}; expected one of {', '.join(EXPERIMENTS)}")
        if not self.twice_ell:
            raise ValidationError("geometry: at least one ell is required")
        for t in self.twice_ell:
            if not isinstance(t, int) or t < 1:
                raise ValidationError(f"geometry: ell must be a positive integer or half-integer, got twice_ell={t!r}")
        for s in self.s_z:
            if isinstance(s, bool) or not isinstance(s, (int, float)) or not math.isfinite(s) or abs(s) > 0.5:
                raise ValidationError(f"source: s_z = {s} violates |s_z| <= 1/2")
        if self.bloch is not None:
            if len(self.bloch) != 3 or math.hypot(*self.bloch) > 0.5 + 1e-12:
                raise ValidationError(f"source: bloch = {self.bloch} violates |<S>| <= 1/2")
        if self.initial_state not in NAMED_STATES:
            raise ValidationError(f"initial: state must be one of {', '.join(NAMED_STATES)}, got {self.initial_state!r}")
        if self.steps < 0 or self.budget < 0:
            raise ValidationError("run: steps and budget must be non-negative")
        if self.points < 3:
            raise ValidationError("run: points must be >= 3")
        if not 0 < self.epsilon < 1:
            raise ValidationError(f"run: epsilon = {self.epsilon} must lie in (0, 1)")
        if self.threshold is not None and not 0.5 < self.threshold < 1:
            raise ValidationError(f"run: threshold = {self.threshold} must lie in (1/2, 1)")
        if len(self.n_hat) != 3 or abs(math.hypot(*self.n_hat) - 1) > 1e-12:
            raise ValidationError(f"run: n_hat = {self.n_hat} must be a unit 3-vector")
        if self.experiment == "trajectory-compare":
            if not 0 < self.theta0 < math.pi:
                raise ValidationError("initial: trajectory-compare needs 0 < theta < pi")
        for k, v in self.tolerances.items():
            if not v > 0:
                raise ValidationError(f"tolerances: {k} must be positive")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def canonical_json(self) -> str:
        d = self.to_dict()
        d.pop("output")
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown config fields: {sorted(extra)}")
        return cls(**d).validate()


def _floats(text: str, what: str) -> list:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise ValidationError(f"{what}: could not parse numbers from {text!r}") from None


def _int(text: str, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ValidationError(f"{what}: expected an integer, got {text!r}") from None


def _angle(text: str, what: str) -> float:
    """Float, or an expression like 15pi/16."""
    t = text.strip().replace(" ", "")
    if "pi" in t:
        num, _, den = t.partition("/")
        coef = num.replace("*", "").replace("pi", "")
        c = float(coef) if coef not in ("", "+") else 1.0
        if coef == "-":
            c = -1.0
        return c * math.pi / (float(den) if den else 1.0)
    return _floats(t, what)[0]


def parse_config(text: str, experiment: str | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"config syntax error: {exc}") from None
    sections = {"experiment", "geometry", "source", "initial", "run", "output", "tolerances"}
    unknown = set(cp.sections()) - sections
    if unknown:
        raise ValidationError(f"unknown config sections: {sorted(unknown)}")

    name = cp.get("experiment", "name", fallback=experiment)
    if experiment is not None and name != experiment:
        raise ValidationError(f"config names experiment {name!r} but {experiment!r} was requested")
    if name is None:
        raise ValidationError("experiment: name is required")
    cfg = ExperimentConfig(experiment=name)

    if cp.has_section("geometry"):
        g = cp["geometry"]
        if "twice_ell" in g:
            cfg.twice_ell = [_int(x, "geometry.twice_ell") for x in g["twice_ell"].replace(",", " ").split()]
        elif "ell" in g:
            vals = _floats(g["ell"], "geometry.ell")
            for v in vals:
                if abs(2 * v - round(2 * v)) > 1e-9:
                    raise ValidationError(f"geometry: ell = {v} is not an integer or half-integer")
            cfg.twice_ell = [int(round(2 * v)) for v in vals]
    if cp.has_section("source"):
        s = cp["source"]
        if "bloch" in s:
            cfg.bloch = _floats(s["bloch"], "source.bloch")
            if len(cfg.bloch) != 3:
                raise ValidationError("source: bloch needs three components")
            cfg.s_z = [cfg.bloch[2]]
        if "s_z" in s:
            cfg.s_z = _floats(s["s_z"], "source.s_z")
    if cp.has_section("initial"):
        i = cp["initial"]
        cfg.initial_state = i.get("state", cfg.initial_state).strip()
        if "theta" in i:
            cfg.theta0 = _angle(i["theta"], "initial.theta")
        if "phi" in i:
            cfg.phi0 = _angle(i["phi"], "initial.phi")
    if cp.has_section("run"):
        r = cp["run"]
        for key in ("steps", "budget", "points", "seed"):
            if key in r:
                setattr(cfg, key, _int(r[key], f"run.{key}"))
        if "epsilon" in r:
            cfg.epsilon = _floats(r["epsilon"], "run.epsilon")[0]
        if "threshold" in r:
            cfg.threshold = _floats(r["threshold"], "run.threshold")[0]
        if "n_hat" in r:
            cfg.n_hat = _floats(r["n_hat"], "run.n_hat")
        unknown = set(r) - {"steps", "budget", "points", "seed", "epsilon", "threshold", "n_hat"}
        if unknown:
            raise ValidationError(f"unknown keys in [run]: {sorted(unknown)}")
    if cp.has_section("output"):
        cfg.output = cp["output"].get("dir")
    if cp.has_section("tolerances"):
        for k, v in cp["tolerances"].items():
            if k not in DEFAULT_TOLERANCES:
                raise ValidationError(f"unknown tolerance {k!r}")
            cfg.tolerances[k] = _floats(v, f"tolerances.{k}")[0]
    return cfg.validate()


def load_config(path, experiment: str | None = None) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, experiment)
