"""Experiment configuration: JSON with a published schema, validated before any work starts."""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass
from importlib import resources

import jsonschema
import numpy as np

from .errors import UsageError

SCHEMA = json.loads(resources.files("mslab").joinpath("config_schema.json").read_text())


class ConfigError(UsageError):
    """Invalid experiment configuration (message carries the line when known)."""


def _line_of(text, path):
    """Best-effort line number of the last key of a JSON path."""
    keys = [k for k in path if isinstance(k, str)]
    if not keys:
        return None
    pat = re.compile(r'"%s"\s*:' % re.escape(keys[-1]))
    for i, line in enumerate(text.splitlines(), 1):
        if pat.search(line):
            return i
    return None


def _parse_value(raw):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(data, overrides):
    """Apply ``key.sub=value`` overrides; values are parsed as JSON when possible."""
    data = copy.deepcopy(data)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        node = data
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-object")
        node[parts[-1]] = _parse_value(raw)
    return data


def validate(data, text=""):
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.path) or "<root>"
        line = _line_of(text, list(err.path))
        at = f" (line {line})" if line else ""
        raise ConfigError(f"config error at {where}{at}: {err.message}")


def load_config(path, overrides=()):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON (line {exc.lineno}, column {exc.colno}): {exc.msg}") from exc
    return ExperimentConfig.from_dict(apply_overrides(data, overrides), text if not overrides else "")


@dataclass
class ExperimentConfig:
    """A validated experiment description; ``data`` is the canonical echo."""

    data: dict

    @classmethod
    def from_dict(cls, data, text=""):
        validate(data, text)
        cfg = cls(copy.deepcopy(data))
        cfg._cross_check()
        return cfg

    @property
    def seed(self):
        return int(self.data["seed"])

    @property
    def options(self):
        return self.data.get("options", {})

    def echo(self):
        return copy.deepcopy(self.data)

    def _cross_check(self):
        fam = self.data.get("family")
        sp = self.data["space"]
        if fam and fam["kind"] == "power" and "N" in fam:
            n = _space_dimension(sp)
            if n is not None and abs(float(fam["N"]) - n) > 1e-12:
                raise ConfigError(f"family N = {fam['N']} does not match the space's volume dimension {n}")
        if fam and fam["kind"] in ("power", "exponential"):
            if "schedule" not in fam and "schedule_rule" not in fam and "schedule" not in self.data:
                raise ConfigError("family needs a schedule or schedule_rule")
        if fam and fam["kind"] == "custom" and "params" not in fam:
            raise ConfigError("custom family needs params")
        if sp["kind"] == "heisenberg" and "unit_ball_volume" not in sp and "calibration_samples" not in sp:
            raise ConfigError("heisenberg space needs unit_ball_volume or calibration_samples")

    # -- builders ------------------------------------------------------------

    def space(self):
        from .spaces import Heisenberg, make_space

        desc = self.data["space"]
        space = make_space(desc)
        if isinstance(space, Heisenberg) and space.unit_ball_volume is None:
            space.calibrate_unit_ball(desc["calibration_samples"], desc.get("calibration_seed", self.seed))
        return space

    def schedule(self):
        from .mollifiers import schedule_from_rule

        fam = self.data.get("family", {})
        if "schedule" in self.data:
            return np.asarray(self.data["schedule"], dtype=float)
        if "schedule" in fam:
            return np.asarray(fam["schedule"], dtype=float)
        if "schedule_rule" in fam:
            return schedule_from_rule(fam["schedule_rule"])
        return None

    def family(self, space=None):
        from .asymptotics import estimate_entropy
        from .mollifiers import ExponentialProfile, MollifierFamily, PowerProfile

        fam = self.data.get("family")
        if fam is None:
            raise ConfigError("this command needs a family")
        p = float(fam["p"])
        if fam["kind"] == "custom":
            base = fam.get("base", "power")
            if base == "power":
                n = float(fam.get("N", _space_dimension(self.data["space"]) or 1))
                profiles = [PowerProfile(n, p, float(a)) for a in fam["params"]]
                return MollifierFamily.custom(profiles, p, N=n)
            h = float(fam.get("h", 1.0))
            return MollifierFamily.custom([ExponentialProfile(h, p, float(s)) for s in fam["params"]], p, h=h)
        sched = self.schedule()
        if fam["kind"] == "power":
            n = fam.get("N")
            if n is None:
                n = (space or self.space()).volume_dimension
            return MollifierFamily.power_law(n, p, sched)
        h = fam.get("h", "entropy")
        if h == "entropy":
            h = estimate_entropy(space or self.space()).value
        return MollifierFamily.exponential(float(h), p, sched)

    def test_function(self, space):
        from .testfn import make_test_function

        desc = self.data.get("test_function")
        if desc is None:
            raise ConfigError("this command needs a test_function")
        return make_test_function(space, desc)

    def plan(self):
        from .quadrature import SamplingPlan

        desc = dict(self.data.get("plan", {}))
        if "shells" in desc:
            desc["shells"] = tuple(desc["shells"])
        return SamplingPlan(seed=self.seed, **desc)


def _space_dimension(desc):
    kind = desc["kind"]
    if kind in ("euclidean", "banach"):
        return float(desc.get("dimension", 1 if kind == "euclidean" else 2))
    if kind == "heisenberg":
        return 4.0
    if kind in ("sector", "hyperbolic"):
        return 2.0
    return None
