"""INI-style run configuration.

One section per run; the section name labels the output directory::

    [toolkit]
    output_root = results

    [ring]
    scenario = annulus-modulus
    seed = 0
    resolution = 512
    r1 = 0.25

Keys other than ``scenario``, ``seed`` and ``output`` must be parameters
declared by the scenario. Anything unknown is rejected.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field

from .errors import InvalidArgument

ENV_OUTPUT_ROOT = "QCDIR_OUTPUT_ROOT"
RESERVED = ("scenario", "seed", "output")
TOOLKIT_KEYS = ("output_root",)


@dataclass(frozen=True)
class Param:
    name: str
    kind: type
    default: object
    doc: str = ""
    choices: tuple = ()
    minimum: float | None = None
    strict: bool = False  # minimum itself excluded

    def parse(self, raw: str):
        text = raw.strip()
        try:
            if self.kind is bool:
                low = text.lower()
                if low not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
                    raise ValueError(text)
                value = low in ("true", "yes", "1", "on")
            elif self.kind is complex:
                value = complex(text.replace(" ", ""))
            else:
                value = self.kind(text)
        except ValueError:
            raise InvalidArgument(f"{self.name}: cannot read {raw!r} as {self.kind.__name__}") from None
        self.check(value)
        return value

    def check(self, value):
        if self.choices and value not in self.choices:
            raise InvalidArgument(f"{self.name}: {value!r} is not one of {list(self.choices)}")
        if self.minimum is not None and (value < self.minimum or (self.strict and value == self.minimum)):
            word = "must exceed" if self.strict else "is below the minimum"
            raise InvalidArgument(f"{self.name}: {value!r} {word} {self.minimum}")


@dataclass
class RunSpec:
    label: str
    scenario: str
    seed: int
    params: dict
    output: str
    raw: dict = field(default_factory=dict)


@dataclass
class RunConfig:
    path: str
    output_root: str
    runs: list


def output_root(configured: str | None, base_dir: str) -> str:
    env = os.environ.get(ENV_OUTPUT_ROOT)
    if env:
        return os.path.abspath(env)
    if configured:
        return os.path.normpath(os.path.join(base_dir, configured))
    return os.path.join(base_dir, "qcdir-output")


def load_config(path, registry) -> RunConfig:
    """Parse and fully validate a config file; raises InvalidArgument on any problem."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise InvalidArgument(f"cannot read config {path}: {exc}") from None
    base = os.path.dirname(os.path.abspath(path))
    configured = None
    runs = []
    for section in cp.sections():
        items = dict(cp.items(section))
        if section == "toolkit":
            unknown = set(items) - set(TOOLKIT_KEYS)
            if unknown:
                raise InvalidArgument(f"[toolkit]: unknown keys {sorted(unknown)}")
            configured = items.get("output_root")
            continue
        if "scenario" not in items:
            raise InvalidArgument(f"[{section}]: missing key 'scenario'")
        name = items["scenario"].strip()
        if name not in registry:
            raise InvalidArgument(f"[{section}]: unknown scenario {name!r}")
        scen = registry[name]
        schema = {p.name: p for p in scen.params}
        unknown = set(items) - set(RESERVED) - set(schema)
        if unknown:
            raise InvalidArgument(f"[{section}]: unknown keys {sorted(unknown)} for scenario {name!r}")
        try:
            seed = int(items.get("seed", "0"))
        except ValueError:
            raise InvalidArgument(f"[{section}]: seed must be an integer") from None
        params = {p.name: p.default for p in scen.params}
        for key, raw in items.items():
            if key in schema:
                try:
                    params[key] = schema[key].parse(raw)
                except InvalidArgument as exc:
                    raise InvalidArgument(f"[{section}] {exc}") from None
        if scen.check is not None:
            try:
                scen.check(params)
            except InvalidArgument as exc:
                raise InvalidArgument(f"[{section}] {exc}") from None
        if os.sep in section or section.startswith("."):
            raise InvalidArgument(f"[{section}]: section names must be plain directory names")
        runs.append(RunSpec(section, name, seed, params, items.get("output", section), items))
    if not runs:
        raise InvalidArgument("config defines no runs")
    labels = [r.output for r in runs]
    if len(set(labels)) != len(labels):
        raise InvalidArgument("two runs share an output directory")
    return RunConfig(str(path), output_root(configured, base), runs)
