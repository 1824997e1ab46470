"""Run configuration: INI presets plus command-line overrides.

Sections:

``[run]``
    ``scenario``, ``seed``, ``output``, ``oracle_check``.
``[params]``
    any :class:`ScenarioParams` field; ``dark_rate_hz`` is converted to a
    per-bin probability with ``bin_duration``.
``[sweep]``
    ``name = start:stop:N`` (linear), ``start:stop:logN`` or ``a, b, c``.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
import re
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigurationError
from .scenarios import ScenarioParams

SCENARIOS = ("hom", "hom-dip", "teleport-z", "teleport-x", "entanglement", "herald")
PRESETS = ("paper",)
_PARAM_FIELDS = {f.name: f for f in fields(ScenarioParams)}
_TUPLE_FIELDS = {"phase_grid", "delta_t_grid"}
_STR_FIELDS = {"input_state"}
_OPTIONAL_FIELDS = {"gamma"}


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "hom"
    params: ScenarioParams = field(default_factory=ScenarioParams)
    sweeps: tuple = ()
    output: Optional[str] = None
    seed: int = 0
    oracle_check: bool = False

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigurationError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        for name, grid in self.sweeps:
            if name not in _PARAM_FIELDS or name in _TUPLE_FIELDS or name in _STR_FIELDS:
                raise ConfigurationError(f"cannot sweep {name!r}")
            if len(grid) == 0:
                raise ConfigurationError(f"sweep {name!r} has an empty grid")
            if not all(math.isfinite(v) for v in grid):
                raise ConfigurationError(f"sweep {name!r} has non-finite values")

    def digest(self) -> str:
        """Short stable hash of everything that affects the output."""
        blob = {
            "scenario": self.scenario,
            "params": {k: v for k, v in self.params.as_dict().items()},
            "sweeps": [[n, list(g)] for n, g in self.sweeps],
            "seed": self.seed,
            "oracle_check": self.oracle_check,
        }
        return hashlib.sha256(json.dumps(blob, sort_keys=True, default=repr).encode()).hexdigest()[:16]


def parse_grid(spec: str) -> tuple:
    """``a:b:N`` linear, ``a:b:logN`` logarithmic, or a comma list."""
    spec = spec.strip()
    if not spec:
        raise ConfigurationError("empty sweep grid")
    m = re.fullmatch(r"([^:]+):([^:]+):(log)?\s*(\d+)", spec)
    try:
        if m:
            a, b, log, n = float(m.group(1)), float(m.group(2)), m.group(3), int(m.group(4))
            if n < 1:
                raise ConfigurationError(f"sweep grid {spec!r} has no points")
            if log:
                if a <= 0 or b <= 0:
                    raise ConfigurationError(f"log grid {spec!r} needs positive endpoints")
                return tuple(float(x) for x in np.geomspace(a, b, n))
            return tuple(float(x) for x in np.linspace(a, b, n))
        if ":" in spec:
            raise ConfigurationError(f"malformed sweep grid {spec!r}")
        vals = [s for s in (p.strip() for p in spec.split(",")) if s]
        if not vals:
            raise ConfigurationError("empty sweep grid")
        return tuple(float(v) for v in vals)
    except ValueError:
        raise ConfigurationError(f"malformed sweep grid {spec!r}") from None


def _convert(name: str, raw: str):
    raw = raw.strip()
    if name in _STR_FIELDS:
        return raw
    if name in _OPTIONAL_FIELDS and raw.lower() in ("", "none"):
        return None
    if name in _TUPLE_FIELDS:
        return parse_grid(raw)
    return float(raw)


def _key_lines(text: str) -> dict:
    """Line number of every ``section/key`` assignment, for error messages."""
    lines = {}
    section = None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
        elif section and s and not s.startswith(("#", ";")) and ("=" in s or ":" in s):
            key = re.split(r"[=:]", s, maxsplit=1)[0].strip()
            lines[(section, key)] = n
    return lines


def parse_params(items, where=lambda k: "") -> dict:
    """ScenarioParams keyword values from ``(key, raw string)`` pairs."""
    out = {}
    dark_rate = None
    for key, raw in items:
        try:
            if key == "dark_rate_hz":
                dark_rate = float(raw)
                continue
            if key not in _PARAM_FIELDS:
                raise ConfigurationError(f"unknown parameter {key!r}")
            out[key] = _convert(key, raw)
        except (ValueError, ConfigurationError) as exc:
            msg = str(exc) if isinstance(exc, ConfigurationError) else f"bad value {raw!r} for {key}"
            raise ConfigurationError(f"{where(key)}{msg}") from None
    if dark_rate is not None:
        if dark_rate < 0:
            raise ConfigurationError(f"{where('dark_rate_hz')}dark_rate_hz must be non-negative")
        if "dark_prob" in out:
            raise ConfigurationError(f"{where('dark_rate_hz')}give dark_rate_hz or dark_prob, not both")
        bin_ps = out.get("bin_duration", ScenarioParams().bin_duration)
        out["dark_prob"] = dark_rate * bin_ps * 1e-12
    return out


def _bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return resources.files("timebin_teleport").joinpath(f"presets/{name}.ini").read_text()


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Raw sections of an INI text as ``{"run": {...}, "params": [...], "sweep": [...]}``."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: {exc}".replace("\n", " ")) from None
    lines = _key_lines(text)
    unknown = [s for s in cp.sections() if s not in ("run", "params", "sweep")]
    if unknown:
        raise ConfigurationError(f"{source}: unknown section [{unknown[0]}]")

    def where(section):
        return lambda key: f"{source}:{lines.get((section, key), '?')}: "

    out = {"run": {}, "params": [], "sweep": [], "where": where}
    if cp.has_section("run"):
        out["run"] = dict(cp.items("run"))
    if cp.has_section("params"):
        out["params"] = list(cp.items("params"))
    if cp.has_section("sweep"):
        out["sweep"] = list(cp.items("sweep"))
    return out


def build_config(
    files=(),
    preset: Optional[str] = None,
    scenario: Optional[str] = None,
    overrides=(),
    sweeps=(),
    seed: Optional[int] = None,
    output: Optional[str] = None,
    oracle_check: Optional[bool] = None,
) -> RunConfig:
    """Merge preset, config files and flags; later sources win.

    ``overrides`` and ``sweeps`` are ``"key=value"`` strings from the command line.
    """
    run: dict = {}
    params: dict = {}
    sweep: dict = {}
    where: dict = {}
    texts = []
    if preset:
        texts.append((preset_text(preset), f"preset:{preset}"))
    for f in files:
        p = Path(f)
        try:
            texts.append((p.read_text(), str(p)))
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {f}: {exc.strerror}") from None
    for text, src in texts:
        sec = parse_config_text(text, src)
        run.update(sec["run"])
        params.update(parse_params(sec["params"], sec["where"]("params")))
        for key, _ in sec["params"]:
            where["dark_prob" if key == "dark_rate_hz" else key] = sec["where"]("params")(key)
        for key, raw in sec["sweep"]:
            where[("sweep", key)] = sec["where"]("sweep")(key)
            try:
                sweep[key] = parse_grid(raw)
            except ConfigurationError as exc:
                raise ConfigurationError(f"{sec['where']('sweep')(key)}{exc}") from None
        for key, raw in sec["run"].items():
            if key not in ("scenario", "seed", "output", "oracle_check"):
                raise ConfigurationError(f"{sec['where']('run')(key)}unknown run option {key!r}")

    def split(item, what):
        if "=" not in item:
            raise ConfigurationError(f"{what} {item!r} must look like key=value")
        k, v = item.split("=", 1)
        return k.strip(), v.strip()

    flag_params = [split(o, "--set") for o in overrides]
    params.update(parse_params(flag_params, lambda k: "--set: "))
    for k, _ in flag_params:
        where["dark_prob" if k == "dark_rate_hz" else k] = "--set: "
    for item in sweeps:
        k, v = split(item, "--sweep")
        sweep[k] = parse_grid(v)
        where[("sweep", k)] = "--sweep: "

    try:
        base = ScenarioParams(**params)
    except ConfigurationError as exc:
        key = next((k for k in sorted(params, key=len, reverse=True) if str(exc).startswith(k)), None)
        raise ConfigurationError(f"{where.get(key, '')}{exc}") from None
    for k, grid in sweep.items():
        loc = where.get(("sweep", k), "")
        if k not in _PARAM_FIELDS or k in _TUPLE_FIELDS or k in _STR_FIELDS:
            raise ConfigurationError(f"{loc}cannot sweep {k!r}")
        for v in grid:
            try:
                base.replace(**{k: v})
            except ConfigurationError as exc:
                raise ConfigurationError(f"{loc}sweep value {v!r}: {exc}") from None

    if scenario is not None:
        run["scenario"] = scenario
    try:
        seed_val = int(run.get("seed", 0)) if seed is None else int(seed)
        oc = _bool(run.get("oracle_check", "false")) if oracle_check is None else bool(oracle_check)
    except ValueError:
        raise ConfigurationError("run options: seed must be an integer and oracle_check a boolean") from None
    return RunConfig(
        scenario=run.get("scenario", "hom"),
        params=base,
        sweeps=tuple(sweep.items()),
        output=output if output is not None else run.get("output"),
        seed=seed_val,
        oracle_check=oc,
    )
