"""Run configuration: key-value files, bundled presets and command-line overrides.

Values resolve in the order defaults, preset, config file, flags; each layer
replaces individual keys of the one before.  Unknown sections or keys are
rejected so typos never pass silently.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Mapping

from .errors import ConfigError, ParameterError
from .params import CustomerSectorParams, ExpertiseParams, MarketScenario

CONFIG_ENV = "PSFMARKET_CONFIG"
SCENARIO_KINDS = ("customer", "psf", "coupled")

REQUIRED = object()


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_int(text: str):
    return None if text.strip().lower() in ("", "none") else int(text)


def _codes(text: str) -> tuple[str, ...]:
    return tuple(c.strip() for c in text.replace(";", ",").split(",") if c.strip())


# section -> key -> (parser, default)
SCHEMA: dict[str, dict[str, tuple[Callable[[str], Any], Any]]] = {
    "customer": {
        "alpha": (float, REQUIRED), "psi": (float, REQUIRED), "mu": (float, REQUIRED),
        "r_m": (float, 1.0), "nu": (float, 0.1), "f0": (float, 100.0),
    },
    "expertise": {
        "phi": (float, REQUIRED), "rho": (float, REQUIRED), "theta": (float, 1.0),
        "s_m": (float, 1.0), "C_m": (float, 1.0), "n": (float, 1.0),
    },
    "scenario": {
        "kind": (str, REQUIRED), "horizon": (float, REQUIRED), "dt": (float, REQUIRED),
        "seed": (int, 0), "demand": (str, "analytic"), "entry_mode": (str, "flux"),
        "n_customers": (int, 50_000), "n0": (int, 50_000), "r_max_factor": (float, 1e4),
        "initial_practices": (_opt_int, None), "entry_flow": (float, 0.0),
        "burn_in": (float, 0.0),
    },
    "calibration": {
        "data": (str, ""), "window": (str, "2008:2018"), "delimiter": (str, ","),
        "psf_codes": (_codes, ("5411", "5412", "5413", "5414", "5415", "5416", "5417", "5418", "5419")),
        "col_year": (str, "year"), "col_sector": (str, "vcnaics4"), "col_firms": (str, "firms"),
        "col_entrants": (str, "estabs_entry"), "col_exits": (str, "firmdeath_firms"),
        "col_employment": (str, "emp"), "suppression": (str, ",(D),(S),N"),
    },
    "report": {
        "calibration": (str, ""), "top_k": (int, 10), "exclude": (_codes, ()),
        "exclude_psf_rows": (_bool, False),
    },
    "output": {"dir": (str, "out"), "format": (str, "csv")},
}


PRESETS_ENV = "PSFMARKET_PRESETS"


def _preset_root():
    override = os.environ.get(PRESETS_ENV)
    return Path(override) if override else resources.files("psfmarket") / "presets"


def preset_names() -> list[str]:
    return sorted(p.name[:-4] for p in _preset_root().iterdir() if p.name.endswith(".cfg"))


def preset_path(name: str):
    path = _preset_root() / f"{name}.cfg"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r} (available: {', '.join(preset_names())})")
    return path


def bundled_file(name: str):
    """Path-like handle to a non-config file shipped with the presets."""
    return _preset_root() / name


def parse_config_text(text: str, origin: str = "<config>") -> dict[str, dict[str, str]]:
    """Raw ``{section: {key: text}}`` from ``section.key = value`` lines.

    ``#`` starts a comment; blank lines are ignored.  Every name is checked
    against the schema and a key may be set only once per file.
    """
    raw: dict[str, dict[str, str]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        name, sep, value = body.partition("=")
        name = name.strip()
        if not sep or name.count(".") != 1:
            raise ConfigError(f"{origin}:{lineno}: expected 'section.key = value', got {line.strip()!r}")
        section, key = (part.strip() for part in name.split("."))
        if section not in SCHEMA:
            raise ConfigError(f"{origin}:{lineno}: unknown section {section!r} in {name}")
        if key not in SCHEMA[section]:
            raise ConfigError(f"{origin}:{lineno}: unknown key {name}")
        if key in raw.get(section, {}):
            raise ConfigError(f"{origin}:{lineno}: {name} set twice")
        raw.setdefault(section, {})[key] = value.strip()
    return raw


def read_config_file(path) -> dict[str, dict[str, str]]:
    try:
        text = Path(path).read_text(encoding="utf-8") if isinstance(path, (str, Path)) \
            else path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    return parse_config_text(text, str(path))


@dataclass
class RunConfig:
    """Fully resolved settings; ``raw`` keeps only explicitly set keys."""

    raw: dict[str, dict[str, str]] = field(default_factory=dict)
    sources: list[str] = field(default_factory=list)

    def has_section(self, section: str) -> bool:
        return section in self.raw

    def get(self, section: str, key: str):
        parse, default = SCHEMA[section][key]
        if key in self.raw.get(section, {}):
            text = self.raw[section][key]
            try:
                return parse(text)
            except ValueError as err:
                raise ConfigError(f"bad value for {section}.{key}: {text!r} ({err})") from None
        if default is REQUIRED:
            raise ConfigError(f"missing required key {section}.{key}")
        return default

    def section(self, section: str) -> dict[str, Any]:
        return {k: self.get(section, k) for k in SCHEMA[section]}

    def customer(self) -> CustomerSectorParams:
        return _build(CustomerSectorParams, self.section("customer"))

    def expertise(self) -> ExpertiseParams:
        return _build(ExpertiseParams, self.section("expertise"))

    def scenario(self) -> MarketScenario:
        s = self.section("scenario")
        if s["kind"] != "coupled":
            raise ConfigError("scenario.kind must be 'coupled' to build a market scenario")
        return _build(MarketScenario, {
            "customer": self.customer(), "expertise": self.expertise(),
            "horizon": s["horizon"], "dt": s["dt"], "seed": s["seed"], "demand": s["demand"],
            "n_customers": s["n_customers"], "entry_mode": s["entry_mode"],
            "initial_practices": s["initial_practices"],
        })


def _build(cls, kwargs: Mapping[str, Any]):
    try:
        return cls(**kwargs)
    except ParameterError as err:
        raise ConfigError(f"invalid {cls.__name__}: {err}") from None
    except ValueError as err:
        raise ConfigError(f"invalid {cls.__name__}: {err}") from None


def merge(*layers: Mapping[str, Mapping[str, str]]) -> dict[str, dict[str, str]]:
    out: dict[str, dict[str, str]] = {}
    for layer in layers:
        for section, values in layer.items():
            out.setdefault(section, {}).update(values)
    return out


def resolve(
    preset: str | None = None,
    config_path=None,
    overrides: Mapping[str, Mapping[str, str]] | None = None,
    env: Mapping[str, str] | None = None,
) -> RunConfig:
    """Stack preset, config file (explicit or from ``PSFMARKET_CONFIG``) and flags."""
    env = os.environ if env is None else env
    layers, sources = [], []
    if preset:
        layers.append(read_config_file(preset_path(preset)))
        sources.append(f"preset:{preset}")
    if config_path is None and env.get(CONFIG_ENV):
        config_path = env[CONFIG_ENV]
    if config_path is not None:
        layers.append(read_config_file(config_path))
        sources.append(str(config_path))
    if overrides:
        for section, values in overrides.items():
            for key in values:
                if key not in SCHEMA.get(section, {}):
                    raise ConfigError(f"unknown key {section}.{key}")
        layers.append(overrides)
        sources.append("flags")
    return RunConfig(merge(*layers), sources)
