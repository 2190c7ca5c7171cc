#!/usr/bin/env python3
"""
Configuration Manager for sbp-groundstate

This module loads and validates run configurations. A configuration document
may be JSON, flat TOML (key = value) or YAML, with keys either flat
(a, omega, n, rmax, method, ...) or nested by section. It provides a clean
interface for the CLI to access settings without having to pass numerous
command line arguments.
"""

import json
import os
import re
import typing
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from errors import DomainError, SBPError
from functional import Params
from solver import SolverConfig

COMMANDS = ("solve", "sweep-a", "verify", "probe", "grid-study")
SWEEP_MODES = ("full_solution", "fixed_source")
FORMATS = ("auto", "json", "toml", "yaml")


class ConfigError(SBPError, ValueError):
    """A configuration key that is unknown, mistyped or out of range."""

    def __init__(self, key: str, reason: str):
        self.key = key
        self.reason = reason
        super().__init__(f"{key}: {reason}")


@dataclass
class GridConfig:
    """Configuration for the radial grid"""
    n: int = 512
    r_max: float = 30.0
    core_scale: float = 1.0
    derivative_order: int = 6


@dataclass
class ParamsConfig:
    """Physical parameters (a, ω, q, p)"""
    a: float = 1.0
    omega: float = 1.0
    q: float = 1.0
    p: float = 5.0
    coulomb_limit: bool = False

    def to_params(self) -> Params:
        return Params(a=self.a, omega=self.omega, q=self.q, p=self.p,
                      coulomb_limit=self.coulomb_limit)


@dataclass
class SweepConfig:
    """Configuration for the a → 0 sweep"""
    a_values: List[float] = field(default_factory=lambda: [0.5, 0.2, 0.1, 0.05])
    mode: str = "full_solution"
    source_width: float = 1.0


@dataclass
class ProbeConfig:
    """Configuration for single-probe runs"""
    name: str = "nonexistence_high_p"
    profile: str = "gaussian"
    count: int = 50


@dataclass
class OutputConfig:
    """Configuration for output settings"""
    output_path: Optional[str] = None
    csv_path: Optional[str] = None
    run_store: Optional[str] = None


@dataclass
class ParallelismConfig:
    """Configuration for parallel probe execution"""
    max_workers: int = 4


@dataclass
class RunConfig:
    """Main configuration class that holds all settings of one run"""
    command: str = "solve"
    params: ParamsConfig = field(default_factory=ParamsConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    parallelism: ParallelismConfig = field(default_factory=ParallelismConfig)
    seed: int = 0
    study_command: str = "solve"

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


SECTIONS: Dict[str, type] = {
    "params": ParamsConfig,
    "solver": SolverConfig,
    "grid": GridConfig,
    "sweep": SweepConfig,
    "probe": ProbeConfig,
    "output": OutputConfig,
    "parallelism": ParallelismConfig,
}
TOP_LEVEL = {"command": str, "seed": int, "study_command": str}

# Flat spellings accepted besides every section field name
ALIASES: Dict[str, Tuple[str, str]] = {
    "N": ("grid", "n"),
    "rmax": ("grid", "r_max"),
    "tol": ("solver", "grad_tol"),
    "probe_name": ("probe", "name"),
}


def _flat_keys() -> Dict[str, Tuple[str, str]]:
    keys: Dict[str, Tuple[str, str]] = {}
    for section, cls in SECTIONS.items():
        for f in fields(cls):
            keys[f.name] = (section, f.name)
    keys.update(ALIASES)
    return keys


FLAT_KEYS = _flat_keys()


# ---------------------------------------------------------------------------
# Document parsing
# ---------------------------------------------------------------------------

def _reject_duplicate_pairs(pairs: List[Tuple[str, Any]]) -> Dict[str, Any]:
    data: Dict[str, Any] = {}
    for key, value in pairs:
        if key in data:
            raise ConfigError(key, "duplicate key")
        data[key] = value
    return data


class _UniqueKeyLoader(yaml.SafeLoader):
    """SafeLoader that rejects duplicate mapping keys."""

    def construct_mapping(self, node, deep=False):
        seen = set()
        for key_node, _ in node.value:
            key = self.construct_object(key_node, deep=deep)
            if key in seen:
                raise ConfigError(str(key), "duplicate key")
            seen.add(key)
        return super().construct_mapping(node, deep=deep)


_TOML_SECTION = re.compile(r"^\s*\[([^\[\]]+)\]\s*(#.*)?$")
_TOML_KEY = re.compile(r"^\s*([A-Za-z0-9_.-]+)\s*=")


def _toml_duplicates(text: str) -> None:
    """Name the first repeated key; tomllib only reports a position."""
    seen = set()
    section = ""
    for line in text.splitlines():
        header = _TOML_SECTION.match(line)
        if header:
            section = header.group(1).strip()
            continue
        key = _TOML_KEY.match(line)
        if key:
            name = (section, key.group(1))
            if name in seen:
                raise ConfigError(key.group(1), "duplicate key")
            seen.add(name)


def _detect_format(text: str) -> str:
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return "json"
    for line in stripped.splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if _TOML_SECTION.match(line) or _TOML_KEY.match(line):
            return "toml"
        return "yaml"
    return "yaml"


def load_document(text: str, fmt: str = "auto") -> Dict[str, Any]:
    """Parse a configuration document into a mapping, rejecting duplicate keys.

    Raises:
        ConfigError: On syntax errors, duplicates or a non-mapping document
    """
    if fmt not in FORMATS:
        raise ConfigError("format", f"unknown format {fmt!r}")
    if fmt == "auto":
        fmt = _detect_format(text)
    try:
        if fmt == "json":
            data = json.loads(text, object_pairs_hook=_reject_duplicate_pairs)
        elif fmt == "toml":
            _toml_duplicates(text)
            data = tomllib.loads(text)
        else:
            data = yaml.load(text, Loader=_UniqueKeyLoader)
    except ConfigError:
        raise
    except (json.JSONDecodeError, tomllib.TOMLDecodeError, yaml.YAMLError) as e:
        raise ConfigError("document", f"invalid {fmt.upper()}: {e}")
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("document", "top level must be a key/value mapping")
    return data


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _coerce(key: str, value: Any, annotation: Any) -> Any:
    origin = typing.get_origin(annotation)
    args = typing.get_args(annotation)
    if origin is typing.Union and type(None) in args:
        if value is None:
            return None
        inner = [a for a in args if a is not type(None)][0]
        return _coerce(key, value, inner)
    if origin in (list, List):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(key, f"expected a list, got {type(value).__name__}")
        return [_coerce(key, v, args[0] if args else Any) for v in value]
    if annotation is bool:
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected a boolean, got {value!r}")
        return value
    if annotation is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return value
    if annotation is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
        return float(value)
    if annotation is str:
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a string, got {value!r}")
        return value
    return value


def _build_section(name: str, cls: type, values: Dict[str, Any]) -> Any:
    hints = typing.get_type_hints(cls)
    kwargs = {key: _coerce(key, value, hints[key]) for key, value in values.items()}
    try:
        return cls(**kwargs)
    except DomainError as e:
        raise ConfigError(name, str(e))


def _collect(data: Dict[str, Any]) -> Tuple[Dict[str, Any], Dict[str, Dict[str, Any]]]:
    """Split a flat or sectioned mapping into top-level and per-section values."""
    top: Dict[str, Any] = {}
    sections: Dict[str, Dict[str, Any]] = {name: {} for name in SECTIONS}
    origin: Dict[Tuple[str, str], str] = {}

    def put(section: str, name: str, value: Any, spelled: str) -> None:
        if (section, name) in origin:
            raise ConfigError(spelled, f"given twice (also as {origin[(section, name)]!r})")
        origin[(section, name)] = spelled
        sections[section][name] = value

    for key, value in data.items():
        if key in TOP_LEVEL:
            top[key] = _coerce(key, value, TOP_LEVEL[key])
        elif key in SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(key, "section must be a key/value mapping")
            valid = {f.name for f in fields(SECTIONS[key])}
            for sub, sub_value in value.items():
                if sub not in valid:
                    raise ConfigError(f"{key}.{sub}", "unknown key")
                put(key, sub, sub_value, f"{key}.{sub}")
        elif key in FLAT_KEYS:
            section, name = FLAT_KEYS[key]
            put(section, name, value, key)
        else:
            raise ConfigError(key, "unknown key")
    return top, sections


def _validate_command(cfg: RunConfig, command: str) -> None:
    p = cfg.params.p
    if command in ("solve", "sweep-a") and not 2 < p < 6:
        raise ConfigError("p", "p out of (2,6)")


def _check_writable(key: str, path: Optional[str]) -> None:
    if not path:
        return
    parent = Path(path).expanduser().resolve().parent
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        raise ConfigError(key, f"directory {parent} is not writable")


def _validate_and_create_config(data: Dict[str, Any]) -> RunConfig:
    """Validate raw configuration data and create the RunConfig.

    Raises:
        ConfigError: Naming the offending key and the reason
    """
    top, sections = _collect(data)
    built = {name: _build_section(name, cls, sections[name]) for name, cls in SECTIONS.items()}
    cfg = RunConfig(**top, **built)

    if cfg.command not in COMMANDS:
        raise ConfigError("command", f"unknown command {cfg.command!r}; expected one of {COMMANDS}")
    if cfg.study_command not in COMMANDS or cfg.study_command == "grid-study":
        raise ConfigError("study_command", f"cannot grid-study {cfg.study_command!r}")
    if cfg.seed < 0:
        raise ConfigError("seed", "seed must be >= 0")

    try:
        cfg.params.to_params()
    except DomainError as e:
        raise ConfigError("params", str(e))
    if cfg.grid.n < 64:
        raise ConfigError("n", "grid needs at least 64 nodes")
    if not cfg.grid.r_max > 0 or not cfg.grid.core_scale > 0:
        raise ConfigError("r_max", "r_max and core_scale must be > 0")
    if cfg.grid.derivative_order not in (2, 6):
        raise ConfigError("derivative_order", "derivative order must be 2 or 6")
    if cfg.sweep.mode not in SWEEP_MODES:
        raise ConfigError("mode", f"sweep mode must be one of {SWEEP_MODES}")
    a_values = cfg.sweep.a_values
    if not a_values or any(a <= 0 for a in a_values) or any(b >= a for a, b in zip(a_values, a_values[1:])):
        raise ConfigError("a_values", "a_values must be positive and strictly decreasing")
    if cfg.probe.profile not in ("gaussian", "random"):
        raise ConfigError("profile", "profile must be gaussian or random")
    if cfg.probe.count < 1:
        raise ConfigError("count", "count must be >= 1")
    if cfg.parallelism.max_workers < 1 or cfg.parallelism.max_workers > 32:
        raise ConfigError("max_workers", "max_workers must be between 1 and 32")

    _validate_command(cfg, cfg.command)
    if cfg.command == "grid-study":
        _validate_command(cfg, cfg.study_command)
    _check_writable("output_path", cfg.output.output_path)
    _check_writable("csv_path", cfg.output.csv_path)
    return cfg


def config_from_mapping(data: Dict[str, Any]) -> RunConfig:
    """Build a validated RunConfig from an already parsed mapping."""
    return _validate_and_create_config(data)


def parse_config(text: str, fmt: str = "auto") -> RunConfig:
    """Parse and validate a configuration document.

    Args:
        text: JSON, flat TOML or YAML document
        fmt: One of auto, json, toml, yaml

    Returns:
        Validated RunConfig with defaults filled in

    Raises:
        ConfigError: On unknown keys, duplicates, type mismatches or constraint violations
    """
    return _validate_and_create_config(load_document(text, fmt))


def serialize_config(cfg: RunConfig) -> str:
    """Canonical sectioned JSON; parse_config(serialize_config(cfg)) == cfg."""
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)


def with_overrides(cfg: RunConfig, overrides: Dict[str, Any]) -> RunConfig:
    """Apply flat overrides (None values are skipped) and re-validate.

    CLI flags go through here, so they take precedence over file values.
    """
    data = cfg.to_dict()
    for key, value in overrides.items():
        if value is None:
            continue
        if key in TOP_LEVEL:
            data[key] = value
        elif key in FLAT_KEYS:
            section, name = FLAT_KEYS[key]
            data[section][name] = value
        else:
            raise ConfigError(key, "unknown key")
    return _validate_and_create_config(data)


def _format_for(path: str) -> str:
    suffix = Path(path).suffix.lower()
    return {".json": "json", ".toml": "toml", ".yaml": "yaml", ".yml": "yaml"}.get(suffix, "auto")


class ConfigManager:
    """Manages loading and validation of run configuration files"""

    DEFAULT_CONFIG_FILE = "config.yaml"

    def __init__(self, config_file: Optional[str] = None):
        """
        Initialize the configuration manager

        Args:
            config_file: Path to configuration file (default: config.yaml)
        """
        self.config_file = config_file or self.DEFAULT_CONFIG_FILE
        self.config: Optional[RunConfig] = None

    def load_config(self) -> RunConfig:
        """
        Load configuration from file

        Returns:
            RunConfig object with all settings

        Raises:
            FileNotFoundError: If config file doesn't exist
            ConfigError: If the document is malformed or a value is invalid
        """
        if not os.path.exists(self.config_file):
            raise FileNotFoundError(f"Configuration file not found: {self.config_file}")

        with open(self.config_file, 'r') as f:
            text = f.read()

        self.config = parse_config(text, _format_for(self.config_file))
        return self.config

    def get_config(self) -> RunConfig:
        """
        Get the current configuration, loading it if necessary

        Returns:
            RunConfig object
        """
        if self.config is None:
            self.config = self.load_config()
        return self.config

    def create_default_config(self) -> None:
        """
        Create a default configuration file if it doesn't exist

        This method creates a template configuration file that users can customize.
        YAML and JSON targets are written; TOML documents are read-only.

        Raises:
            ConfigError: If the target has a .toml suffix
        """
        if _format_for(self.config_file) == "toml":
            raise ConfigError("config_file", f"cannot write a TOML template to {self.config_file}; "
                                             f"use a .yaml or .json path")
        if os.path.exists(self.config_file):
            return  # Don't overwrite existing config

        default_config = RunConfig().to_dict()
        with open(self.config_file, 'w') as f:
            if _format_for(self.config_file) == "json":
                f.write(serialize_config(RunConfig()))
            else:
                yaml.dump(default_config, f, default_flow_style=False, indent=2)


def load_config_from_file(config_file: Optional[str] = None) -> RunConfig:
    """
    Convenience function to load configuration from file

    Args:
        config_file: Path to configuration file (default: config.yaml)

    Returns:
        RunConfig object
    """
    manager = ConfigManager(config_file)
    return manager.load_config()


def create_default_config_file(config_file: Optional[str] = None) -> str:
    """
    Convenience function to create default configuration file

    Args:
        config_file: Path to configuration file (default: config.yaml)

    Returns:
        Path of the configuration file
    """
    manager = ConfigManager(config_file)
    manager.create_default_config()
    return manager.config_file
