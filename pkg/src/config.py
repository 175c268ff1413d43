"""
Run Configuration

RunConfig holds every knob of one ncid invocation. Values are layered:
built-in defaults, then a key = value config file, then NCID_* environment
variables, then explicit command-line flags.
"""

import logging
import os
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from typing import Dict, List, Mapping, Optional

from exact_linalg import DEFAULT_PRIMES
from nc_core import NcidError

logger = logging.getLogger(__name__)

TOOL_VERSION = "1.0.0"
SCHEMA_VERSION = 1
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class ConfigError(NcidError):
    """Bad configuration file, environment value or flag combination."""


@dataclass
class RunConfig:
    """Effective configuration, embedded verbatim in every report."""

    subcommand: str = ""
    action: str = ""
    expr: Optional[str] = None
    family: Optional[str] = None
    n: int = 1
    order: int = 12
    method: str = "auto"
    deg_t: int = 8
    deg_s: int = 4
    margin: int = 15
    dims: List[int] = field(default_factory=lambda: [1, 2, 3])
    fields: List[str] = field(default_factory=lambda: ["QQ"])
    primes: List[int] = field(default_factory=lambda: list(DEFAULT_PRIMES))
    trials: int = 20
    seed: int = 0
    t_values: List[str] = field(default_factory=lambda: ["1", "2", "3", "5/7"])
    steps: int = 4
    map: str = "S1"
    delta: Optional[str] = None
    max_degree: int = 6
    guess: bool = False
    catalan: bool = False
    intertwine: bool = False
    output: Optional[str] = None
    format: str = "json"
    suppress_timestamp: bool = False
    max_words: int = 60000
    max_terms: int = 20000
    log_level: str = "WARNING"

    def to_dict(self) -> Dict:
        return asdict(self)

    @property
    def t_fractions(self) -> List[Fraction]:
        return [Fraction(t) for t in self.t_values]

    @property
    def field_tags(self) -> List[str]:
        """Explicit fields, with 'primes' expanded to GF(p) for the first two primes."""
        tags = []
        for tag in self.fields:
            if tag == "primes":
                tags.extend(f"GF({p})" for p in self.primes[:2])
            else:
                tags.append(tag)
        return tags


_FIELD_TYPES = {f.name: f for f in fields(RunConfig)}
_LIST_INT = ("dims", "primes")
_LIST_STR = ("fields", "t_values")
_BOOL = ("guess", "catalan", "intertwine", "suppress_timestamp")
_INT = ("n", "order", "deg_t", "deg_s", "margin", "trials", "seed", "steps", "max_degree",
        "max_words", "max_terms")


def coerce_value(key: str, raw) -> object:
    """
    Convert a textual value to the type of RunConfig.<key>.

    Raises:
        ConfigError: unknown key or unparsable value
    """
    if key not in _FIELD_TYPES:
        raise ConfigError(f"Unknown configuration key {key!r}")
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if key in _LIST_INT:
            return [int(part) for part in text.split(",") if part.strip()]
        if key in _LIST_STR:
            return [part.strip() for part in text.split(",") if part.strip()]
        if key in _BOOL:
            if text.lower() not in ("1", "0", "true", "false", "yes", "no"):
                raise ValueError(text)
            return text.lower() in ("1", "true", "yes")
        if key in _INT:
            return int(text)
    except ValueError as e:
        raise ConfigError(f"Bad value for {key}: {raw!r}") from e
    if key == "log_level" and text.upper() not in LOG_LEVELS:
        raise ConfigError(f"Unknown log level {raw!r}")
    if key == "format" and text not in ("json", "text"):
        raise ConfigError(f"Unknown format {raw!r}")
    return text.upper() if key == "log_level" else text


def read_config_file(path: str) -> Dict[str, object]:
    """
    Parse `key = value` lines; `#` starts a comment.

    Raises:
        ConfigError: unreadable file, malformed line or unknown key
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}") from e
    values = {}
    for number, line in enumerate(lines, start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"{path}:{number}: expected key = value")
        key, raw = (part.strip() for part in content.split("=", 1))
        values[key.replace("-", "_")] = coerce_value(key.replace("-", "_"), raw)
    return values


def environment_overrides(environ: Optional[Mapping[str, str]] = None) -> Dict[str, object]:
    environ = os.environ if environ is None else environ
    values = {}
    for variable, key in (("NCID_PRIMES", "primes"), ("NCID_SEED", "seed"), ("NCID_LOG_LEVEL", "log_level")):
        if environ.get(variable):
            values[key] = coerce_value(key, environ[variable])
    return values


def build_config(flags: Optional[Mapping[str, object]] = None, config_path: Optional[str] = None,
                 environ: Optional[Mapping[str, str]] = None) -> RunConfig:
    """
    Merge the layers. `flags` holds only options given explicitly on the
    command line (None values are ignored).
    """
    config = RunConfig()
    layers = []
    if config_path:
        layers.append(read_config_file(config_path))
    layers.append(environment_overrides(environ))
    layers.append({k: coerce_value(k, v) for k, v in (flags or {}).items() if v is not None})
    for layer in layers:
        for key, value in layer.items():
            setattr(config, key, value)
    if any(p < 3 for p in config.primes):
        raise ConfigError(f"Primes must be odd primes: {config.primes}")
    logger.debug(f"Effective config: {config.to_dict()}")
    return config
