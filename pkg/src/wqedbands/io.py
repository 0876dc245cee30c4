"""Flat ``key = value`` chain configuration files and deterministic CSV/JSON output.

Example::

    # anti-Bragg / Bragg dimer
    cells = 15
    atoms_per_cell = 2
    couplings = 0.5          # comma separated, same units as gamma
    alpha0_pi = 1.5          # phases in units of pi
    beta0_pi = 3
    gamma = 1
    omega_a = 1e4
    phase_mode = markov

``eta`` with a single coupling J and ``atoms_per_cell = 4`` expands to the
tetramer couplings (J, eta*J, J).
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import math
import re

import numpy as np

from .errors import WqedError
from .model import ChainConfig, PhaseMode

_SECTION = "chain"
REQUIRED = ("cells", "atoms_per_cell")
KNOWN = ("cells", "atoms_per_cell", "couplings", "eta", "alpha0_pi", "beta0_pi",
         "gamma", "omega_a", "phase_mode")


# ChainConfig validation message prefix -> offending config key
_MESSAGE_FIELDS = (
    ("cells", "cells"), ("atoms_per_cell", "atoms_per_cell"), ("gamma", "gamma"),
    ("omega_a", "omega_a"), ("expected", "couplings"), ("(N-1)*alpha0", "beta0_pi"),
)


class ConfigError(WqedError):
    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.field = field
        self.detail = message


def _line_of(text, key):
    pat = re.compile(rf"^\s*{re.escape(key)}\s*[=:]", re.IGNORECASE)
    for k, line in enumerate(text.splitlines(), 1):
        if pat.match(line):
            return k
    return None


def parse_config_text(text: str) -> ChainConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        parser.read_string(f"[{_SECTION}]\n" + text)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError("duplicate key", line=exc.lineno - 1, field=exc.option) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] - 1 if exc.errors else None
        raise ConfigError("expected 'key = value'", line=lineno) from None
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    raw = dict(parser[_SECTION])

    for key in raw:
        if key not in KNOWN:
            raise ConfigError(f"unknown key (expected one of {', '.join(KNOWN)})", _line_of(text, key), key)
    for key in REQUIRED:
        if key not in raw:
            raise ConfigError("missing required key", field=key)

    def num(key, cast=float, default=None):
        if key not in raw:
            return default
        try:
            value = cast(raw[key]) if cast is float else cast(float(raw[key]))
        except (ValueError, OverflowError):
            raise ConfigError(f"not a number: {raw[key]!r}", _line_of(text, key), key) from None
        if cast is float and not math.isfinite(value):
            raise ConfigError("must be finite", _line_of(text, key), key)
        if cast is int and float(raw[key]) != value:
            raise ConfigError(f"must be an integer, got {raw[key]!r}", _line_of(text, key), key)
        return value

    cells = num("cells", int)
    n = num("atoms_per_cell", int)
    couplings = ()
    if raw.get("couplings", "").strip():
        try:
            couplings = tuple(float(x) for x in raw["couplings"].split(","))
        except ValueError:
            raise ConfigError(f"not a comma separated list of numbers: {raw['couplings']!r}",
                              _line_of(text, "couplings"), "couplings") from None
    eta = num("eta")
    if eta is not None:
        if n != 4 or len(couplings) != 1:
            raise ConfigError("eta requires atoms_per_cell = 4 and a single coupling J",
                              _line_of(text, "eta"), "eta")
        J = couplings[0]
        couplings = (J, eta * J, J)
    try:
        phase_mode = PhaseMode.parse(raw.get("phase_mode", "markov"))
    except ValueError as exc:
        raise ConfigError(str(exc), _line_of(text, "phase_mode"), "phase_mode") from None
    kwargs = dict(
        cells=cells, atoms_per_cell=n, couplings=couplings,
        alpha0=num("alpha0_pi", default=0.0) * math.pi,
        beta0=num("beta0_pi", default=1.0) * math.pi,
        gamma=num("gamma", default=1.0),
        omega_a=num("omega_a", default=1.0e4),
        phase_mode=phase_mode,
    )
    try:
        return ChainConfig(**kwargs)
    except ValueError as exc:
        msg = str(exc)
        field = next((f for prefix, f in _MESSAGE_FIELDS if msg.startswith(prefix)), None)
        line = _line_of(text, field) if field else None
        raise ConfigError(msg, line, field) from None


def load_config(path) -> tuple[ChainConfig, str]:
    """Parse a config file; returns the config and the raw text (for hashing)."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}") from None
    return parse_config_text(text), text


def config_to_dict(config: ChainConfig) -> dict:
    return {
        "cells": config.cells,
        "atoms_per_cell": config.atoms_per_cell,
        "couplings": list(config.couplings),
        "alpha0": config.alpha0,
        "beta0": config.beta0,
        "gamma": config.gamma,
        "omega_a": config.omega_a,
        "phase_mode": config.phase_mode.value,
    }


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def fmt(x) -> str:
    """17 significant digits: enough for an exact double round trip."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def write_csv(rows, header, stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, (int, np.integer)) and not isinstance(v, bool) else fmt(v) for v in row])


def csv_text(rows, header) -> str:
    buf = io.StringIO()
    write_csv(rows, header, buf)
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def json_text(obj) -> str:
    # insertion order is the stable key order; repr of floats round-trips exactly
    return json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n"
