"""Experiment configuration: defaults, a flat ``key = value`` file, then
command-line overrides (highest precedence)."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import InvalidInputError
from .special import RATIONAL_CAP

OUT_ENV = "SCLAB_OUT"
NUMBER_KINDS = ("float", "exact")


@dataclass
class Config:
    level: int = 6
    tol: float = 1e-10
    maxiter: int | None = None
    threads: int = 1
    rho: float | None = None
    seed: int = 20240611
    out: str | None = None
    number_kind: str = "float"
    method: str = "cg"

    def validate(self) -> "Config":
        if self.tol <= 0:
            raise InvalidInputError("tolerance must be positive")
        if not 1 <= self.level <= RATIONAL_CAP:
            raise InvalidInputError(f"level {self.level} outside the capacity table")
        if self.threads < 1:
            raise InvalidInputError("thread count must be at least 1")
        if self.number_kind not in NUMBER_KINDS:
            raise InvalidInputError(f"number kind must be one of {NUMBER_KINDS}")
        if self.method not in ("cg", "direct"):
            raise InvalidInputError("method must be 'cg' or 'direct'")
        if self.rho is not None and self.rho <= 0:
            raise InvalidInputError("rho must be positive")
        return self

    def digest(self) -> str:
        """Hash of everything that can change a report (the output path cannot)."""
        d = asdict(self)
        d.pop("out")
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def output_dir(self) -> Path | None:
        if self.out:
            return Path(self.out)
        env = os.environ.get(OUT_ENV)
        return Path(env) if env else None


def _coerce(name: str, raw: str):
    kinds = {f.name: f.type for f in fields(Config)}
    if name not in kinds:
        raise InvalidInputError(f"unknown config key {name!r}")
    if raw.lower() in ("none", ""):
        return None
    t = str(kinds[name])
    if t.startswith("int"):
        return int(raw)
    if t.startswith("float"):
        return float(raw)
    return raw


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"config line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = _coerce(key.replace("-", "_"), raw)
    return out


def load_config(path: str | os.PathLike | None = None, **overrides) -> Config:
    values = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text()))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return Config(**values).validate()
