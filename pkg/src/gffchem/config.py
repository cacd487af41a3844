"""Run configuration: a flat JSON object whose keys follow the model's symbols."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class RunConfig:
    d: int = 3
    N: list = field(default_factory=lambda: [16])
    kappa: float = 1.5
    window_factor: float = 1.0
    law: str = "gff"
    L: int = 8
    K: int = 4
    h: float = 0.0
    h1: float = 0.1
    h2: float = 0.2
    eps: float = 0.1
    delta: float | None = None
    h_star: float | None = None
    alpha: int = 2
    C: float | None = None
    C1: float = 21.0
    calibrate_C1: bool = False
    F_reading: str = "boundary"
    n: int = 100
    seed: int = 0
    workers: int = 1
    tol: float = 1e-4
    event: str = "stretch"
    R: int = 8
    output: str | None = None
    field_output: str | None = None

    def validate(self) -> "RunConfig":
        if not isinstance(self.d, int) or self.d < 3:
            raise ConfigError("d", f"must be an integer >= 3, got {self.d!r}")
        if not self.N or any((not isinstance(v, int)) or v < 1 for v in self.N):
            raise ConfigError("N", f"must be a non-empty list of positive integers, got {self.N!r}")
        if self.kappa < 1:
            raise ConfigError("kappa", f"must be >= 1, got {self.kappa}")
        if self.law not in ("gff", "dirichlet"):
            raise ConfigError("law", f"must be 'gff' or 'dirichlet', got {self.law!r}")
        if self.L < 1:
            raise ConfigError("L", f"must be >= 1, got {self.L}")
        if self.K < 4:
            raise ConfigError("K", f"must be >= 4, got {self.K}")
        if self.h1 > self.h2:
            raise ConfigError("h1", f"must not exceed h2 ({self.h1} > {self.h2})")
        if not self.eps > 0:
            raise ConfigError("eps", f"must be positive, got {self.eps}")
        if self.n < 1:
            raise ConfigError("n", f"must be >= 1, got {self.n}")
        if self.workers < 1:
            raise ConfigError("workers", f"must be >= 1, got {self.workers}")
        if self.alpha < 1:
            raise ConfigError("alpha", f"must be >= 1, got {self.alpha}")
        if self.F_reading not in ("boundary", "literal"):
            raise ConfigError("F_reading", f"must be 'boundary' or 'literal', got {self.F_reading!r}")
        for k in ("h", "h1", "h2", "eps", "kappa", "tol"):
            if not math.isfinite(getattr(self, k)):
                raise ConfigError(k, "must be finite")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        kw = {}
        for k, v in data.items():
            if k not in known:
                raise ConfigError(k, "unknown key")
            kw[k] = v
        if isinstance(kw.get("N"), int):
            kw["N"] = [kw["N"]]
        try:
            cfg = cls(**kw)
        except TypeError as exc:
            raise ConfigError("?", str(exc)) from None
        for k in ("d", "L", "K", "n", "seed", "workers", "alpha", "R"):
            v = getattr(cfg, k)
            if isinstance(v, float) and v.is_integer():
                setattr(cfg, k, int(v))
            elif not isinstance(v, int) or isinstance(v, bool):
                raise ConfigError(k, f"must be an integer, got {v!r}")
        for k in ("kappa", "window_factor", "h", "h1", "h2", "eps", "C1", "tol"):
            v = getattr(cfg, k)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(k, f"must be a number, got {v!r}")
            setattr(cfg, k, float(v))
        return cfg.validate()

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"not valid JSON ({exc})") from None
        if isinstance(data, dict) and "meta" in data and "config" in data.get("meta", {}):
            data = data["meta"]["config"]
        if not isinstance(data, dict):
            raise ConfigError("<file>", "top level must be an object")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_json(Path(path).read_text())
