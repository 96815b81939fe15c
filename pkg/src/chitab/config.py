"""Run configuration: ``key = value`` file, flag overrides, defaults."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .complexity import FilterConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    structure_dir: str | None = None
    words_dir: str | None = None
    images_dir: str | None = None
    split_list: list[str] = field(default_factory=list)
    out: str | None = None
    threshold: float = 0.90
    min_covered_columns: int = 2
    eps: float = 0.5
    seed: int = 0
    workers: int = 1
    strict: bool = False

    def filter_config(self) -> FilterConfig:
        return FilterConfig(self.threshold, self.min_covered_columns, self.eps)

    def validate(self, need_input: bool = True) -> None:
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        for name in ("structure_dir", "words_dir", "images_dir"):
            v = getattr(self, name)
            if v is not None and not Path(v).exists():
                raise ConfigError(f"{name} {v} does not exist")
        for spec in self.split_list:
            p = spec.split("=", 1)[-1]
            if not Path(p).exists():
                raise ConfigError(f"split list {p} does not exist")
        if need_input and self.structure_dir is None:
            raise ConfigError("--structure-dir is required")
        try:
            self.filter_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def _coerce(name: str, raw: str, path, lineno: int):
    kind = {f.name: f.type for f in fields(RunConfig)}[name]
    try:
        if kind == "bool":
            return _BOOL[raw.lower()]
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind.startswith("list"):
            return [s.strip() for s in raw.split(",") if s.strip()]
        return raw
    except (KeyError, ValueError):
        raise ConfigError(f"{path}:{lineno}: bad value for {name}: {raw!r}") from None


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, dashes in keys are allowed."""
    known = {f.name for f in fields(RunConfig)}
    values = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, raw = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in known:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _coerce(key, raw, path, lineno)
    return values


def resolve(flags: dict, config_path=None) -> RunConfig:
    """Flag beats config file beats default; ``None`` flags count as unset."""
    values = read_config_file(config_path) if config_path else {}
    for k, v in flags.items():
        if v is not None and v != [] and k in RunConfig.__dataclass_fields__:
            values[k] = v
    return RunConfig(**values)
