"""Run configuration, read from a JSON file.

Example::

    {
      "corpus_path": "fixtures/toy-corpus",
      "backends": {
        "architect": {"kind": "scripted", "fixtures_dir": "fixtures/toy-scripts/campaign"},
        "engineer":  {"kind": "scripted", "fixtures_dir": "fixtures/toy-scripts/campaign"},
        "fixer":     {"kind": "remote", "endpoint": "https://host/v1/chat/completions", "model": "m"}
      },
      "max_rqa_attempts": 3,
      "workers": 1,
      "run_dir": "runs",
      "adjudication": {"probes": "on"}
    }

Relative paths resolve against the config file's directory. API keys are
never read from the file; remote backends take them from the
``SPEC_ANVIL_API_KEY`` environment variable.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .agents import AgentRole
from .backends import Backend, RemoteChatBackend, ScriptedBackend


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BackendSpec:
    kind: str
    fixtures_dir: Path | None = None
    endpoint: str | None = None
    model: str | None = None
    timeout: float = 120.0

    def __post_init__(self) -> None:
        if self.kind == "scripted":
            if self.fixtures_dir is None:
                raise ConfigError("scripted backends need fixtures_dir")
        elif self.kind == "remote":
            if not self.endpoint or not self.model:
                raise ConfigError("remote backends need endpoint and model")
        else:
            raise ConfigError(f"unknown backend kind {self.kind!r}")


@dataclass(frozen=True)
class Config:
    corpus_path: Path
    backends: Mapping[AgentRole, BackendSpec]
    max_rqa_attempts: int = 3
    workers: int = 1
    run_dir: Path = Path("runs")
    probes: bool = True
    source: Path | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        missing = [r.value for r in AgentRole if r not in self.backends]
        if missing:
            raise ConfigError(f"no backend configured for {', '.join(missing)}")
        if self.max_rqa_attempts < 1:
            raise ConfigError("max_rqa_attempts must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def build_backends(self) -> dict[AgentRole, Backend]:
        built: dict[BackendSpec, Backend] = {}
        out = {}
        for role, spec in self.backends.items():
            if spec not in built:
                if spec.kind == "scripted":
                    built[spec] = ScriptedBackend(spec.fixtures_dir)
                else:
                    built[spec] = RemoteChatBackend(spec.endpoint, spec.model, timeout=spec.timeout)
            out[role] = built[spec]
        return out


_ROLE_KEYS = {r.value.lower(): r for r in AgentRole}
_TOP_KEYS = {"corpus_path", "backends", "max_rqa_attempts", "workers", "run_dir", "adjudication"}
_BACKEND_KEYS = {"kind", "fixtures_dir", "endpoint", "model", "timeout"}


def _int(doc: Mapping[str, Any], key: str, default: int) -> int:
    value = doc.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key} must be an integer")
    return value


def parse_config(doc: Any, base: Path = Path(".")) -> Config:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if not isinstance(doc.get("corpus_path"), str):
        raise ConfigError("corpus_path must be a string")
    raw_backends = doc.get("backends")
    if not isinstance(raw_backends, dict):
        raise ConfigError("backends must be an object keyed by role")
    backends = {}
    for key, entry in raw_backends.items():
        role = _ROLE_KEYS.get(key.lower())
        if role is None:
            raise ConfigError(f"unknown role {key!r}")
        if not isinstance(entry, dict):
            raise ConfigError(f"backend for {key} must be an object")
        if "api_key" in entry:
            raise ConfigError("api keys are read from the SPEC_ANVIL_API_KEY environment variable only")
        extra = set(entry) - _BACKEND_KEYS
        if extra:
            raise ConfigError(f"unknown backend keys for {key}: {sorted(extra)}")
        fixtures = entry.get("fixtures_dir")
        backends[role] = BackendSpec(
            kind=entry.get("kind", ""),
            fixtures_dir=(base / fixtures) if isinstance(fixtures, str) else None,
            endpoint=entry.get("endpoint"),
            model=entry.get("model"),
            timeout=float(entry.get("timeout", 120.0)),
        )
    adjudication = doc.get("adjudication", {})
    probes = adjudication.get("probes", "on") if isinstance(adjudication, dict) else None
    if probes not in ("on", "off"):
        raise ConfigError('adjudication.probes must be "on" or "off"')
    return Config(
        corpus_path=base / doc["corpus_path"],
        backends=backends,
        max_rqa_attempts=_int(doc, "max_rqa_attempts", 3),
        workers=_int(doc, "workers", 1),
        run_dir=base / doc.get("run_dir", "runs"),
        probes=probes == "on",
    )


def load_config(path: str | os.PathLike[str]) -> Config:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
    cfg = parse_config(doc, path.resolve().parent)
    return Config(**{**cfg.__dict__, "source": path})
