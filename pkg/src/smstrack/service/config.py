"""Server configuration: flat ``key = value`` file with environment
overrides (SMSTRACK_<KEY>, dots replaced by underscores)."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from ..errors import ConfigError

ENV_PREFIX = "SMSTRACK_"

TRANSPORT_KINDS = ("none", "loopback", "http")


@dataclass
class ServerConfig:
    listen_host: str = "127.0.0.1"
    listen_port: int = 8000
    token_file: Optional[str] = None
    store_path: str = "./data"
    timezone: str = "UTC"
    transport: str = "none"
    transport_url: Optional[str] = None     # http transport
    scenario: Optional[str] = None          # loopback transport
    clock_acceleration: float = 60.0        # loopback transport
    response_timeout_s: float = 180.0
    tick_interval_s: float = 0.5
    console_dir: Optional[str] = None

    def validate(self) -> None:
        if self.transport not in TRANSPORT_KINDS:
            raise ConfigError("transport",
                              f"must be one of {', '.join(TRANSPORT_KINDS)}")
        if self.transport == "http" and not self.transport_url:
            raise ConfigError("transport_url", "required for the http transport")
        if self.transport == "loopback" and not self.scenario:
            raise ConfigError("scenario", "required for the loopback transport")
        if self.listen_port <= 0 or self.listen_port > 65535:
            raise ConfigError("listen_port", "must be 1-65535")
        if self.clock_acceleration < 1:
            raise ConfigError("clock_acceleration", "must be >= 1")


_INT_KEYS = {"listen_port"}
_FLOAT_KEYS = {"clock_acceleration", "response_timeout_s", "tick_interval_s"}


def _coerce(key: str, value: str):
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except ValueError:
        raise ConfigError(key, f"invalid number {value!r}") from None
    return value


def load_config(path: Optional[str] = None, env: Optional[dict] = None) -> ServerConfig:
    env = env if env is not None else os.environ
    values: dict = {}
    known = {f.name for f in fields(ServerConfig)}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        for lineno, line in enumerate(text.splitlines(), 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}", "expected key = value")
            key, _, raw = stripped.partition("=")
            key = key.strip().replace(".", "_")
            if key not in known:
                raise ConfigError(f"{path}:{lineno}", f"unknown key {key!r}")
            values[key] = _coerce(key, raw.strip())
    for key in known:
        env_key = ENV_PREFIX + key.upper()
        if env_key in env:
            values[key] = _coerce(key, env[env_key])
    config = ServerConfig(**values)
    config.validate()
    return config
