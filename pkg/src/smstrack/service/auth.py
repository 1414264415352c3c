"""Static bearer-token auth: a token file with one ``<token> <role>`` per
line, roles ``admin`` (mutations allowed) and ``viewer`` (read only)."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

ROLES = ("admin", "viewer")


class TokenAuth:
    def __init__(self, tokens: dict[str, str]):
        for role in tokens.values():
            if role not in ROLES:
                raise ValueError(f"unknown role {role!r}")
        self._tokens = dict(tokens)

    @classmethod
    def from_file(cls, path: str) -> "TokenAuth":
        tokens = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"token file line must be '<token> <role>': {line!r}")
            tokens[parts[0]] = parts[1]
        return cls(tokens)

    @classmethod
    def open_access(cls) -> "TokenAuth":
        """No token file configured: everything is admin (trusted LAN mode)."""
        auth = cls({})
        auth._open = True
        return auth

    def role_for(self, token: Optional[str]) -> Optional[str]:
        if getattr(self, "_open", False):
            return "admin"
        if token is None:
            return None
        return self._tokens.get(token)
