"""Shipped families, weights and domains, each tagged with the claim it exercises.

Every entry's ``params`` is a valid config for the CLI subcommand named in
``command``; a config file may say ``{"catalog": "<name>", ...}`` to start
from an entry and override some keys.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

__all__ = ["Entry", "CatalogError", "entries", "get", "show"]


class CatalogError(KeyError):
    pass


@dataclass(frozen=True)
class Entry:
    name: str
    title: str
    command: str
    claim: str
    tags: tuple = ()
    params: dict = field(default_factory=dict)


@lru_cache(maxsize=None)
def _load() -> dict:
    out = {}
    for f in sorted(resources.files(__package__).joinpath("entries").iterdir(),
                    key=lambda p: p.name):
        if not f.name.endswith(".json"):
            continue
        d = json.loads(f.read_text())
        d["tags"] = tuple(d.get("tags", ()))
        out[d["name"]] = Entry(**d)
    return out


def entries() -> list:
    return list(_load().values())


def get(name: str) -> Entry:
    try:
        return _load()[name]
    except KeyError:
        raise CatalogError(f"unknown catalog entry {name!r}") from None


def show(name: str) -> str:
    e = get(name)
    lines = [
        f"name:    {e.name}",
        f"title:   {e.title}",
        f"command: {e.command}",
        f"claim:   {e.claim}",
        f"tags:    {', '.join(e.tags)}",
        "params:",
    ]
    for k, v in e.params.items():
        lines.append(f"  {k}: {json.dumps(v)}")
    return "\n".join(lines)
