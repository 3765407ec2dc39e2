"""Action files: UTF-8 JSON with reals written to 17 significant digits.

Layout::

    {"group": {"rank": 2},
     "measure": [{"word": "a", "prob": 0.25}, ...],
     "cells": [{"id": "0", "weight": 0.5}, ...],
     "transports": {"a": [{"src": "0", "dst": "1", "T": 0.5, "W": 0.5}, ...]},
     "kind": "bijective"}

Writing, reading and writing again reproduces the same bytes.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

from .action import Cell, CellAction, TransportPiece, WordTransport
from .errors import MalformedInputError
from .words import GroupWord, StepDistribution


def format_real(x: float) -> str:
    if not math.isfinite(x):
        raise MalformedInputError(f"cannot serialize non-finite value {x!r}")
    s = format(x, ".17g")
    if "e" not in s and "." not in s:
        s += ".0"
    return s


def dumps(obj: Any, indent: int = 1, _level: int = 0) -> str:
    """Deterministic JSON writer; floats use 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return format_real(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, dict) and len(v) <= 4 and not any(isinstance(x, (dict, list)) for x in v.values()) for v in obj):
            # one record per line keeps transport tables readable
            items = [pad + "{" + ", ".join(f"{json.dumps(k)}: {dumps(x)}" for k, x in v.items()) + "}" for v in obj]
        else:
            items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def action_to_dict(action: CellAction) -> dict:
    words = sorted(action.transports, key=GroupWord.sort_key)
    return {
        "group": {"rank": action.rank},
        "measure": [{"word": str(w), "prob": float(p)} for w, p in action.m.entries],
        "cells": [{"id": c.id, "weight": float(c.weight)} for c in action.cells],
        "transports": {
            str(w): [{"src": p.source, "dst": p.target, "T": float(p.source_mass), "W": float(p.image_mass)}
                     for p in action.transports[w].pieces]
            for w in words
        },
        "kind": action.kind,
    }


def action_from_dict(data: dict) -> CellAction:
    try:
        rank = int(data["group"]["rank"])
        m = StepDistribution.from_pairs([(e["word"], float(e["prob"])) for e in data["measure"]], rank)
        cells = [Cell(str(c["id"]), float(c["weight"])) for c in data["cells"]]
        transports = {}
        for key, pieces in data["transports"].items():
            w = GroupWord.parse(key, rank)
            if w in transports:
                raise MalformedInputError(f"word {w} appears twice in transports")
            transports[w] = WordTransport(w, tuple(
                TransportPiece(str(p["src"]), str(p["dst"]), float(p["T"]), float(p["W"])) for p in pieces))
        kind = data.get("kind", "markov")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, MalformedInputError):
            raise
        raise MalformedInputError(f"malformed action file: {exc!r}") from exc
    ergodic = None
    if kind == "bijective":
        from .models import _orbits_from_transports
        ergodic = len(_orbits_from_transports(cells, transports)) == 1
    return CellAction(cells, m, transports, kind, ergodic=ergodic)


def write_action(action: CellAction, path: str | Path) -> None:
    Path(path).write_text(dumps(action_to_dict(action)) + "\n", encoding="utf-8")


def read_action(path: str | Path) -> CellAction:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedInputError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInputError(f"{path} is not valid JSON: {exc}") from exc
    return action_from_dict(data)
