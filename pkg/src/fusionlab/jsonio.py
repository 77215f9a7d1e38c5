"""JSON helpers with deterministic 17-significant-digit float output.

The stock ``json`` encoder prints floats with ``repr`` (shortest
round-trip form). File formats here pin floats to 17 significant digits
so that serialize -> parse -> serialize is byte-identical; this module
owns that convention for every JSON and CSV artifact.
"""

from __future__ import annotations

import json
from decimal import Decimal
from fractions import Fraction
from pathlib import Path


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    close = " " * (indent * level)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return fmt_float(obj)
    if isinstance(obj, Fraction):
        return fmt_float(float(obj))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}"
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + close + "}"
    if isinstance(obj, (list, tuple)):
        if not len(obj):
            return "[]"
        items = [f"{pad}{_encode(v, indent, level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + close + "]"
    if hasattr(obj, "tolist"):  # numpy scalars/arrays
        return _encode(obj.tolist(), indent, level)
    raise TypeError(f"cannot serialize {type(obj)!r}")


def dumps(obj, indent: int = 2) -> str:
    return _encode(obj, indent, 0) + "\n"


def dump_path(obj, path: str | Path, indent: int = 2) -> None:
    Path(path).write_text(dumps(obj, indent), encoding="utf-8")


def loads(text: str, exact: bool = False):
    """Parse JSON; with ``exact=True`` floats become ``Fraction`` values
    taken from the printed decimal strings."""
    if exact:
        return json.loads(text, parse_float=lambda s: Fraction(Decimal(s)))
    return json.loads(text)


def load_path(path: str | Path, exact: bool = False):
    return loads(Path(path).read_text(encoding="utf-8"), exact=exact)
