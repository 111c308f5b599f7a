"""Tiny parser for the ``name(key=value, ...)`` strings used in config files.

Arguments are either ``key=value`` pairs or nested specs (``product(power(a=1),
const(c=2))``).  Numeric values become floats, everything else stays a string.
"""

from __future__ import annotations

from dataclasses import dataclass, field

__all__ = ["Spec", "parse_spec", "format_value"]


@dataclass(frozen=True)
class Spec:
    name: str
    kwargs: dict = field(default_factory=dict)
    args: tuple = ()

    def take(self, allowed, required=()):
        """Return kwargs after checking names against ``allowed``."""
        unknown = set(self.kwargs) - set(allowed)
        if unknown:
            raise ValueError(f"{self.name}: unknown parameter(s) {sorted(unknown)}")
        missing = [k for k in required if k not in self.kwargs]
        if missing:
            raise ValueError(f"{self.name}: missing parameter(s) {missing}")
        return dict(self.kwargs)


def _split_top(text: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise ValueError(f"unbalanced parentheses in {text!r}")
        if ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    if depth:
        raise ValueError(f"unbalanced parentheses in {text!r}")
    tail = "".join(cur).strip()
    if tail:
        parts.append(tail)
    return parts


def _coerce(text: str):
    try:
        return float(text)
    except ValueError:
        return text.strip().strip("\"'")


def parse_spec(text: str) -> Spec:
    text = text.strip().strip("\"'").strip()
    if not text:
        raise ValueError("empty spec")
    if "(" not in text:
        if not text.replace("_", "").isalnum():
            raise ValueError(f"malformed spec {text!r}")
        return Spec(text.lower())
    if not text.endswith(")"):
        raise ValueError(f"malformed spec {text!r}")
    name, body = text.split("(", 1)
    name = name.strip().lower()
    if not name:
        raise ValueError(f"malformed spec {text!r}")
    kwargs, args = {}, []
    for part in _split_top(body[:-1]):
        head = part.split("(", 1)[0]
        if "=" in head:
            key, value = part.split("=", 1)
            key = key.strip()
            if key in kwargs:
                raise ValueError(f"{name}: duplicate parameter {key!r}")
            kwargs[key] = _coerce(value)
        else:
            args.append(parse_spec(part))
    return Spec(name, kwargs, tuple(args))


def format_value(v) -> str:
    if isinstance(v, float):
        return repr(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
    return str(v)
