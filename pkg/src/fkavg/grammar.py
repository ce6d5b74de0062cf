"""Mini-grammar for field and model specs: ``kind(name=value, ...)``.

Positional values are allowed and bind to the catalog's declared parameter
order, so ``const(1)`` and ``const(c=1)`` are equivalent.  Parse errors name
the offending token.
"""

from __future__ import annotations

import re

from .errors import ConfigError

_CALL_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*\(\s*(.*?)\s*\)\s*$")
_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def parse_call(text: str) -> tuple[str, list[tuple[str | None, float]]]:
    """Split ``kind(a=1, 2.5)`` into the kind and an ordered argument list."""
    m = _CALL_RE.match(text)
    if m is None:
        raise ConfigError(f"cannot parse spec {text!r}: expected kind(arg, ...)")
    kind, body = m.group(1), m.group(2)
    args: list[tuple[str | None, float]] = []
    if body:
        for tok in body.split(","):
            tok = tok.strip()
            if not tok:
                raise ConfigError(f"empty argument in spec {text!r}")
            name: str | None = None
            val_text = tok
            if "=" in tok:
                name, val_text = (part.strip() for part in tok.split("=", 1))
                if not _NAME_RE.match(name):
                    raise ConfigError(f"bad parameter name {name!r} in spec {text!r}")
            try:
                value = float(val_text)
            except ValueError:
                raise ConfigError(f"bad numeric token {val_text!r} in spec {text!r}") from None
            args.append((name, value))
    return kind, args


def bind_params(kind: str, args: list[tuple[str | None, float]],
                param_names: tuple[str, ...], text: str) -> dict[str, float]:
    """Bind positional/named arguments to the declared parameter names.

    Positional arguments must precede named ones, as in a Python call.
    """
    params: dict[str, float] = {}
    seen_named = False
    for pos, (name, value) in enumerate(args):
        if name is None:
            if seen_named:
                raise ConfigError(f"positional value after named one in {text!r}")
            if pos >= len(param_names):
                raise ConfigError(f"too many values for {kind!r} in {text!r}")
            name = param_names[pos]
        else:
            seen_named = True
            if name not in param_names:
                raise ConfigError(
                    f"unknown parameter {name!r} for {kind!r}; expected {param_names}"
                )
        if name in params:
            raise ConfigError(f"duplicate parameter {name!r} in {text!r}")
        params[name] = value
    missing = [p for p in param_names if p not in params]
    if missing:
        raise ConfigError(f"missing parameter {missing[0]!r} for {kind!r} in {text!r}")
    return params
