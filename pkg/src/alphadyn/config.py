"""Run-configuration text format and atomic file output.

The configuration grammar is flat ``key = value`` text.  A ``#`` starts a
comment anywhere on a line; blank lines are ignored.  A ``[name]`` header
opens a section scoping the keys that follow to one subcommand; keys before
the first header are global and act as fallbacks for every section.  The
format is line-oriented and diff-friendly, and parse -> serialize -> parse
is the identity on the parsed content.

All file writers here are atomic: content goes to a temporary file in the
destination directory which is then renamed over the target, so a killed
run never leaves a truncated file behind.  CSV output is UTF-8 with "\n"
line endings and floats printed with 17 significant digits, enough to
round-trip IEEE doubles exactly.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

__all__ = [
    "ConfigError",
    "Config",
    "parse_config",
    "load_config",
    "format_float",
    "write_text",
    "write_csv",
    "write_json",
    "read_csv",
]


class ConfigError(ValueError):
    """Malformed configuration text or an invalid parameter value."""


def _valid_name(s: str) -> bool:
    return s != "" and s.replace("_", "a").replace(".", "a").isalnum()


class Config:
    """Parsed key = value configuration with subcommand sections.

    sections maps section name to an ordered key/value dict; the global
    scope is the "" entry.  Values are stored as the raw stripped strings;
    the typed getters convert on access and raise ConfigError with the
    offending key on bad input.  Duplicate keys take the last value.
    """

    def __init__(self, sections: Optional[Dict[str, Dict[str, str]]] = None):
        self.sections: Dict[str, Dict[str, str]] = {"": {}}
        if sections:
            for name, kv in sections.items():
                self.sections[name] = dict(kv)

    # -- access ------------------------------------------------------------

    def get(self, section: str, key: str, default: Optional[str] = None) -> Optional[str]:
        """Raw value of key in section, falling back to the global scope."""
        sec = self.sections.get(section)
        if sec is not None and key in sec:
            return sec[key]
        top = self.sections[""]
        if key in top:
            return top[key]
        return default

    def _typed(self, section, key, default, conv, what):
        raw = self.get(section, key)
        if raw is None:
            return default
        try:
            return conv(raw)
        except ValueError:
            raise ConfigError(f"{key} = {raw!r}: expected {what}") from None

    def get_str(self, section: str, key: str, default: Optional[str] = None) -> Optional[str]:
        return self.get(section, key, default)

    def get_float(self, section: str, key: str, default: Optional[float] = None) -> Optional[float]:
        v = self._typed(section, key, default, float, "a number")
        if v is not None and not math.isfinite(v):
            raise ConfigError(f"{key} must be finite")
        return v

    def get_int(self, section: str, key: str, default: Optional[int] = None) -> Optional[int]:
        def conv(s: str) -> int:
            f = float(s)
            i = int(f)
            if i != f:
                raise ValueError(s)
            return i

        return self._typed(section, key, default, conv, "an integer")

    def get_bool(self, section: str, key: str, default: Optional[bool] = None) -> Optional[bool]:
        def conv(s: str) -> bool:
            t = s.strip().lower()
            if t in ("true", "yes", "on", "1"):
                return True
            if t in ("false", "no", "off", "0"):
                return False
            raise ValueError(s)

        return self._typed(section, key, default, conv, "a boolean")

    def get_floats(self, section: str, key: str, default: Optional[Sequence[float]] = None) -> Optional[Tuple[float, ...]]:
        """Comma-separated list of numbers."""
        raw = self.get(section, key)
        if raw is None:
            return None if default is None else tuple(default)
        try:
            return tuple(float(p) for p in raw.split(",") if p.strip() != "")
        except ValueError:
            raise ConfigError(f"{key} = {raw!r}: expected comma-separated numbers") from None

    # -- mutation ----------------------------------------------------------

    def set(self, section: str, key: str, value) -> None:
        if not _valid_name(section) and section != "":
            raise ConfigError(f"bad section name {section!r}")
        if not _valid_name(key):
            raise ConfigError(f"bad key name {key!r}")
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            # repr is the shortest exact decimal, kinder to config readers
            # than the 17-digit CSV rendering
            text = repr(value)
        else:
            text = str(value)
        if "\n" in text or "#" in text:
            raise ConfigError(f"value for {key} cannot contain newline or '#'")
        self.sections.setdefault(section, {})[key] = text

    # -- round trip --------------------------------------------------------

    def serialize(self) -> str:
        lines: List[str] = []
        top = self.sections.get("", {})
        for k, v in top.items():
            lines.append(f"{k} = {v}")
        for name, kv in self.sections.items():
            if name == "":
                continue
            if lines:
                lines.append("")
            lines.append(f"[{name}]")
            for k, v in kv.items():
                lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n" if lines else ""

    def save(self, path: str) -> None:
        write_text(path, self.serialize())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Config):
            return NotImplemented
        a = {k: v for k, v in self.sections.items() if v}
        b = {k: v for k, v in other.sections.items() if v}
        return a == b

    def __repr__(self) -> str:
        ns = sum(1 for v in self.sections.values() if v)
        nk = sum(len(v) for v in self.sections.values())
        return f"Config({ns} scopes, {nk} keys)"


def parse_config(text: str) -> Config:
    cfg = Config()
    current = ""
    for ln, raw in enumerate(text.split("\n"), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"line {ln}: unterminated section header")
            name = line[1:-1].strip()
            if not _valid_name(name):
                raise ConfigError(f"line {ln}: bad section name {name!r}")
            current = name
            cfg.sections.setdefault(name, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        if not _valid_name(key):
            raise ConfigError(f"line {ln}: bad key name {key!r}")
        cfg.sections.setdefault(current, {})[key] = value.strip()
    return cfg


def load_config(path: str) -> Config:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


# -- output ----------------------------------------------------------------


def format_float(x: float) -> str:
    """Full-precision decimal rendering (17 significant digits)."""
    return "%.17g" % float(x)


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return format_float(v)
    return str(v)


def write_text(path: str, text: str) -> None:
    """Atomic write: temp file in the target directory, then rename."""
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(prefix=".tmp.", dir=d)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = [",".join(header)]
    width = len(header)
    for row in rows:
        if len(row) != width:
            raise ValueError(f"row width {len(row)} != header width {width}")
        lines.append(",".join(_cell(v) for v in row))
    write_text(path, "\n".join(lines) + "\n")


def write_json(path: str, obj) -> None:
    write_text(path, json.dumps(obj, indent=2, sort_keys=False) + "\n")


def read_csv(path: str) -> Tuple[List[str], List[List[str]]]:
    """Header and string-valued rows of a CSV written by write_csv.

    Kept deliberately dumb (no quoting rules): every schema in this package
    emits plain numeric and identifier cells.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip() != ""]
    if not lines:
        raise ValueError(f"{path}: empty file")
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ValueError(f"{path}: row {i + 1} width mismatch")
    return header, rows
