"""Collected warnings emitted while a stage runs.

Lines render as ``level<TAB>stage<TAB>code<TAB>message``.
"""

from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import TextIO

logger = logging.getLogger("pavideoge")


@dataclass(frozen=True)
class Diagnostic:
    level: str
    stage: str
    code: str
    message: str

    def line(self) -> str:
        msg = self.message.replace("\t", " ").replace("\n", " ")
        return f"{self.level}\t{self.stage}\t{self.code}\t{msg}"


@dataclass
class Diagnostics:
    stage: str = "-"
    entries: list[Diagnostic] = field(default_factory=list)

    def warn(self, code: str, message: str) -> None:
        self.entries.append(Diagnostic("warning", self.stage, code, message))
        logger.debug("%s: %s", code, message)

    def error(self, code: str, message: str) -> None:
        self.entries.append(Diagnostic("error", self.stage, code, message))
        logger.debug("%s: %s", code, message)

    def counts(self) -> Counter:
        return Counter(d.code for d in self.entries)

    def for_stage(self, stage: str) -> "Diagnostics":
        """Child collector that shares this one's entry list."""
        return Diagnostics(stage=stage, entries=self.entries)

    def write(self, stream: TextIO) -> None:
        for d in self.entries:
            print(d.line(), file=stream)


_CODE = re.compile(r"^([A-Z][A-Za-z]+): (.*)$", re.S)


class DiagnosticsHandler(logging.Handler):
    """Route library warnings into a collector as structured lines."""

    def __init__(self, diag: Diagnostics):
        super().__init__(logging.WARNING)
        self.diag = diag

    def emit(self, record: logging.LogRecord) -> None:
        m = _CODE.match(record.getMessage())
        code, message = m.groups() if m else ("Warning", record.getMessage())
        level = "error" if record.levelno >= logging.ERROR else "warning"
        self.diag.entries.append(Diagnostic(level, self.diag.stage, code, message))


def warn(diag: Diagnostics | None, code: str, message: str) -> None:
    if diag is None:
        logger.warning("%s: %s", code, message)
    else:
        diag.warn(code, message)
