"""Small file helpers: atomic writes and charset-aware reads."""

from __future__ import annotations

import os
import re
import tempfile
from pathlib import Path

_DECLARED_CHARSET = re.compile(rb"charset\s*=\s*[\"']?\s*([A-Za-z0-9_\-]+)", re.I)
_GBK_NAMES = {"gbk", "gb2312", "gb18030", "cp936"}


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> None:
    """Write ``data`` to a temp file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def decode_html(data: bytes) -> str:
    """Decode page bytes as UTF-8, or GBK when the markup declares it.

    Only the first 2 KiB are searched for a charset declaration.
    Raises UnicodeDecodeError when the bytes do not decode.
    """
    m = _DECLARED_CHARSET.search(data[:2048])
    if m and m.group(1).decode("ascii").lower() in _GBK_NAMES:
        # gb18030 is a superset of GBK and GB2312
        return data.decode("gb18030")
    text = data.decode("utf-8")
    return text[1:] if text.startswith("\ufeff") else text
