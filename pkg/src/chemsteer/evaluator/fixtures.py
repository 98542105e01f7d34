"""JSON-lines fixture store shared by recording and replay."""

from __future__ import annotations

import json
import os
import tempfile
import threading
from pathlib import Path

from .base import Evaluation


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class FixtureFormatError(ValueError):
    pass


class FixtureStore:
    """Records ``{key, score, rationale, raw, model}`` keyed by prompt key.

    Writes are buffered until :meth:`flush`, which rewrites the whole file
    atomically with records sorted by key.
    """

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = Path(path) if path is not None else None
        self._records: dict[str, dict] = {}
        self._lock = threading.Lock()
        self._dirty = False
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    key = rec["key"]
                    Evaluation(rec["score"], rec.get("rationale", ""), rec.get("raw"))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise FixtureFormatError(f"{self.path}:{lineno}: bad fixture record ({exc})") from None
                self._records[key] = rec

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, key: str) -> bool:
        return key in self._records

    def keys(self) -> list[str]:
        return sorted(self._records)

    def record(self, key: str) -> dict | None:
        return self._records.get(key)

    def get(self, key: str) -> Evaluation | None:
        rec = self._records.get(key)
        if rec is None:
            return None
        return Evaluation(rec["score"], rec.get("rationale", ""), rec.get("raw"))

    def put(self, key: str, evaluation: Evaluation, model: str = "") -> None:
        rec = {
            "key": key,
            "score": evaluation.score,
            "rationale": evaluation.rationale,
            "raw": evaluation.raw,
        }
        if model:
            rec["model"] = model
        with self._lock:
            self._records[key] = rec
            self._dirty = True

    def dumps(self) -> str:
        return "".join(
            json.dumps(self._records[k], sort_keys=True, ensure_ascii=False) + "\n" for k in sorted(self._records)
        )

    def flush(self) -> None:
        if self.path is None:
            return
        with self._lock:
            if not self._dirty and self.path.exists():
                return
            atomic_write_text(self.path, self.dumps())
            self._dirty = False

    def __enter__(self) -> "FixtureStore":
        return self

    def __exit__(self, *exc) -> None:
        self.flush()
