"""Collects one pass/fail line per acceptance criterion for the run summary."""

from __future__ import annotations

import contextlib
import time

LINES: list[str] = []


@contextlib.contextmanager
def criterion(number: int, title: str):
    """Record ``CRITERION n: PASS|FAIL title (details)`` for the enclosed checks.

    The body may append free-form notes to the yielded list; they are joined
    into the detail part of the line.  Any exception marks the criterion as
    failed and is re-raised so pytest reports it too.
    """
    notes: list[str] = []
    t0 = time.perf_counter()
    try:
        yield notes
    except BaseException as exc:
        _record(number, False, title, notes + [f"{type(exc).__name__}: {exc}".strip()], t0)
        raise
    _record(number, True, title, notes, t0)


def _record(number: int, ok: bool, title: str, notes: list[str], t0: float) -> None:
    elapsed = time.perf_counter() - t0
    detail = "; ".join(n.splitlines()[0] if n else n for n in notes)
    line = (f"CRITERION {number}: {'PASS' if ok else 'FAIL'} {title} "
            f"[{elapsed:.1f}s]" + (f" -- {detail}" if detail else ""))
    LINES.append(line)
    print(line)
