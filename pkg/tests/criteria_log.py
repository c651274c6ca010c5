"""Records one outcome per acceptance criterion for the end-of-run summary."""

import functools
import time

RESULTS = {}


def criterion(number: int, title: str, budget_s: float):
    """Time the wrapped test, enforce its runtime budget and record the outcome."""

    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            try:
                fn(*args, **kwargs)
            except BaseException as exc:
                RESULTS[number] = (title, False, time.perf_counter() - t0, budget_s,
                                   f"{type(exc).__name__}: {exc}".splitlines()[0][:160])
                raise
            elapsed = time.perf_counter() - t0
            ok = elapsed < budget_s
            note = "" if ok else f"runtime {elapsed:.1f}s exceeds {budget_s:.0f}s"
            RESULTS[number] = (title, ok, elapsed, budget_s, note)
            assert ok, note

        return run

    return wrap


def summary_lines():
    lines = []
    for n in sorted(RESULTS):
        title, ok, elapsed, budget, note = RESULTS[n]
        status = "PASS" if ok else "FAIL"
        line = f"criterion {n:2d} {status}  {title}  ({elapsed:.2f}s of {budget:.0f}s)"
        if note:
            line += f"  [{note}]"
        lines.append(line)
    return lines
