"""One PASS/FAIL line per acceptance criterion, printed at the end of the run."""

LINES: dict[int, str] = {}


def verdict(n: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d}: {title} | {detail}"
    LINES[n] = line
    print(line)
    assert ok, line
