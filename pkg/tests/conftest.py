from __future__ import annotations

import pytest

# criterion number -> list of (label, passed, detail)
ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}

TITLES = {
    1: "convergence slopes, example1",
    2: "convergence slopes, example2",
    3: "Monte Carlo baseline slope",
    4: "unbiasedness",
    5: "order-d Owen lemma",
    6: "gain-coefficient bound",
    7: "net structure",
    8: "interlacing exactness",
    9: "Walsh analysis",
    10: "finite differences",
    11: "sigma-bound soft check",
}


@pytest.fixture
def record():
    def _record(criterion: int, label: str, passed: bool, detail: str = "") -> bool:
        ACCEPTANCE.setdefault(criterion, []).append((label, bool(passed), detail))
        return bool(passed)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for c in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[c]
        ok = all(p for _, p, _ in checks)
        # failures only, unless the criterion has few checks
        shown = checks if len(checks) <= 3 else [c for c in checks if not c[1]]
        details = "; ".join(f"{lab}: {det}" if det else lab for lab, _, det in shown)
        n_ok = sum(p for _, p, _ in checks)
        line = f"criterion {c:2d} {'PASS' if ok else 'FAIL'}  {TITLES.get(c, '')} ({n_ok}/{len(checks)} checks)"
        tr.write_line(line + (f"  [{details}]" if details else ""))
