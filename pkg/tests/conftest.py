"""Shared pytest wiring.

The acceptance suite registers one line per numbered gate; reprinting
them after the test table gives a single checklist regardless of how
output capture is configured.
"""

_gate_lines: list[str] = []


def record_gate(line: str) -> None:
    _gate_lines.append(line)


def pytest_terminal_summary(terminalreporter):
    if _gate_lines:
        terminalreporter.section("acceptance gates")
        for line in _gate_lines:
            terminalreporter.write_line(line)
