import re


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, collected from test_acceptance.py."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" not in nodeid or getattr(rep, "when", "call") != "call" and outcome != "error":
                continue
            props = dict(getattr(rep, "user_properties", []))
            line = props.get("criterion")
            if line is None:
                m = re.search(r"test_criterion_(\d+)", nodeid)
                if not m:
                    continue
                line = (int(m.group(1)), f"criterion {m.group(1)}: FAIL ({outcome} before a result was recorded)")
            lines.append(tuple(line))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, text in sorted(set(lines)):
            terminalreporter.write_line(text)
