"""Collects one result line per acceptance criterion for the terminal summary."""

RESULTS = {}


def record(number, status, detail):
    line = f"criterion {number:>2}: {status:<7} {detail}"
    RESULTS[number] = line
    print(line)
    return line
