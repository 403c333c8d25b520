"""What a violated property looks like.

Runs the producer/consumer pipeline, saves the trace, then tampers with
one line: a value delivered by Move is changed on its way into the
summer's queue.  Move conservation and the receive_input frame check both
notice, and each prints the offending world with the nearby trace lines.

    python demos/counterexample.py
"""

import json
import tempfile
from pathlib import Path

from aadl_rts.checker import builtin_suite, check_suite
from aadl_rts.cli import main as cli
from aadl_rts.temporal import Trace


def main():
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "pipeline.jsonl"
        cli(["run", "--model", "gallery:pipeline", "--scenario", "gallery:pipeline",
             "--horizon-ns", "200000000", "--seed", "3", "--trace", str(path)])
        lines = path.read_text().splitlines()

    # find the first delivery into summer.inp and change the value it carries
    for i, line in enumerate(lines):
        rec = json.loads(line)
        if rec.get("var") == "IPS:summer:inp" and rec["val"]:
            rec["val"][-1]["v"] += 1
            lines[i] = json.dumps(rec, sort_keys=True, separators=(",", ":"))
            print(f"tampered with line {i + 1}: {lines[i]}")
            break

    report = check_suite(Trace.from_lines(lines), builtin_suite("all"))
    print()
    print(report.format_text())


if __name__ == "__main__":
    main()
