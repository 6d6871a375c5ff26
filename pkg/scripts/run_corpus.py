#!/usr/bin/env python3
"""Run every corpus entailment and print a per-goal verdict table.

Exits 0 when each goal lands on its expected outcome (the cycle-guard
input is expected to stick; everything else should discharge).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from sepstrat.engine import Verdict, run
from sepstrat.frontend import (
    parse_entailments,
    parse_signature,
    parse_strategies,
    print_entailment,
    print_heap,
)

# library -> [(input file, expected to discharge)]
LIBRARIES = {
    "sll": [("sll_basic.sle", True), ("sll_cycle_guard.sle", False)],
    "array": [("array_basic.sle", True), ("array_frame.sle", True), ("array_obligations.sle", True)],
    "common": [("common_cells.sle", True)],
}

DISCHARGED = (Verdict.PURIFIED, Verdict.FRAME_INFERRED)


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--corpus", type=Path, default=Path(__file__).resolve().parent.parent / "corpus")
    ap.add_argument("--max-steps", type=int, default=1000)
    ap.add_argument("--show-final", action="store_true", help="print each final entailment")
    args = ap.parse_args(argv)

    rows = []
    for lib, inputs in LIBRARIES.items():
        sig = parse_signature((args.corpus / f"{lib}.sig").read_text(), f"{lib}.sig")
        prog = parse_strategies((args.corpus / f"{lib}.stg").read_text(), sig, f"{lib}.stg")
        for name, expect in inputs:
            ents = parse_entailments((args.corpus / name).read_text(), sig, name)
            for i, e in enumerate(ents):
                rows.append((name, i, expect, run(prog, e, args.max_steps)))

    width = max(len(name) for name, _, _, _ in rows)
    failures = 0
    for name, i, expect, tr in rows:
        extra = ""
        if tr.verdict == Verdict.FRAME_INFERRED:
            extra = f"  frame: {print_heap(tr.frame)}"
        mark = " " if (tr.verdict in DISCHARGED) == expect else "!"
        failures += mark == "!"
        print(f"{mark} {name:<{width}}  #{i}  {tr.verdict.value:<14} {len(tr.steps):>3} steps{extra}")
        if args.show_final:
            print(f"  {'':<{width}}      {print_entailment(tr.final)}")
    discharged = sum(tr.verdict in DISCHARGED for _, _, _, tr in rows)
    print(f"\n{discharged}/{len(rows)} goals discharged, {failures} unexpected outcomes")
    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
