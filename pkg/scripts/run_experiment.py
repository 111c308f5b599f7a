"""Run one or more scenario configs and write their results next to them.

    python scripts/run_experiment.py scripts/configs/*.cfg --outdir results
"""

import argparse
import sys
import time
from pathlib import Path

from fracbump.config import parse_scenario
from fracbump.experiments import run_scenario, write_result


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("configs", nargs="+", type=Path)
    ap.add_argument("--outdir", type=Path, default=Path("results"))
    ap.add_argument("--format", choices=("json", "csv"), default="json")
    args = ap.parse_args(argv)
    args.outdir.mkdir(parents=True, exist_ok=True)

    failed = 0
    for path in args.configs:
        s = parse_scenario(path)
        start = time.perf_counter()
        result = run_scenario(s)
        out = args.outdir / f"{path.stem}.{args.format}"
        write_result(result, out, args.format)
        status = "ok" if result.passed else "FAILED"
        print(f"{path.name:28s} {s.kind:18s} {status:6s} {time.perf_counter() - start:6.1f}s  -> {out}")
        for name, ok in sorted(result.checks.items()):
            if not ok:
                print(f"    check {name} failed")
        failed += not result.passed
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
