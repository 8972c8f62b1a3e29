"""Run every verification suite and write the reports to a directory."""
import argparse
import sys
from pathlib import Path

from twoweight.suites import SUITES, SuiteConfig, run_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--out", default="reports")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ok = True
    for name in SUITES:
        rep = run_suite(name, args.seed, cfg=SuiteConfig(n_instances=args.n, reproducer_dir=str(out)))
        (out / f"{name}.json").write_text(rep.to_json() + "\n")
        print(f"{name:16s} {'PASS' if rep.passed else 'FAIL'}  {rep.wall_time:6.1f} s  {rep.hash[:12]}")
        ok &= rep.passed
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
