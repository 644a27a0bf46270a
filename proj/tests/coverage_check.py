#!/usr/bin/env python3
"""Runs one module's test binary against the instrumented core and reports
branch coverage of that module's sources (exception-only branches excluded)."""

import argparse
import glob
import json
import os
import subprocess
import sys


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--module", required=True)
    ap.add_argument("--binary", required=True)
    ap.add_argument("--objdir", required=True)
    ap.add_argument("--gcov", default="gcov")
    ap.add_argument("--threshold", type=float, default=95.0)
    ap.add_argument("--out", required=True)
    ap.add_argument("sources", nargs="+")
    args = ap.parse_args()
    args.objdir = os.path.abspath(args.objdir)
    args.binary = os.path.abspath(args.binary)

    for f in glob.glob(os.path.join(args.objdir, "*.gcda")):
        os.remove(f)
    suite = subprocess.run([args.binary], stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True)
    sys.stdout.write(suite.stdout)

    total = covered = 0
    missed = []
    for src in args.sources:
        gcda = os.path.join(args.objdir, src + ".gcda")
        if not os.path.exists(gcda):
            print(f"no coverage data for {src}")
            total += 1
            continue
        out = subprocess.run([args.gcov, "-b", "--json-format", "--stdout", gcda],
                             stdout=subprocess.PIPE, stderr=subprocess.DEVNULL, text=True,
                             cwd=args.objdir, check=True).stdout
        for doc in out.splitlines():
            if not doc.strip():
                continue
            for entry in json.loads(doc)["files"]:
                if not entry["file"].endswith("/" + src) and entry["file"] != src:
                    continue
                for line in entry["lines"]:
                    for br in line["branches"]:
                        if br["throw"]:
                            continue
                        total += 1
                        if br["count"] > 0:
                            covered += 1
                        else:
                            missed.append(f"{src}:{line['line_number']}")

    percent = 100.0 * covered / total if total else 0.0
    ok = suite.returncode == 0 and percent >= args.threshold
    report = {
        "module": args.module,
        "suite_passed": suite.returncode == 0,
        "branches": total,
        "covered": covered,
        "percent": round(percent, 2),
        "threshold": args.threshold,
        "pass": ok,
        "missed": sorted(set(missed)),
    }
    with open(args.out, "w") as f:
        json.dump(report, f, indent=2)
    print(f"{args.module}: branch coverage {covered}/{total} = {percent:.1f}% "
          f"(threshold {args.threshold}%), suite {'passed' if suite.returncode == 0 else 'FAILED'}")
    if missed:
        print("uncovered branches at: " + ", ".join(sorted(set(missed))))
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
