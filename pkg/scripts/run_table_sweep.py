#!/usr/bin/env python3
"""Tune the controller across time-gap values and print the summary table.

Reproduces the resilience-vs-time-gap sweep: for each h the two-stage
search returns the tolerated drop count and the selected gains. Writes
a CSV next to the console table when --out is given.
"""

import argparse
import sys
import time

from dosplatoon import PerformanceSpec, PlatoonParams, TuningConfig, tune

H_VALUES = (0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", help="write the summary as CSV here")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args(argv)

    spec = PerformanceSpec(lambda_M=-0.367, zeta_m=0.7)
    cfg = TuningConfig()
    rows = []
    t0 = time.time()
    for h in H_VALUES:
        params = PlatoonParams(h=h, tau_d=0.1, Ts=0.05, m=10)
        report = tune(params, spec, cfg, jobs=args.jobs)
        rows.append((h, report.best_Delta, report.best_gains.kp,
                     report.best_gains.kd, report.branch,
                     report.total_seconds))
        print(f"h={h:4.2f}  Delta={report.best_Delta:2d}  "
              f"kp={report.best_gains.kp:7.4f}  kd={report.best_gains.kd:7.4f}  "
              f"branch={report.branch}  [{report.total_seconds:6.1f} s]")
    print(f"total {time.time() - t0:.1f} s")

    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("h,Delta,kp,kd,branch,seconds\n")
            for h, D, kp, kd, br, sec in rows:
                fh.write(f"{h:.9g},{D},{kp:.9g},{kd:.9g},{br},{sec:.9g}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
