#!/usr/bin/env python3
"""Run named experiments (default: all of them) and print their gated checks.

    python3 scripts/run_experiments.py --out runs radial_solve p_sweep
    python3 scripts/run_experiments.py --config scripts/configs/dumbbell.json
"""

import argparse
import json
import sys
from pathlib import Path

from infobstacle.experiments import EXPERIMENT_FUNCS, ExperimentConfig, run_experiment


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("names", nargs="*", help=f"any of {', '.join(EXPERIMENT_FUNCS)}")
    ap.add_argument("--config", type=Path, help="JSON config applied to every experiment")
    ap.add_argument("--out", type=Path, default=Path("runs"))
    args = ap.parse_args(argv)
    base = json.loads(args.config.read_text()) if args.config else {}
    names = args.names or ([base["experiment"]] if "experiment" in base else list(EXPERIMENT_FUNCS))
    ok = True
    for name in names:
        cfg = ExperimentConfig.from_dict({**base, "experiment": name, "out": str(args.out / name)})
        m = run_experiment(cfg)
        for c in m["checks"]:
            print(f"{'PASS' if c['passed'] else 'FAIL'}  {name}: {c['name']} = {c['value']:.6g} "
                  f"(threshold {c['threshold']:.6g})")
        print(f"-- {name}: {m['status']} ({m['wall_time_s']:.1f}s)")
        ok &= m["status"] == "pass"
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
