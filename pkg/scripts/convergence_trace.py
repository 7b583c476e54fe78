"""Objective value per iteration for several lambda values (one CSV column each).

    python scripts/convergence_trace.py --lams 0 0.1 0.5 --learner global --out trace.csv
"""
import argparse
import csv
import sys

from lrtface.dataio import SyntheticSpec, synthesize_domain_shift
from lrtface.lrt import LearnConfig, learn_class_transforms, learn_global_transform


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lams", type=float, nargs="+", default=[0.0, 0.1, 0.5])
    ap.add_argument("--learner", choices=["global", "class"], default="global")
    ap.add_argument("--iterations", type=int, default=100)
    ap.add_argument("--step", type=float, default=0.05)
    ap.add_argument("--backtracking", action="store_true")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out")
    args = ap.parse_args(argv)

    train, _ = synthesize_domain_shift(SyntheticSpec(seed=args.seed))
    columns = {}
    for lam in args.lams:
        cfg = LearnConfig(lam=lam, iterations=args.iterations, step=args.step,
                          backtracking=args.backtracking, seed=args.seed)
        if args.learner == "global":
            _, trace = learn_global_transform(train, cfg)
            columns[f"lam={lam}"] = trace.objective_values
            ups = trace.increases()
        else:
            # class objectives are summed over classes
            _, traces = learn_class_transforms(train, cfg)
            columns[f"lam={lam}"] = [sum(v) for v in zip(*(t.objective_values for t in traces))]
            ups = sum(t.increases() for t in traces)
        values = columns[f"lam={lam}"]
        print(f"lam={lam}: {values[0]:.6g} -> {values[-1]:.6g}, {ups} increasing steps",
              file=sys.stderr)

    out = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["iteration", *columns])
    for t in range(args.iterations + 1):
        w.writerow([t, *(repr(float(v[t])) for v in columns.values())])
    if args.out:
        out.close()


if __name__ == "__main__":
    main()
