"""Compare input frame sizes on one preset, scaling the context to cover a 2 Hz period."""

import argparse
import json
from pathlib import Path

from tvfx.studies import CONTEXT_FOR_FRAME, DESK_NOTES, desk_task
from tvfx.train import TrainPlan


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--preset", default="tremolo")
    ap.add_argument("--frame-sizes", type=int, nargs="+", default=[1024, 4096],
                    choices=sorted(CONTEXT_FOR_FRAME))
    ap.add_argument("--out", type=Path, default=Path("runs/frame_size"))
    ap.add_argument("--notes", type=int, default=DESK_NOTES)
    ap.add_argument("--epochs", type=int, help="override the desk supervised epochs")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    overrides = {} if args.epochs is None else {"supervised_epochs": args.epochs}
    plan = TrainPlan.desk(seed=args.seed, **overrides)
    rows = []
    for n in args.frame_sizes:
        res = desk_task(args.preset, n, seed=args.seed, notes=args.notes, plan=plan,
                        run_dir=args.out / f"{args.preset}_N{n}")
        rows.append(res.summary())
        print(f"N={n:5d} k={res.context:2d}  test mae {res.test_mae:.4f}  msed {res.test_msed:.4f}  "
              f"({res.seconds / 60:.1f} min)", flush=True)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "summary.json").write_text(json.dumps(rows, indent=2))


if __name__ == "__main__":
    main()
