"""Train and score the desk model on one or more effect presets.

Each task writes its run directory under ``--out/<preset>`` (rerunning resumes
from the last checkpoint) and a one-line summary is printed per task.
"""

import argparse
import json
from pathlib import Path

from tvfx.studies import DESK_NOTES, desk_task
from tvfx.train import TrainPlan


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("presets", nargs="+")
    ap.add_argument("--out", type=Path, default=Path("runs/effects"))
    ap.add_argument("--frame-size", type=int, default=4096)
    ap.add_argument("--notes", type=int, default=DESK_NOTES)
    ap.add_argument("--epochs", type=int, help="override the desk supervised epochs")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    overrides = {} if args.epochs is None else {"supervised_epochs": args.epochs}
    plan = TrainPlan.desk(seed=args.seed, **overrides)
    rows = []
    for preset in args.presets:
        res = desk_task(preset, args.frame_size, seed=args.seed, notes=args.notes, plan=plan,
                        run_dir=args.out / preset)
        rows.append(res.summary())
        print(json.dumps(rows[-1]), flush=True)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "summary.json").write_text(json.dumps(rows, indent=2))


if __name__ == "__main__":
    main()
