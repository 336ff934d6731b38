"""Print the dry-vs-wet mae and msed of every preset's desk corpus."""

import argparse
import json

from tvfx.studies import DESK_NOTES, baseline_table


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--notes", type=int, default=DESK_NOTES)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--preset", action="append", help="restrict to these presets (repeatable)")
    ap.add_argument("--json", help="also write the table here")
    args = ap.parse_args()

    table = baseline_table(args.preset, notes=args.notes, seed=args.seed)
    print(f"{'preset':<14} {'mae':>7} {'msed':>7}")
    for name, row in table["presets"].items():
        print(f"{name:<14} {row['mae']:7.3f} {row['msed']:7.3f}")
    print(f"{'mean':<14} {table['mean_mae']:7.3f} {table['mean_msed']:7.3f}")
    if args.json:
        with open(args.json, "w") as f:
            json.dump(table, f, indent=2)


if __name__ == "__main__":
    main()
