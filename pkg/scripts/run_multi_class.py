#!/usr/bin/env python3
"""Parallel multi-class forgetting (classes 0 and 4 by default)."""

import argparse

from qpae import harness


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--out", default="out/multi")
    parser.add_argument("--forget", default="0,4",
                        help="comma-separated classes to erase together")
    args = parser.parse_args()

    cfg = harness.default_config("multi", seed=args.seed, output_dir=args.out)
    cfg.unlearn.forget_set = [int(c) for c in args.forget.split(",")]
    ws = harness.run_scenario(cfg)
    print((ws.out / "table.md").read_text())
    print(f"artifacts in {ws.out}")


if __name__ == "__main__":
    main()
