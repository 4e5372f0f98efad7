#!/usr/bin/env python3
"""Single-class forgetting on the desk benchmark: train the original
model, apply the four-phase eraser plus all baselines, and print the
resulting comparison table."""

import argparse

from qpae import harness


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--out", default="out/single")
    parser.add_argument("--forget", type=int, default=0, help="class to erase")
    args = parser.parse_args()

    cfg = harness.default_config("single", seed=args.seed, output_dir=args.out)
    cfg.unlearn.forget_set = [args.forget]
    ws = harness.run_scenario(cfg)
    print((ws.out / "table.md").read_text())
    print(f"artifacts in {ws.out}")


if __name__ == "__main__":
    main()
