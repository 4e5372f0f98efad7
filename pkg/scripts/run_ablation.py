#!/usr/bin/env python3
"""Ablation grid: the full eraser against five ablated variants (no
weight transform, no uncertainty maximization, no mixing matrix,
lambda=0.5, lambda=2.0), all from one shared original checkpoint."""

import argparse

from qpae import harness


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--out", default="out/ablation")
    args = parser.parse_args()

    cfg = harness.default_config("ablation", seed=args.seed, output_dir=args.out)
    ws = harness.run_scenario(cfg)
    print((ws.out / "ablation_table.md").read_text())
    print(f"artifacts in {ws.out}")


if __name__ == "__main__":
    main()
