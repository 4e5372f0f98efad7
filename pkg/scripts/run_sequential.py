#!/usr/bin/env python3
"""Sequential forgetting: one right-to-be-forgotten request at a time,
re-running the eraser after each and scoring the union of everything
forgotten so far."""

import argparse

from qpae import harness


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--out", default="out/sequential")
    parser.add_argument("--requests", default="0;1;2",
                        help="semicolon-separated requests, each a comma list")
    args = parser.parse_args()

    requests = [[int(c) for c in req.split(",")]
                for req in args.requests.split(";")]
    cfg = harness.default_config("sequential", seed=args.seed,
                                 output_dir=args.out,
                                 sequential_requests=requests)
    ws = harness.run_scenario(cfg)
    print((ws.out / "sequential_table.md").read_text())
    print(f"artifacts in {ws.out}")


if __name__ == "__main__":
    main()
