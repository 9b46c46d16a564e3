"""Negativity and W0 of the default setup as the pair-source gain lambda varies."""

import argparse

from hybrident.cli import lambda_sensitivity
from hybrident.protocol import ExperimentConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lams", type=float, nargs="+", default=[0.02, 0.05, 0.1, 0.15, 0.2])
    args = ap.parse_args()
    print(f"{'lambda':>7} {'router_t':>9} {'N_corr':>8} {'N_uncorr':>9} {'W0_uncorr':>10}")
    for row in lambda_sensitivity(ExperimentConfig(), tuple(args.lams)):
        print(f"{row['lam']:7.3f} {row['router_t']:9.5f} {row['N_corr']:8.4f} {row['N_uncorr']:9.4f} {row['W0_uncorr']:10.4f}")


if __name__ == "__main__":
    main()
