"""Negativity and herald probability across the router transmissivity."""

import argparse

import numpy as np

from hybrident.protocol import ExperimentConfig, sweep_router


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=21)
    ap.add_argument("--phi", type=float, default=0.0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    cfg = ExperimentConfig(phi=args.phi)
    pts = sweep_router(cfg, np.linspace(0, 1, args.points), workers=args.workers)
    print("router_t,negativity,p_herald")
    for p in pts:
        print(f"{p.router_t:.4f},{p.negativity:.6f},{p.p_herald:.6e}")


if __name__ == "__main__":
    main()
