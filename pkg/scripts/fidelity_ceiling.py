"""Best achievable fidelity with a hybrid target, optimized over alpha and weights."""

import argparse

from hybrident.analysis import max_target_fidelity, report_metrics
from hybrident.protocol import ExperimentConfig, run_protocol
from hybrident.states import HybridTargetSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lossy", action="store_true", help="use the default efficiencies instead of the lossless setup")
    args = ap.parse_args()
    cfg = ExperimentConfig() if args.lossy else ExperimentConfig.lossless()
    rho = run_protocol(cfg).rho_ab
    alpha, f = max_target_fidelity(rho)
    print(f"F_max = {f:.5f} at alpha = {alpha:.4f}")
    for a in (0.6, 0.8, 0.9, 1.0):
        print(f"  equal-weight target alpha={a:.1f}: F = {report_metrics(rho, HybridTargetSpec(a)).fidelity:.5f}")


if __name__ == "__main__":
    main()
