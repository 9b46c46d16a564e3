"""Sample homodyne data from the simulated state, reconstruct it by MLE and report the fidelity."""

import argparse

from hybrident.fock import state_fidelity, truncate
from hybrident.protocol import ExperimentConfig, run_protocol
from hybrident.tomography import MLEOptions, TomographySchedule, mle_reconstruct, sample


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--dims", type=int, nargs=2, default=[3, 10])
    ap.add_argument("--max-iter", type=int, default=500)
    args = ap.parse_args()
    cfg = ExperimentConfig()
    rho = run_protocol(cfg).rho_ab
    dims = tuple(args.dims)
    rec = sample(rho, TomographySchedule(n_total=args.samples), cfg.eta_hom, seed=args.seed)
    est = mle_reconstruct(rec, dims, cfg.eta_hom, MLEOptions(max_iter=args.max_iter))
    truth = truncate(rho, dims).normalized()
    print(f"samples {len(rec)}, iterations {est.iterations}, converged {est.converged}")
    print(f"informationally complete {est.informationally_complete} (condition {est.condition:.3g})")
    print(f"log-likelihood {est.log_likelihood:.6f}")
    print(f"fidelity with truth {state_fidelity(est.rho, truth):.5f}")


if __name__ == "__main__":
    main()
