"""Held-out-template tuning of the prior weights on the synthetic dataset.

First sweeps lambda2 over 0..2 (step 0.1) at a fixed lambda1, then sweeps
lambda1 at the chosen lambda2. The printed pair is what the acceptance suite
freezes as its tuned weights.
"""
import argparse

from tomoprior.harness import ExperimentConfig, TuningSweep, tune_lambda_on_data
from tomoprior.phantoms import slice_dataset


def show(name, best, table):
    print(f"{name},relative_mse")
    for v, e in table:
        print(f"{v!r},{e!r}" + ("  <- best" if v == best else ""))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--held-out", type=int, default=2)
    ap.add_argument("--angles", type=int, default=12)
    ap.add_argument("--lambda1", type=float, default=0.02, help="lambda1 during the lambda2 sweep")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ds = slice_dataset(args.size, 6)
    base = ExperimentConfig(method="cs-pca", angles=args.angles, seed=args.seed,
                            lambdas=(args.lambda1, 0.0, 0.0))
    grid2 = tuple(round(0.1 * i, 10) for i in range(21))
    best2, table2 = tune_lambda_on_data(TuningSweep("lambda2", grid2, args.held_out), base,
                                        ds.templates)
    show("lambda2", best2, table2)

    base = ExperimentConfig(method="cs-pca", angles=args.angles, seed=args.seed,
                            lambdas=(args.lambda1, best2, 0.0))
    grid1 = (0.005, 0.01, 0.02, 0.05, 0.1, 0.2)
    best1, table1 = tune_lambda_on_data(TuningSweep("lambda1", grid1, args.held_out), base,
                                        ds.templates)
    show("lambda1", best1, table1)
    print(f"tuned lambdas: lambda1={best1!r} lambda2={best2!r}")


if __name__ == "__main__":
    main()
