"""Paired ordering-signal experiment: contrastive regularizer on vs off.

For each seed, draws a synthetic censored dataset, trains the same model
twice (beta = 1 and beta = 0), and reports validation CI for both arms
plus the ordinality the regularized embedding gains over its untrained
initialization. Mirrors the directional claim that ordering the latent
space helps survival prediction.
"""

import argparse
import dataclasses
import json

import numpy as np

from survrnc import nn, metrics
from survrnc.core import LossConfig
from survrnc.data import AugmentConfig, SynthConfig, generate_synthetic
from survrnc.trainer import TrainConfig, train, _derived_seed


def experiment_config(seed: int, lam: float = 0.5, beta: float = 1.0) -> TrainConfig:
    """Compact tanh encoder: at desk scale the ordering pressure needs a
    low-dimensional embedding to leave a clean geometric fingerprint."""
    return TrainConfig(
        hidden_widths=(16,), d_emb=4, activation="tanh",
        loss=LossConfig(temperature=1.0, lam=lam, beta=beta),
        augment=AugmentConfig(noise_std=0.1, feature_dropout_prob=0.1, seed=0),
        seed=seed,
    )


def full_ordinality(encoder, dataset):
    emb, _ = nn.forward(encoder, dataset.feature_matrix())
    return metrics.embedding_ordinality(emb, dataset.events(), dataset.times())


def run_seed(seed: int, n: int, censoring: float):
    dataset, _ = generate_synthetic(
        SynthConfig(n=n, d_in=10, risk_model="linear",
                    target_censoring=censoring, seed=100 + seed))
    results = {}
    for beta in (1.0, 0.0):
        cfg = experiment_config(seed, beta=beta)
        model, history = train(dataset, cfg)
        results[beta] = {
            "val_ci": history.final_val_ci,
            "ordinality": full_ordinality(model.encoder, dataset),
        }
    cfg = experiment_config(seed)
    init_encoder = nn.init_params(
        nn.MlpSpec((10, *cfg.hidden_widths, cfg.d_emb), cfg.activation,
                   seed=_derived_seed(cfg.seed, 1)))
    init_ord = full_ordinality(init_encoder, dataset)
    return {
        "seed": seed,
        "ci_regularized": results[1.0]["val_ci"],
        "ci_baseline": results[0.0]["val_ci"],
        "ordinality_init": init_ord,
        "ordinality_regularized": results[1.0]["ordinality"],
        "ordinality_baseline": results[0.0]["ordinality"],
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=2000)
    parser.add_argument("--censoring", type=float, default=0.3)
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    rows = [run_seed(s, args.n, args.censoring) for s in range(args.seeds)]
    wins = sum(r["ci_regularized"] >= r["ci_baseline"] for r in rows)
    gain = float(np.mean(
        [r["ordinality_regularized"] - r["ordinality_init"] for r in rows]))
    vs_baseline = float(np.mean(
        [r["ordinality_regularized"] - r["ordinality_baseline"] for r in rows]))
    for r in rows:
        print(f"seed {r['seed']}: CI {r['ci_regularized']:.4f} vs "
              f"{r['ci_baseline']:.4f} | ordinality "
              f"{r['ordinality_init']:+.4f} -> {r['ordinality_regularized']:.4f} "
              f"(baseline {r['ordinality_baseline']:.4f})")
    print(f"CI wins: {wins}/{len(rows)}; mean ordinality gain over init: "
          f"{gain:+.4f}; over baseline: {vs_baseline:+.4f}")
    if args.out:
        payload = {"rows": rows, "ci_wins": wins,
                   "ordinality_gain_over_init": gain,
                   "ordinality_gain_over_baseline": vs_baseline}
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
