"""Smoothing a sparse rank histogram with the beta-binomial model.

With only a handful of trials per cell the empirical histogram is jagged and
its summary metrics jump around. Fitting the two-parameter model (anchored so
that the modelled rank-1 mass matches the observed identification rate) gives
a smooth profile whose tail behaviour is far more stable. The plot overlays
the fitted curve on the raw bars; the printout contrasts summaries computed
from empirical weights with summaries computed from the model pmf.
"""

from pathlib import Path

import srd

OUT = Path(__file__).parent / "output"


def main():
    OUT.mkdir(exist_ok=True)

    # a deliberately small sample: 120 trials spread over 40 ranks
    dist = srd.synth_rank_samples(alpha=1.2, beta=3.0, n_references=40,
                                  n_samples=120, seed=42)
    model = srd.fit(dist)
    print(f"fitted alpha {model.alpha:.4f}  beta {model.beta:.4f}  "
          f"loss {model.loss:.4f}  iterations {model.iterations}")

    empirical = srd.summarize(dist, model)
    modelled = srd.summarize(dist, model, model_weighting="model")
    print(f"{'':>12} {'MaxD':>8} {'MeanD':>8} {'IdR':>8} {'Spread':>8}")
    for label, s in [("empirical", empirical), ("model", modelled)]:
        print(f"{label:>12} {s.max_disclosure:8.3f} {s.mean_disclosure:8.3f}"
              f" {s.identification_rate:8.2f} {s.rank_spread:8.2f}")

    path = OUT / "betabinomial_smoothing.svg"
    srd.plot_rank_histogram(
        dist,
        path,
        model_curve=model.gamma,
        labels=("observed", None),
        title="Sparse histogram with fitted beta-binomial pmf",
    )
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
