"""Cohen's kappa agreement and the evaluator-substitution analysis.

Three humans and the model judge label the same items good/bad. The question:
does swapping the model in for one human hold up the panel's agreement?
"""

import random

from forge.analytics import AgreementMatrix, cohens_kappa, substitution_analysis

# Simulate 60 shared items: h1 is careful, h2 mostly tracks h1, h3 is noisy,
# and the model mirrors h1 with occasional deviations.
rng = random.Random(13)
truth = [rng.choice(["good", "bad"]) for _ in range(60)]


def noisy(source, flip_rate):
    return [
        ("bad" if label == "good" else "good") if rng.random() < flip_rate else label
        for label in source
    ]


labels = {
    rater: {f"item{i:02d}": label for i, label in enumerate(noisy(truth, flip_rate))}
    for rater, flip_rate in [("h1", 0.05), ("h2", 0.15), ("h3", 0.35), ("model", 0.10)]
}

matrix = AgreementMatrix.from_labels(labels)
print("pairwise kappa:")
for row in matrix.to_rows():
    print(f"  {row['rater_a']:>6} vs {row['rater_b']:<6} {row['kappa']:+.3f}")

result = substitution_analysis(matrix, "model", ["h1", "h2", "h3"])
print(f"\nhuman-only mean kappa:       {result['human_mean']:.3f}")
print(f"model-substituted mean kappa: {result['substituted_mean']:.3f}")
for dropped, value in result["per_combination"].items():
    print(f"  panel without {dropped}: {value:.3f}")

# The textbook edge cases, for intuition.
print("\nedge cases:")
print("  identical raters:  ", cohens_kappa(list("GGBB"), list("GGBB")).kappa)
print("  perfect opposites: ", cohens_kappa(list("GGBB"), list("BBGG")).kappa)
