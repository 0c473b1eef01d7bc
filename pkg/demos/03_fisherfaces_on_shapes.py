"""Fisherfaces on rendered shapes, then the same data through K-fold evaluation."""
import warnings

import numpy as np

from capsbench.baselines import fisher_fit, fisher_predict
from capsbench.bench.config import parse_config
from capsbench.bench.tools import kfold_evaluate
from capsbench.data import stack, synth_split, synth_shapes

split = synth_split(120, 40, 40, size=32, seed=0, jitter=0.15)
X, y = stack(split.train)
Xq, yq = stack(split.test)

# 4 classes allow at most 3 discriminant directions; asking for 40 is clamped
with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always")
    model = fisher_fit(X, y, n_components=40)
for w in caught:
    print("note:", w.message)

print(f"PCA keeps {model.W_pca.shape[1]} directions, LDA keeps {model.n_components}")
print(f"test accuracy {np.mean(fisher_predict(model, Xq) == yq):.1%}")

# The projected class means are well apart compared to the spread inside a class.
Z = model.project(X)
for label in range(4):
    pts = Z[y == label]
    print(f"  class {label}: mean {np.round(pts.mean(axis=0), 2)}, spread {pts.std(axis=0).mean():.3f}")

cfg = parse_config(overrides={"model": "fisherfaces", "kfold.K": "5", "kfold.repeats": "2"})
with warnings.catch_warnings():
    warnings.simplefilter("ignore")     # the same clamp note, once per fold
    result = kfold_evaluate(cfg, synth_shapes(25, size=32, seed=3, jitter=0.15))
print("\n5-fold accuracies:", [f"{a:.2f}" for a in result.accuracies], f"mean {result.mean:.3f}")
