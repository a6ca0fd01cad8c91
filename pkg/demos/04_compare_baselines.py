"""
ConOCC against CAE, SAE and a Deep-SVDD style encoder
=====================================================

All four methods share the same convolutional backbone and initial weights;
only the training objective differs.
"""
from conocc.baselines import METHODS, MethodSpec, train_method
from conocc.data import synthesize_dataset
from conocc.evaluation import format_table
from conocc.model import ArchConfig
from conocc.scoring import evaluate
from conocc.trainer import compactness

import numpy as np

train, test = synthesize_dataset(32, 100, 40, 40, separability=0.6, seed=1)
arch = ArchConfig(m=32, n=64, seed=1)

rows = []
for method in METHODS:
    # CAE keeps its own default learning rate of 1e-4
    spec = MethodSpec.default(method, epochs=40, b=32, T=10, n=64, seed=1)
    trained = train_method(spec, train, arch)
    metrics = evaluate(trained.score(test))
    rows.append((method, "-", np.array(metrics.as_row()), None))
    print(f"{method:>10}: feature compactness on train {compactness(trained.model, train):.4g}")

print()
print(format_table(rows))
