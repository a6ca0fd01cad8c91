"""
Majority-rotating cross-validation
==================================

The majority class is split into k rotations. Each fold trains on k-1 of
them and tests on the held-out rotation plus every minority sample.
"""
from conocc.baselines import MethodSpec
from conocc.data import MAJORITY, MINORITY, synthesize_dataset
from conocc.evaluation import cross_validate, format_table
from conocc.model import ArchConfig

import numpy as np

train, test = synthesize_dataset(32, 80, 40, 40, separability=0.8, seed=2)
majority = list(train) + [s for s in test if s.label == MAJORITY]
minority = [s for s in test if s.label == MINORITY]
print(f"{len(majority)} majority, {len(minority)} minority")

spec = MethodSpec.default("conocc", epochs=30, b=32, T=10, n=64)
res = cross_validate(majority, minority, k=2, spec=spec, arch=ArchConfig(m=32, n=64))
for f in res.folds:
    print(f"fold {f.fold}: train {len(f.train_ids)}, test {len(f.test_majority_ids)} maj + {len(f.test_minority_ids)} min")

rows = [("conocc", str(f.fold), np.array(f.metrics.as_row()), None) for f in res.folds]
rows.append(("conocc", "mean", res.mean, res.std))
print(format_table(rows))
