"""
Sensitivity to gamma and the center interval T
==============================================

Each cell is one ConOCC run; the CAE row (gamma = 0) is the reference.
``workers`` spreads cells over processes without changing the results.
This toy grid is deliberately short, and at 40 epochs on 60 patches the
constraint often trails the plain autoencoder. Longer runs on more data
close the gap; see the acceptance sweep in tests/test_acceptance.py.
"""
import os

from conocc.data import synthesize_dataset
from conocc.model import ArchConfig
from conocc.sweep import run_sweep

train, test = synthesize_dataset(32, 60, 30, 30, separability=0.8, seed=3)
rows = run_sweep(train, test, lambdas=[1e-3], gammas=[0.1, 1.0, 10.0], intervals=[5, 20], epochs=40, batch=32,
                 seed=0, arch=ArchConfig(m=32, n=64), n=64, workers=min(4, os.cpu_count() or 1))

ref = next(r for r in rows if r.cell.is_reference)
print(f"CAE reference AUC: {ref.auc:.4f}")
for r in rows:
    if not r.cell.is_reference:
        mark = ">=" if r.auc >= ref.auc else "< "
        print(f"gamma={r.cell.gamma:<5g} T={r.cell.T:<3d} AUC={r.auc:.4f} {mark} reference  [{r.status}]")
