"""
Training the center-constrained autoencoder
===========================================

Loss per batch: reconstruction error plus gamma times the mean squared
distance of the bottleneck features to a center mu. mu is the mean feature
of the whole training set and is refreshed every T epochs.
"""
import numpy as np

from conocc import ArchConfig, HyperParams, build_model, fit
from conocc.data import synthesize_dataset
from conocc.scoring import auc, reconstruction_scores

train, test = synthesize_dataset(32, 100, 30, 30, 1.0, seed=0)
hp = HyperParams(lr=1e-3, gamma=10.0, T=10, b=32, epochs=40, n=64, seed=0)
model = build_model(ArchConfig(m=32, n=hp.n, seed=hp.seed))
print(f"{model.num_parameters():,} parameters")


def progress(epoch, model, center, log):
    r = log.records[-1]
    if r.center_updated or epoch == hp.epochs - 1:
        flag = "  <- mu refreshed" if r.center_updated else ""
        print(f"epoch {epoch:3d}  l_ae {r.l_ae:8.3f}  l_con {r.l_con:8.4f}  total {r.l_total:8.3f}{flag}")


model, center, log = fit(model, train, hp, on_epoch=progress)
print("center refreshed at epochs", log.update_epochs())
print("|mu| =", float(np.linalg.norm(center.mu)))

# a lower reconstruction score means "looks like the training class"
scores = reconstruction_scores(model, test)
print(f"test AUC: {auc(scores):.4f}")
