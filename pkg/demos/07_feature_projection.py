"""
Bottleneck features in two dimensions
=====================================

Train ConOCC and a plain autoencoder from the same initial weights, then
project each one's training features onto their top two principal
components. The constrained features sit much closer to their mean.
"""
import sys
import tempfile
from pathlib import Path

from conocc.baselines import MethodSpec, train_method
from conocc.data import synthesize_dataset
from conocc.model import ArchConfig
from conocc.projection import feature_projection, scatter_svg, write_projection_csv
from conocc.trainer import compactness

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="conocc_proj_"))
out.mkdir(parents=True, exist_ok=True)

train, test = synthesize_dataset(32, 80, 20, 20, 1.0, seed=4)
arch = ArchConfig(m=32, n=64, seed=4)
samples = list(train) + list(test)

for method in ("conocc", "cae"):
    trained = train_method(MethodSpec.default(method, epochs=30, b=32, T=10, n=64, seed=4), train, arch)
    coords, variances, total = feature_projection(trained.model, samples)
    write_projection_csv(out / f"{method}_features_2d.csv", samples, coords)
    (out / f"{method}.svg").write_text(scatter_svg(coords, [s.label for s in samples], method))
    print(f"{method:>6}: compactness {compactness(trained.model, train):10.4g}, "
          f"top-2 variance share {(variances.sum() / total):.2%}")

print("wrote", sorted(p.name for p in out.iterdir()))
