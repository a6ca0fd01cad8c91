import numpy as np
import pytest

from conocc.baselines import MethodSpec
from conocc.data import MAJORITY, MINORITY, synthesize_dataset
from conocc.evaluation import (CrossValResult, FoldResult, cross_validate, format_table, write_crossval_csv,
                               write_metrics_csv)
from conocc.model import ArchConfig, ConfigError
from conocc.scoring import EvalMetrics

SMALL = ArchConfig(m=16, n=8, channels=(4, 8, 8), seed=0)


@pytest.fixture(scope="module")
def cv_run():
    train, test = synthesize_dataset(16, 20, 10, 12, 1.0, seed=5)
    majority = list(train) + [s for s in test if s.label == MAJORITY]
    minority = [s for s in test if s.label == MINORITY]
    spec = MethodSpec.default("conocc", epochs=3, b=8, n=8, T=2)
    return majority, minority, cross_validate(majority, minority, 2, spec, SMALL, seed=1)


def test_rotations_are_disjoint_and_cover_majority(cv_run):
    majority, _, res = cv_run
    held = [set(f.test_majority_ids) for f in res.folds]
    assert len(held) == 2 and not held[0] & held[1]
    assert held[0] | held[1] == {s.sample_id for s in majority}
    for f in res.folds:
        assert set(f.train_ids) == {s.sample_id for s in majority} - set(f.test_majority_ids)


def test_minority_identical_and_never_trained(cv_run):
    _, minority, res = cv_run
    ids = [s.sample_id for s in minority]
    assert all(f.test_minority_ids == ids for f in res.folds)
    assert all(not set(f.train_ids) & set(ids) for f in res.folds)
    assert all(f.metrics.n_minority == len(ids) for f in res.folds)


def test_mean_and_sample_std():
    def fold(i, a):
        return FoldResult(i, [], [], [], EvalMetrics(a, a / 2, a / 4, 1, 1))

    res = CrossValResult("x", [fold(0, 0.6), fold(1, 0.8)])
    np.testing.assert_allclose(res.mean, [0.7, 0.35, 0.175])
    np.testing.assert_allclose(res.std, np.array([0.2, 0.1, 0.05]) / np.sqrt(2))


def test_crossval_csv_layout(tmp_path, cv_run):
    _, _, res = cv_run
    path = tmp_path / "cv.csv"
    write_crossval_csv(path, [res])
    lines = path.read_text().splitlines()
    assert lines[0] == "method,fold,auc,aupr_maj,aupr_min,auc_std,aupr_maj_std,aupr_min_std"
    assert [ln.split(",")[1] for ln in lines[1:]] == ["0", "1", "mean"]
    assert lines[1].endswith(",,,")
    mean_row = [float(v) for v in lines[3].split(",")[2:]]
    np.testing.assert_allclose(mean_row, [*res.mean, *res.std])


def test_metrics_csv(tmp_path):
    path = tmp_path / "m.csv"
    write_metrics_csv(path, [("conocc", "0", EvalMetrics(0.75, 0.5, 0.25, 2, 2))])
    assert path.read_text() == "method,fold,auc,aupr_maj,aupr_min\nconocc,0,0.75,0.5,0.25\n"


@pytest.mark.parametrize("k, n_maj, n_min", [(1, 10, 2), (2, 3, 2), (2, 10, 0)])
def test_crossval_rejects(k, n_maj, n_min):
    train, test = synthesize_dataset(16, max(n_maj, 1), 1, max(n_min, 1), 1.0)
    minority = [s for s in test if s.label == MINORITY][:n_min]
    with pytest.raises(ConfigError):
        cross_validate(train[:n_maj], minority, k, MethodSpec.default("cae"), SMALL)


def test_format_table():
    text = format_table([("conocc", "mean", np.array([0.9, 0.8, 0.7]), np.array([0.01, 0.02, 0.03]))])
    assert "0.9000+-0.0100" in text and text.splitlines()[0].split() == ["method", "fold", "AUC", "AUPR-maj", "AUPR-min"]
