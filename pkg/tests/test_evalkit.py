import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from salmap.evalkit import batch_evaluate, mask_metrics, roc_auc


def square(h, w, r0, r1, c0, c1):
    m = np.zeros((h, w), dtype=bool)
    m[r0:r1, c0:c1] = True
    return m


class TestMaskMetrics:
    def test_perfect_match(self):
        gt = square(20, 20, 5, 15, 5, 15)
        rep = mask_metrics(gt, gt)
        assert rep.dsc == 1.0 and rep.jsi == 1.0 and rep.acc == 1.0
        assert rep.sens == 1.0 and rep.spec == 1.0

    def test_half_overlap(self):
        # pred covers the left half of a 10x10 gt square, no false positives
        gt = square(20, 20, 5, 15, 5, 15)
        pred = square(20, 20, 5, 15, 5, 10)
        rep = mask_metrics(pred, gt)
        assert rep.tp == 50 and rep.fp == 0 and rep.fn == 50
        assert rep.dsc == pytest.approx(2 * 50 / (2 * 50 + 0 + 50))
        assert rep.jsi == pytest.approx(0.5)
        assert rep.sens == pytest.approx(0.5)
        assert rep.spec == 1.0

    def test_disjoint(self):
        gt = square(20, 20, 0, 5, 0, 5)
        pred = square(20, 20, 10, 15, 10, 15)
        rep = mask_metrics(pred, gt)
        assert rep.dsc == 0.0 and rep.jsi == 0.0 and rep.sens == 0.0
        assert rep.acc == pytest.approx((400 - 50) / 400)

    def test_both_empty(self):
        z = np.zeros((8, 8), dtype=bool)
        rep = mask_metrics(z, z)
        assert rep.dsc == 1.0 and rep.jsi == 1.0 and rep.sens == 1.0

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            mask_metrics(np.zeros((4, 4), bool), np.zeros((5, 5), bool))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_dsc_jsi_identity(self, seed):
        rng = np.random.default_rng(seed)
        pred = rng.uniform(size=(12, 12)) > 0.5
        gt = rng.uniform(size=(12, 12)) > 0.5
        rep = mask_metrics(pred, gt)
        assert rep.dsc == pytest.approx(2 * rep.jsi / (1 + rep.jsi))

    def test_counts_swap_under_argument_swap(self):
        rng = np.random.default_rng(7)
        a = rng.uniform(size=(15, 15)) > 0.4
        b = rng.uniform(size=(15, 15)) > 0.6
        r1, r2 = mask_metrics(a, b), mask_metrics(b, a)
        assert (r1.tp, r1.fp, r1.fn) == (r2.tp, r2.fn, r2.fp)
        assert r1.dsc == pytest.approx(r2.dsc)
        assert r1.jsi == pytest.approx(r2.jsi)


class TestRocAuc:
    def test_perfect_separation(self):
        gt = square(10, 10, 0, 5, 0, 10)
        sal = np.where(gt, 0.9, 0.1)
        curve = roc_auc(sal, gt)
        assert curve.auc == pytest.approx(1.0)
        assert curve.fpr[0] == 0.0 and curve.tpr[-1] == 1.0

    def test_inverted_scores(self):
        gt = square(10, 10, 0, 5, 0, 10)
        sal = np.where(gt, 0.1, 0.9)
        assert roc_auc(sal, gt).auc == pytest.approx(0.0)

    def test_constant_scores_chance(self):
        gt = square(10, 10, 0, 5, 0, 10)
        assert roc_auc(np.full((10, 10), 0.5), gt).auc == pytest.approx(0.5)

    def test_single_class_raises(self):
        with pytest.raises(ValueError):
            roc_auc(np.zeros((5, 5)), np.zeros((5, 5), bool))
        with pytest.raises(ValueError):
            roc_auc(np.zeros((5, 5)), np.ones((5, 5), bool))

    def test_monotone_curve(self):
        rng = np.random.default_rng(3)
        gt = rng.uniform(size=(30, 30)) > 0.6
        curve = roc_auc(rng.uniform(size=(30, 30)), gt)
        assert (np.diff(curve.fpr) >= 0).all()
        assert (np.diff(curve.tpr) >= 0).all()
        assert 0.0 <= curve.auc <= 1.0


class TestBatch:
    def test_mean_of_two(self):
        gt = square(20, 20, 5, 15, 5, 15)
        half = square(20, 20, 5, 15, 5, 10)
        mean, reports = batch_evaluate([(gt, gt), (half, gt)])
        assert len(reports) == 2
        assert mean.dsc == pytest.approx((1.0 + reports[1].dsc) / 2)
        assert mean.tp == reports[0].tp + reports[1].tp

    def test_empty_batch(self):
        with pytest.raises(ValueError):
            batch_evaluate([])
