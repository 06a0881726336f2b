import numpy as np
import pytest

from salmap.multiseg import MultiLevelPartition
from salmap.saliency import (
    PipelineConfig,
    label_regions,
    paint_level_maps,
    predict_saliency,
    solve_fusion_weights,
    train_saliency,
)
from salmap.synthgen import SynthSpec, generate_one


def make_partition(levels):
    parents = []
    for prev, cur in zip(levels, levels[1:]):
        n_prev = prev.max() + 1
        pmap = np.zeros(n_prev, dtype=np.int64)
        for rid in range(n_prev):
            pmap[rid] = cur[prev == rid][0]
        parents.append(pmap)
    return MultiLevelPartition(
        levels=list(levels),
        merge_parents=parents,
        region_counts=[lv.max() + 1 for lv in levels],
    )


class TestLabelRegions:
    def test_inside_outside_and_excluded(self):
        labels = np.repeat(np.arange(3), 20).reshape(3, 20).repeat(4, axis=0)
        gt = np.zeros((12, 20), dtype=bool)
        gt[0:4] = True  # region 0 fully inside
        gt[4:8, :10] = True  # region 1 half covered
        part = make_partition([labels])
        y, inc = label_regions(part, gt)
        assert y.tolist() == [1.0, 0.0, 0.0]
        assert inc.tolist() == [True, False, True]

    def test_size_mismatch(self):
        part = make_partition([np.zeros((4, 4), dtype=np.int64)])
        with pytest.raises(ValueError):
            label_regions(part, np.zeros((5, 5), dtype=bool))


class TestFusionOracle:
    def oracle(self, maps, gt):
        s = np.stack([m.ravel() for m in maps], axis=1)
        w, *_ = np.linalg.lstsq(s, gt.ravel().astype(np.float64), rcond=None)
        return w

    def accumulate(self, maps, gt):
        s = np.stack([m.ravel() for m in maps])
        g = gt.ravel().astype(np.float64)
        return s @ s.T, s @ g

    def test_exact_single_level(self):
        gt = np.zeros((10, 10), dtype=bool)
        gt[2:8, 2:8] = True
        a, b = self.accumulate([gt.astype(np.float64)], gt)
        w = solve_fusion_weights(a, b)
        assert w == pytest.approx([1.0], abs=1e-9)

    def test_minimal_norm_rank_deficient(self):
        gt = np.zeros((10, 10), dtype=bool)
        gt[3:7, 3:7] = True
        maps = [gt.astype(np.float64), np.zeros((10, 10))]
        a, b = self.accumulate(maps, gt)
        w = solve_fusion_weights(a, b)
        assert w == pytest.approx([1.0, 0.0], abs=1e-9)
        assert w == pytest.approx(self.oracle(maps, gt), abs=1e-9)

    def test_scaled_map(self):
        gt = np.zeros((10, 10), dtype=bool)
        gt[3:7, 3:7] = True
        maps = [0.5 * gt.astype(np.float64), np.zeros((10, 10))]
        a, b = self.accumulate(maps, gt)
        w = solve_fusion_weights(a, b)
        assert w == pytest.approx([2.0, 0.0], abs=1e-9)

    def test_matches_dense_oracle_random(self):
        rng = np.random.default_rng(0)
        maps = [rng.uniform(size=(8, 8)) for _ in range(3)]
        gt = rng.uniform(size=(8, 8)) > 0.5
        a, b = self.accumulate(maps, gt)
        assert solve_fusion_weights(a, b) == pytest.approx(
            self.oracle(maps, gt), abs=1e-9
        )


class TestPaintMaps:
    def test_piecewise_constant(self):
        labels = np.array([[0, 0, 1], [2, 2, 1]])
        part = make_partition([labels])

        class Desc:
            level_slices = [(0, 3)]

        maps = paint_level_maps(part, np.array([0.1, 0.9, 0.4]), Desc())
        assert maps.shape == (1, 2, 3)
        assert maps[0].tolist() == [[0.1, 0.1, 0.9], [0.4, 0.4, 0.9]]

    def test_scores_clipped(self):
        labels = np.zeros((2, 2), dtype=np.int64)
        part = make_partition([labels])

        class Desc:
            level_slices = [(0, 1)]

        maps = paint_level_maps(part, np.array([1.7]), Desc())
        assert maps.max() == 1.0


@pytest.fixture(scope="module")
def tiny_model():
    spec = SynthSpec(seed=21, count=4, height=150, width=200)
    pairs = [generate_one(spec, i) for i in range(4)]
    cfg = PipelineConfig(tree_count=8, seed=0)
    cfg.multiseg.level_count = 3
    cfg.preprocess.target_height = 150
    cfg.preprocess.target_width = 200
    return train_saliency([p[0] for p in pairs], [p[1] for p in pairs], cfg)


@pytest.mark.slow
class TestEndToEnd:
    def test_model_shapes(self, tiny_model):
        assert tiny_model.fusion_weights.shape == (3,)
        assert np.isfinite(tiny_model.training_residual)

    def test_prediction_in_range(self, tiny_model):
        img, gt = generate_one(SynthSpec(seed=21, height=150, width=200), 7)
        final, maps = predict_saliency(tiny_model, img)
        assert final.shape == (150, 200)
        assert final.min() >= 0 and final.max() <= 1
        assert maps.shape[0] == 3
        assert final[gt].mean() >= 2 * max(final[~gt].mean(), 1e-6)

    def test_determinism(self, tiny_model):
        img, _ = generate_one(SynthSpec(seed=21, height=150, width=200), 8)
        a, _ = predict_saliency(tiny_model, img)
        b, _ = predict_saliency(tiny_model, img)
        assert np.array_equal(a, b)

    def test_too_few_images(self):
        img, gt = generate_one(SynthSpec(seed=0, height=150, width=200), 0)
        with pytest.raises(ValueError):
            train_saliency([img], [gt], PipelineConfig())
