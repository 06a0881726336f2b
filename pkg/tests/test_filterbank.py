import numpy as np
import pytest

from salmap.filterbank import (
    _LAWS_1D,
    filter_response,
    lbp_codes,
    make_laws14,
    make_lm15,
    prewitt_magnitude,
)


@pytest.fixture(scope="module")
def lm():
    return make_lm15()


@pytest.fixture(scope="module")
def laws():
    return make_laws14()


class TestLM15:
    def test_count(self, lm):
        assert len(lm.kernels) == 15

    def test_gaussian_sums_to_one(self, lm):
        g = lm.kernels[lm.names.index("gauss")]
        assert abs(g.sum() - 1.0) <= 1e-10

    def test_derivative_kernels_zero_mean(self, lm):
        for name, k in zip(lm.names, lm.kernels):
            if name != "gauss":
                assert abs(k.sum()) <= 1e-10, name

    def test_constant_response_zero(self, lm):
        img = np.full((60, 60), 0.7)
        for name, r in zip(lm.names, filter_response(img, lm)):
            if name != "gauss":
                assert np.abs(r).max() <= 1e-9, name

    def test_step_edge_orientation_selectivity(self, lm):
        img = np.zeros((60, 60))
        img[:, 30:] = 1.0  # vertical edge, gradient along x
        responses = filter_response(img, lm)
        peaks = {}
        for name, r in zip(lm.names, responses):
            if name.startswith("edge"):
                peaks[name] = np.abs(r[30]).max()
        # kernel 0 differentiates along y (theta=0 short axis), the
        # quarter-turn kernel differentiates along x and must win
        assert max(peaks, key=peaks.get) == "edge_3"


class TestLaws14:
    def test_count(self, laws):
        assert len(laws.kernels) == 14
        assert "L5L5" not in laws.names

    def test_symmetrized_zero_mean(self, laws):
        k = laws.kernels[laws.names.index("L5E5")]
        assert abs(k.sum()) <= 1e-10
        img = np.full((20, 20), 0.3)
        r = filter_response(img, laws)[laws.names.index("L5E5")]
        assert np.abs(r).max() <= 1e-9

    def test_r5r5_outer_product(self, laws):
        k = laws.kernels[laws.names.index("R5R5")]
        assert np.array_equal(k, np.outer(_LAWS_1D["R5"], _LAWS_1D["R5"]))


class TestFilterResponse:
    def test_impulse_gives_flipped_kernel(self, laws):
        img = np.zeros((21, 21))
        img[10, 10] = 1.0
        k = laws.kernels[0]
        r = filter_response(img, laws)[0]
        # correlating an impulse reproduces the flipped kernel
        assert r[8:13, 8:13] == pytest.approx(k[::-1, ::-1])

    def test_linearity(self, lm):
        rng = np.random.default_rng(0)
        a, b = 2.0, -0.7
        i1 = rng.uniform(size=(40, 40))
        i2 = rng.uniform(size=(40, 40))
        r1 = filter_response(i1, lm)
        r2 = filter_response(i2, lm)
        rc = filter_response(a * i1 + b * i2, lm)
        for x, y, z in zip(r1, r2, rc):
            assert np.abs(a * x + b * y - z).max() <= 1e-9

    def test_rejects_color(self, lm):
        with pytest.raises(ValueError):
            filter_response(np.zeros((4, 4, 3)), lm)


class TestLBP:
    def test_constant_all_255(self):
        assert (lbp_codes(np.full((6, 6), 0.5)) == 255).all()

    def test_isolated_bright_pixel(self):
        img = np.zeros((7, 7))
        img[3, 3] = 1.0
        assert lbp_codes(img)[3, 3] == 0

    def test_histogram_total(self):
        rng = np.random.default_rng(1)
        img = rng.uniform(size=(30, 40))
        codes = lbp_codes(img)
        assert np.bincount(codes.ravel(), minlength=256).sum() == 30 * 40

    def test_monotone_invariance(self):
        rng = np.random.default_rng(2)
        img = rng.uniform(0.01, 0.99, size=(25, 25))
        assert np.array_equal(lbp_codes(img), lbp_codes(img**2))


class TestPrewitt:
    def test_constant_zero(self):
        assert prewitt_magnitude(np.full((10, 10), 0.4)).max() <= 1e-12

    def test_step_magnitude(self):
        h = 0.6
        img = np.zeros((20, 20))
        img[:, 10:] = h
        mag = prewitt_magnitude(img)
        # interior columns adjacent to the step see the full 3h response
        assert mag[10, 9] == pytest.approx(3 * h)
        assert mag[10, 10] == pytest.approx(3 * h)

    def test_rotation_symmetry(self):
        rng = np.random.default_rng(3)
        img = rng.uniform(size=(16, 16))
        a = prewitt_magnitude(np.rot90(img))
        b = np.rot90(prewitt_magnitude(img))
        assert a == pytest.approx(b)
