import numpy as np
import pytest

from salmap.multiseg import MultisegConfig, build_partition
from salmap.regionfeat import (
    BACKGROUND_DIM,
    CONTRAST_DIM,
    DESCRIPTOR_DIM,
    PROPERTY_DIM,
    FeatureConfig,
    background_descriptors,
    circle_probability,
    compute_planes,
    contrast_descriptors,
    detect_circles,
    elongation,
    extent,
    extract_pseudo_background,
    feature_diff,
    level_descriptors,
    min_area_rect_area,
    partition_descriptors,
    property_descriptors,
)
from salmap.synthgen import SynthSpec, generate_one


def disk_pixels(r, cy=0.0, cx=0.0):
    rad = int(np.ceil(r)) + 1
    yy, xx = np.mgrid[-rad : rad + 1, -rad : rad + 1]
    sel = np.hypot(yy, xx) <= r
    return np.column_stack([yy[sel] + cy, xx[sel] + cx])


class TestFeatureDiff:
    def test_identical_histograms(self):
        h = np.array([0.25, 0.5, 0.25])
        assert feature_diff(h, h, True) == 0.0

    def test_disjoint_bins(self):
        assert feature_diff([1.0, 0.0], [0.0, 1.0], True) == pytest.approx(4.0)

    def test_elementwise_branch(self):
        out = feature_diff([3.0, 5.0], [1.0, 9.0], False)
        assert out == pytest.approx([2.0, 4.0])

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        a, b = rng.uniform(size=8), rng.uniform(size=8)
        assert feature_diff(a, b, True) == pytest.approx(feature_diff(b, a, True))
        assert feature_diff(a, b, False) == pytest.approx(feature_diff(b, a, False))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            feature_diff([1.0], [1.0, 2.0], True)


class TestElongation:
    def test_disk(self):
        assert elongation(disk_pixels(30)) == pytest.approx(0.0, abs=0.02)

    def test_rectangle(self):
        yy, xx = np.mgrid[0:10, 0:30]
        pts = np.column_stack([yy.ravel(), xx.ravel()])
        assert elongation(pts) == pytest.approx(1 - 10 / 30, abs=0.02)

    def test_line(self):
        pts = np.column_stack([np.zeros(100), np.arange(100)])
        assert elongation(pts) >= 0.95

    def test_invariances(self):
        yy, xx = np.mgrid[0:8, 0:20]
        pts = np.column_stack([yy.ravel(), xx.ravel()]).astype(np.float64)
        base = elongation(pts)
        assert elongation(pts + [100, 37]) == pytest.approx(base)
        ang = 0.6
        rot = pts @ np.array(
            [[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]]
        )
        assert elongation(np.rint(rot)) == pytest.approx(base, abs=0.05)


class TestExtent:
    def test_axis_aligned_rectangle(self):
        yy, xx = np.mgrid[0:12, 0:20]
        pts = np.column_stack([yy.ravel(), xx.ravel()])
        assert extent(pts) == pytest.approx(1.0, abs=0.05)

    def test_rotated_rectangle(self):
        yy, xx = np.mgrid[-30:31, -30:31]
        u = 0.8 * xx + 0.6 * yy
        v = -0.6 * xx + 0.8 * yy
        sel = (np.abs(u) <= 20) & (np.abs(v) <= 8)
        pts = np.column_stack([yy[sel], xx[sel]])
        # rasterized edges leave jagged corners, so the bound is looser
        assert extent(pts) == pytest.approx(1.0, abs=0.11)

    def test_disk(self):
        assert extent(disk_pixels(60)) == pytest.approx(np.pi / 4, abs=0.03)

    def test_right_triangle(self):
        yy, xx = np.mgrid[0:40, 0:40]
        sel = xx <= yy
        pts = np.column_stack([yy[sel], xx[sel]])
        assert extent(pts) == pytest.approx(0.5, abs=0.05)

    def test_min_rect_single_pixel(self):
        assert min_area_rect_area(np.array([[3, 4]])) == pytest.approx(1.0)


class TestCircleDetection:
    def circle_image(self, cy, cx, r, h=120, w=160):
        yy, xx = np.mgrid[0:h, 0:w]
        img = np.full((h, w, 3), 0.8)
        img[np.hypot(yy - cy, xx - cx) <= r] = 0.2
        return img

    def test_blank_image(self):
        maps = detect_circles(np.full((50, 60, 3), 0.5))
        assert maps.center_map.max() == 0 and maps.probability_map.max() == 0
        assert maps.centers == []

    def test_full_circle_found(self):
        cfg = FeatureConfig(circle_exact=True)
        maps = detect_circles(self.circle_image(60, 80, 30), cfg)
        assert maps.centers
        best = max(maps.centers, key=lambda c: maps.center_map[c[0], c[1]])
        assert np.hypot(best[0] - 60, best[1] - 80) <= 2
        assert abs(best[2] - 30) <= 2

    def test_translation_equivariance(self):
        cfg = FeatureConfig(circle_exact=True)
        m1 = detect_circles(self.circle_image(50, 60, 25), cfg)
        m2 = detect_circles(self.circle_image(58, 73, 25), cfg)
        b1 = max(m1.centers, key=lambda c: m1.center_map[c[0], c[1]])
        b2 = max(m2.centers, key=lambda c: m2.center_map[c[0], c[1]])
        assert abs((b2[0] - b1[0]) - 8) <= 1 and abs((b2[1] - b1[1]) - 13) <= 1

    def test_probability_in_range(self):
        maps = detect_circles(self.circle_image(60, 80, 30), FeatureConfig(circle_exact=True))
        assert maps.probability_map.min() >= 0 and maps.probability_map.max() <= 1

    def test_region_probability(self):
        cfg = FeatureConfig(circle_exact=True)
        maps = detect_circles(self.circle_image(60, 80, 30), cfg)
        far = np.zeros((120, 160), dtype=bool)
        far[0:10, 0:10] = True
        assert circle_probability(far, maps) == pytest.approx(0.0, abs=1e-6)
        yy, xx = np.mgrid[0:120, 0:160]
        ring = np.abs(np.hypot(yy - 60, xx - 80) - 30) <= 2
        assert circle_probability(ring, maps) >= 0.8


class TestPseudoBackground:
    def test_bright_field_dark_disk(self):
        yy, xx = np.mgrid[0:200, 0:260]
        img = np.full((200, 260, 3), 0.78)
        lesion = np.hypot(yy - 100, xx - 130) <= 40
        img[lesion] = 0.2
        pb = extract_pseudo_background(img)
        assert not pb.used_fallback
        assert pb.background_threshold == pytest.approx(0.9 * 0.78, abs=0.01)
        assert not (pb.strip_mask & lesion).any()
        assert (pb.strip_mask & ~pb.background_mask).sum() == 0

    def test_uniform_image(self):
        pb = extract_pseudo_background(np.full((100, 140, 3), 0.6))
        assert pb.background_mask.all()
        border = np.zeros((100, 140), dtype=bool)
        border[:15, :] = border[-15:, :] = border[:, :15] = border[:, -15:] = True
        assert np.array_equal(pb.strip_mask, border)

    def test_dark_corners_and_border_lesion(self):
        yy, xx = np.mgrid[0:200, 0:260]
        img = np.full((200, 260, 3), 0.75)
        corners = np.zeros((200, 260), dtype=bool)
        for cy, cx in ((0, 0), (0, 259), (199, 0), (199, 259)):
            corners |= np.hypot(yy - cy, xx - cx) <= 45
        lesion = np.hypot(yy - 100, xx - 0) <= 50  # touches the left border
        img[corners] = 0.08
        img[lesion] = 0.25
        pb = extract_pseudo_background(img)
        assert not (pb.strip_mask & corners).any()
        assert not (pb.strip_mask & lesion).any()
        assert pb.strip_mask.any()

    def test_strip_width_bound(self):
        from scipy import ndimage as ndi

        yy, xx = np.mgrid[0:200, 0:260]
        img = np.full((200, 260, 3), 0.78)
        img[np.hypot(yy - 100, xx - 130) <= 40] = 0.2
        pb = extract_pseudo_background(img)
        # every strip pixel is within 15 px of a non-background pixel or the
        # image border (the erosion treats the outside as background)
        dist = ndi.distance_transform_edt(np.pad(pb.background_mask, 1))[1:-1, 1:-1]
        assert dist[pb.strip_mask].max() <= 15.5


@pytest.fixture(scope="module")
def two_tone():
    yy, xx = np.mgrid[0:120, 0:160]
    img = np.full((120, 160, 3), 0.8)
    lesion = np.hypot(yy - 60, xx - 80) <= 30
    img[lesion] = 0.2
    labels = lesion.astype(np.int64)  # region 1 = lesion, region 0 = field
    planes = compute_planes(img)
    return img, labels, planes


class TestDescriptors:

    def test_contrast_mean_rgb_gap(self, two_tone):
        _, labels, planes = two_tone
        feats, deg = contrast_descriptors(planes, labels, 1)
        assert feats.shape == (CONTRAST_DIM,)
        assert not deg
        assert feats[:3] == pytest.approx([0.6, 0.6, 0.6], abs=1e-9)

    def test_single_region_degenerate(self, two_tone):
        img, _, planes = two_tone
        labels = np.zeros(img.shape[:2], dtype=np.int64)
        feats, deg = contrast_descriptors(planes, labels, 0)
        assert deg and feats == pytest.approx(np.zeros(CONTRAST_DIM))

    def test_property_block(self, two_tone):
        img, _, planes = two_tone
        labels = np.zeros(img.shape[:2], dtype=np.int64)
        prop = property_descriptors(planes, labels, 0)
        assert prop.shape == (PROPERTY_DIM,)
        assert prop[0] == pytest.approx(0.5, abs=0.01)  # mean x
        assert prop[1] == pytest.approx(0.5, abs=0.01)  # mean y
        assert prop[6] == pytest.approx(1.0)  # normalized area

    def test_background_block_two_tone(self, two_tone):
        _, labels, planes = two_tone
        bg = background_descriptors(planes, labels, 1)
        assert bg.shape == (BACKGROUND_DIM,)
        # lesion vs bright strip: RGB gap equals the synthetic contrast
        assert bg[:3] == pytest.approx([0.6, 0.6, 0.6], abs=0.02)

    def test_level_feature_normalization(self, two_tone):
        _, labels, planes = two_tone
        feats, _ = level_descriptors(planes, labels, 3, 15)
        assert feats[:, CONTRAST_DIM + PROPERTY_DIM - 1] == pytest.approx(3 / 14)

    def test_full_partition_descriptors(self):
        img, _ = generate_one(SynthSpec(seed=11, height=120, width=160), 0)
        part = build_partition(img, MultisegConfig(level_count=4))
        planes = compute_planes(img)
        desc = partition_descriptors(planes, part)
        total = sum(n for n in part.region_counts)
        assert desc.features.shape == (total, DESCRIPTOR_DIM)
        assert np.isfinite(desc.features).all()
        zero_contrast = np.abs(desc.features[:, :CONTRAST_DIM]).sum(axis=1) == 0
        assert (zero_contrast <= desc.degenerate).all()

    def test_folded_equals_direct(self):
        img, _ = generate_one(SynthSpec(seed=12, height=100, width=130), 0)
        part = build_partition(img, MultisegConfig(level_count=4))
        planes = compute_planes(img)
        desc = partition_descriptors(planes, part)
        for li, labels in enumerate(part.levels):
            direct, deg = level_descriptors(planes, labels, li, 4)
            s, e = desc.level_slices[li]
            assert np.abs(direct - desc.features[s:e]).max() <= 5e-13
            assert np.array_equal(deg, desc.degenerate[s:e])
