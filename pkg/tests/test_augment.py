import numpy as np
import pytest

from locaug.augment import (
    AugmentSpec,
    augment_image,
    location_channels,
    make_coord_channels,
    make_distance_channel,
    make_linear_index_channel,
    scale_rgb,
)


class TestSpec:
    @pytest.mark.parametrize("variant,k", [
        ("rgb", 0), ("rgb+coord", 2), ("rgb+dist", 1),
        ("rgb+dist+coord", 3), ("rgb+lin", 1),
    ])
    def test_extra_channels(self, variant, k):
        assert AugmentSpec(variant).extra_channels == k
        assert AugmentSpec(variant).in_channels == 3 + k

    def test_rejects_unknown(self):
        with pytest.raises(ValueError):
            AugmentSpec("rgb+xyz")
        with pytest.raises(ValueError):
            AugmentSpec("rgb", "percent")


class TestCoordChannels:
    def test_3x3_unit(self):
        ch = make_coord_channels(3, 3)
        assert ch.shape == (1, 2, 3, 3)
        expected_rows = np.array([[0, 0, 0], [0.5, 0.5, 0.5], [1, 1, 1]])
        assert np.array_equal(ch[0, 0], expected_rows)
        assert np.array_equal(ch[0, 1], expected_rows.T)

    def test_degenerate_row_extent(self):
        ch = make_coord_channels(1, 4)
        assert np.array_equal(ch[0, 0], np.full((1, 4), 0.5))

    def test_3x3_symmetric(self):
        ch = make_coord_channels(3, 3, "symmetric")
        assert np.array_equal(ch[0, 0, :, 0], [-1.0, 0.0, 1.0])

    def test_row_channel_constant_along_w(self):
        ch = make_coord_channels(5, 7)
        assert np.all(ch[0, 0] == ch[0, 0, :, :1])
        assert np.all(ch[0, 1] == ch[0, 1, :1, :])

    def test_zero_extent(self):
        with pytest.raises(ValueError, match="zero extent"):
            make_coord_channels(0, 3)


class TestDistanceChannel:
    def test_3x3_values(self):
        ch = make_distance_channel(3, 3)[0, 0]
        assert ch[1, 1] == 0.0
        assert ch[0, 0] == 1.0
        assert np.isclose(ch[0, 1], 1 / np.sqrt(2))

    def test_single_pixel(self):
        assert make_distance_channel(1, 1)[0, 0, 0, 0] == 0.0

    def test_rotation_and_flip_invariance(self):
        for h, w in [(5, 5), (4, 6), (7, 4)]:
            ch = make_distance_channel(h, w)[0, 0]
            assert np.array_equal(ch, ch[::-1, :])
            assert np.array_equal(ch, ch[:, ::-1])
            assert np.array_equal(ch, ch[::-1, ::-1])

    def test_min_zero_at_center_for_odd_extents(self):
        ch = make_distance_channel(9, 7)[0, 0]
        assert ch.min() == 0.0
        assert ch[4, 3] == 0.0


class TestLinearIndexChannel:
    def test_2x2(self):
        ch = make_linear_index_channel(2, 2)[0, 0]
        assert np.allclose(ch, [[0, 1 / 3], [2 / 3, 1]])

    def test_single_pixel(self):
        assert make_linear_index_channel(1, 1)[0, 0, 0, 0] == 0.0

    def test_2x3_value(self):
        # (h*W + w) / (H*W - 1) at (1,0) -> 3/5
        ch = make_linear_index_channel(2, 3)[0, 0]
        assert np.isclose(ch[1, 0], 3 / 5)


class TestAugmentImage:
    def test_rgb_identity(self):
        img = np.random.default_rng(0).uniform(size=(2, 3, 4, 4))
        out = augment_image(img, AugmentSpec("rgb"))
        assert out is img

    def test_dist_coord_channel_order(self):
        img = np.zeros((1, 3, 32, 32))
        out = augment_image(img, AugmentSpec("rgb+dist+coord"))
        assert out.shape == (1, 6, 32, 32)
        coord = make_coord_channels(32, 32)
        dist = make_distance_channel(32, 32)
        assert np.array_equal(out[0, 3], coord[0, 0])
        assert np.array_equal(out[0, 4], coord[0, 1])
        assert np.array_equal(out[0, 5], dist[0, 0])
        # exact zero at the center pixel needs odd extents
        out_odd = location_channels(33, 33, AugmentSpec("rgb+dist+coord"))
        assert out_odd[0, 2, 16, 16] == 0.0

    def test_batch_replication(self):
        rng = np.random.default_rng(1)
        img = rng.uniform(size=(2, 3, 8, 8))
        out = augment_image(img, AugmentSpec("rgb+coord"))
        assert np.array_equal(out[0, 3:], out[1, 3:])

    def test_channels_independent_of_content(self):
        rng = np.random.default_rng(2)
        a = augment_image(rng.uniform(size=(1, 3, 6, 6)), AugmentSpec("rgb+dist+coord"))
        b = augment_image(rng.uniform(size=(1, 3, 6, 6)), AugmentSpec("rgb+dist+coord"))
        assert np.array_equal(a[:, 3:], b[:, 3:])

    def test_wrong_channel_count(self):
        with pytest.raises(ValueError, match="3"):
            augment_image(np.zeros((1, 4, 4, 4)), AugmentSpec("rgb"))

    @pytest.mark.parametrize("norm,lo,hi", [("unit_interval", 0, 1), ("symmetric", -1, 1)])
    def test_ranges(self, norm, lo, hi):
        for variant in ("rgb+coord", "rgb+dist", "rgb+dist+coord", "rgb+lin"):
            ch = location_channels(6, 9, AugmentSpec(variant, norm))
            assert ch.min() >= lo and ch.max() <= hi

    def test_scale_rgb(self):
        img = np.array([0.0, 0.5, 1.0])
        assert np.array_equal(scale_rgb(img, AugmentSpec("rgb", "symmetric")), [-1, 0, 1])
        assert np.array_equal(scale_rgb(img, AugmentSpec("rgb")), img)
