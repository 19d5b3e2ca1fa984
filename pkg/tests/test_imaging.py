import numpy as np
import pytest

from oracles import (
    median_reference,
    read_pgm,
    ssim_reference,
    wiener_reference,
    write_idx_fixture,
)

from cgmca.errors import FeasibilityError, IdxFormatError
from cgmca.imaging import (
    ImageSet,
    corrupt,
    filter_pipeline,
    gaussian_window,
    image_to_vec,
    median_denoise,
    montage_grid,
    rank_t_covariance,
    read_idx,
    rescale01,
    split_digit,
    ssim,
    vec_to_image,
    wiener_denoise,
    write_pgm,
)
from cgmca.linalg import psd_factor
from cgmca.train import DataSet, sample_stats


def fixture_images(seed=0, count=2):
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, size=(count, 28, 28), dtype=np.uint8), rng.integers(
        0, 10, size=count, dtype=np.uint8
    )


class TestReadIdx:
    @pytest.mark.parametrize("compress", [False, True])
    def test_round_trip_exact(self, tmp_path, compress):
        images, labels = fixture_images()
        suffix = ".gz" if compress else ""
        ip, lp = tmp_path / f"imgs{suffix}", tmp_path / f"lbls{suffix}"
        write_idx_fixture(images, labels, ip, lp, compress=compress)
        loaded = read_idx(ip, lp)
        assert loaded.n == 2
        assert np.array_equal(loaded.labels, labels)
        for j in range(2):
            img = vec_to_image(loaded.pixels[:, j])
            assert np.array_equal(img, images[j] / 255.0)

    def test_wrong_magic_in_labels(self, tmp_path):
        import struct

        images, labels = fixture_images()
        ip, lp = tmp_path / "imgs", tmp_path / "lbls"
        write_idx_fixture(images, labels, ip, lp)
        # label file carrying the image magic
        lp.write_bytes(struct.pack(">II", 0x803, 2) + labels.tobytes())
        with pytest.raises(IdxFormatError, match="magic"):
            read_idx(ip, lp)

    def test_truncated_image_file(self, tmp_path):
        images, labels = fixture_images()
        ip, lp = tmp_path / "imgs", tmp_path / "lbls"
        write_idx_fixture(images, labels, ip, lp)
        ip.write_bytes(ip.read_bytes()[:-10])
        with pytest.raises(IdxFormatError, match="truncated"):
            read_idx(ip, lp)

    def test_count_mismatch(self, tmp_path):
        images, labels = fixture_images(count=3)
        ip, lp = tmp_path / "imgs", tmp_path / "lbls"
        write_idx_fixture(images, labels, ip, lp)
        lp2 = tmp_path / "lbls2"
        write_idx_fixture(images[:2], labels[:2], tmp_path / "imgs2", lp2)
        with pytest.raises(IdxFormatError, match="count"):
            read_idx(ip, lp2)


class TestSplit:
    def test_partition_is_disjoint_union_with_rounded_share(self):
        rng = np.random.default_rng(60)
        labels = rng.integers(0, 10, size=500)
        images = ImageSet(pixels=rng.random((784, 500)), labels=labels)
        for digit in range(10):
            split = split_digit(images, digit, 0.8, seed=3)
            inds = np.flatnonzero(labels == digit)
            combined = np.sort(np.concatenate([split.train_idx, split.test_idx]))
            assert np.array_equal(combined, inds)
            assert split.train_idx.size == int(round(0.8 * inds.size))
            assert np.intersect1d(split.train_idx, split.test_idx).size == 0

    def test_seeded_and_deterministic(self):
        rng = np.random.default_rng(61)
        images = ImageSet(
            pixels=rng.random((784, 200)), labels=rng.integers(0, 10, size=200)
        )
        a = split_digit(images, 3, 0.8, seed=7)
        b = split_digit(images, 3, 0.8, seed=7)
        c = split_digit(images, 3, 0.8, seed=8)
        assert np.array_equal(a.train_idx, b.train_idx)
        assert not np.array_equal(a.train_idx, c.train_idx)


class TestCorrupt:
    def test_zero_sigma_is_bit_identical(self):
        rng = np.random.default_rng(62)
        images = ImageSet(pixels=rng.random((784, 5)), labels=np.zeros(5, dtype=int))
        out = corrupt(images, sigma=0.0, seed=1)
        assert np.array_equal(out.pixels, images.pixels)

    def test_noise_std_within_two_percent(self):
        rng = np.random.default_rng(63)
        images = ImageSet(pixels=rng.random((784, 2000)), labels=np.zeros(2000, dtype=int))
        out = corrupt(images, sigma=0.1, seed=2)
        noise = out.pixels - images.pixels
        assert abs(noise.std() - 0.1) <= 0.002

    def test_noise_mean_within_three_standard_errors(self):
        rng = np.random.default_rng(64)
        n = 1000
        images = ImageSet(pixels=rng.random((784, n)), labels=np.zeros(n, dtype=int))
        sigma = 0.1
        noise = corrupt(images, sigma=sigma, seed=3).pixels - images.pixels
        assert abs(noise.mean()) <= 3 * sigma / np.sqrt(784 * n)

    def test_same_seed_identical(self):
        rng = np.random.default_rng(65)
        images = ImageSet(pixels=rng.random((784, 10)), labels=np.zeros(10, dtype=int))
        a = corrupt(images, sigma=0.1, seed=9)
        b = corrupt(images, sigma=0.1, seed=9)
        assert np.array_equal(a.pixels, b.pixels)

    def test_negative_sigma_rejected(self):
        rng = np.random.default_rng(66)
        images = ImageSet(pixels=rng.random((784, 3)), labels=np.zeros(3, dtype=int))
        with pytest.raises(ValueError):
            corrupt(images, sigma=-0.1)


class TestWiener:
    def test_constant_image_unchanged(self):
        img = np.full((28, 28), 0.37)
        out = wiener_denoise(img)
        assert np.allclose(out, img, atol=1e-12)

    def test_single_bright_pixel_reduced_and_matches_reference(self):
        img = np.zeros((7, 7))
        img[3, 3] = 1.0
        out = wiener_denoise(img)
        assert out[3, 3] < 1.0
        assert np.allclose(out, wiener_reference(img), atol=1e-12)

    def test_reduces_variance_of_noisy_constant(self):
        rng = np.random.default_rng(67)
        img = 0.5 + 0.01 * rng.normal(size=(28, 28))
        out = wiener_denoise(img)
        assert out.var() < img.var()

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_reference_on_random_images(self, seed):
        rng = np.random.default_rng(70 + seed)
        img = rng.normal(0.5, 0.3, size=(28, 28))
        assert np.allclose(wiener_denoise(img), wiener_reference(img), atol=1e-12)


class TestMedian:
    def test_constant_interior_unchanged(self):
        img = np.full((10, 10), 0.8)
        out = median_denoise(img)
        assert np.allclose(out[1:-1, 1:-1], 0.8)

    def test_isolated_impulse_removed(self):
        img = np.full((9, 9), 0.2)
        img[4, 4] = 5.0
        out = median_denoise(img)
        assert out[4, 4] == 0.2

    def test_exhaustive_against_sorted_middle(self):
        rng = np.random.default_rng(71)
        img = rng.normal(size=(28, 28))
        assert np.array_equal(median_denoise(img), median_reference(img))

    def test_known_three_by_three(self):
        img = np.arange(9, dtype=float).reshape(3, 3)
        assert np.array_equal(median_denoise(img), median_reference(img))


class TestFilterPipeline:
    def test_composition_order(self):
        rng = np.random.default_rng(72)
        vec = rng.normal(0.4, 0.3, size=784)
        manual = image_to_vec(
            rescale01(median_denoise(wiener_denoise(vec_to_image(vec))))
        )
        assert np.array_equal(filter_pipeline(vec), manual)

    def test_output_range_in_unit_interval(self):
        rng = np.random.default_rng(73)
        for _ in range(3):
            out = filter_pipeline(rng.normal(size=784))
            assert out.min() >= 0.0 and out.max() <= 1.0

    def test_constant_zero_input_unchanged(self):
        # zero is the constant compatible with the median filter's zero
        # padding; nonzero constants lose their corners to the padding
        out = filter_pipeline(np.zeros(784))
        assert np.array_equal(out, np.zeros(784))

    def test_nonzero_constant_survives_outside_padded_corners(self):
        vec = np.full(784, 0.42)
        out = filter_pipeline(vec)
        img = vec_to_image(out)
        interior = img[1:-1, 1:-1]
        assert np.allclose(interior, interior[0, 0])


class TestSsim:
    def test_self_similarity_is_exactly_one(self):
        rng = np.random.default_rng(74)
        img = rng.random((28, 28))
        assert ssim(img, img).value == 1.0

    def test_inverted_image_scores_much_lower(self):
        rng = np.random.default_rng(75)
        img = (rng.random((28, 28)) > 0.6).astype(float)
        assert ssim(img, 1.0 - img).value < 0.2

    def test_symmetry(self):
        rng = np.random.default_rng(76)
        x = rng.random((28, 28))
        y = rng.random((28, 28))
        assert abs(ssim(x, y).value - ssim(y, x).value) <= 1e-12

    def test_eight_by_eight_fixture_matches_reference(self):
        rng = np.random.default_rng(77)
        x = rng.random((8, 8))
        y = np.clip(x + rng.normal(0, 0.2, size=(8, 8)), 0, 1)
        assert ssim(x, y).value == pytest.approx(ssim_reference(x, y), abs=1e-10)

    @pytest.mark.parametrize("seed", range(3))
    def test_random_28x28_matches_reference(self, seed):
        rng = np.random.default_rng(80 + seed)
        x = rng.random((28, 28))
        y = np.clip(x + rng.normal(0, 0.15, size=(28, 28)), 0, 1)
        assert ssim(x, y).value == pytest.approx(ssim_reference(x, y), abs=1e-10)

    def test_params_recorded(self):
        score = ssim(np.zeros((28, 28)), np.ones((28, 28)), dynamic_range=1.0)
        assert score.params.k1 == 0.01
        assert score.params.k2 == 0.03
        assert score.params.dynamic_range == 1.0
        assert "11x11" in score.params.window

    def test_window_normalized(self):
        win = gaussian_window(11, 1.5)
        assert win.sum() == pytest.approx(1.0, abs=1e-15)
        assert win.shape == (11, 11)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            ssim(np.zeros((28, 28)), np.zeros((27, 28)))


def digit_image_set(rng, n, rank=40):
    base = rng.normal(size=(784, rank))
    coeffs = rng.normal(size=(rank, n)) * np.logspace(0, -2, rank)[:, None]
    pixels = np.clip(0.2 + 0.1 * (base @ coeffs), 0, 1)
    return ImageSet(pixels=pixels, labels=np.full(n, 3, dtype=int))


class TestRankTCovariance:
    def test_full_rank_t_recovers_sample_covariance(self):
        rng = np.random.default_rng(81)
        images = digit_image_set(rng, 30, rank=12)
        stats = sample_stats(DataSet(images.pixels))
        cov = rank_t_covariance(images, stats.r)
        sample_cov = stats.s @ stats.s.T
        rel = np.linalg.norm(cov.cc - sample_cov) / np.linalg.norm(sample_cov)
        assert rel <= 1e-10

    def test_rank_one_keeps_top_eigenvalue(self):
        rng = np.random.default_rng(82)
        images = digit_image_set(rng, 40)
        cov = rank_t_covariance(images, 1)
        stats = sample_stats(DataSet(images.pixels))
        assert cov.r_cov == 1
        assert np.trace(cov.cc) == pytest.approx(stats.svd.sigma[0] ** 2, rel=1e-12)

    def test_beats_random_rank_t_alternatives(self):
        rng = np.random.default_rng(83)
        images = digit_image_set(rng, 50, rank=20)
        t = 5
        cov = rank_t_covariance(images, t)
        stats = sample_stats(DataSet(images.pixels))
        sample_cov = stats.s @ stats.s.T
        best = np.linalg.norm(sample_cov - cov.cc)
        for _ in range(10):
            g = rng.normal(size=(784, t))
            alt = g @ g.T
            alt *= np.trace(sample_cov) / np.trace(alt)
            assert best <= np.linalg.norm(sample_cov - alt)

    def test_t_beyond_rank_rejected(self):
        rng = np.random.default_rng(84)
        images = digit_image_set(rng, 20, rank=10)
        stats = sample_stats(DataSet(images.pixels))
        with pytest.raises(FeasibilityError):
            rank_t_covariance(images, stats.r + 1)

    @pytest.mark.parametrize("t", [1, 3, 7])
    def test_output_passes_psd_factor_with_matching_rank(self, t):
        rng = np.random.default_rng(85)
        images = digit_image_set(rng, 40, rank=15)
        cov = rank_t_covariance(images, t)
        factored = psd_factor(cov.cc)
        assert factored.r_cov == t
        assert cov.k == 784


class TestPgmAndMontage:
    def test_pgm_round_trip_with_clamping(self, tmp_path):
        rng = np.random.default_rng(86)
        img = rng.normal(0.5, 0.6, size=(28, 28))  # some values outside [0, 1]
        path = tmp_path / "img.pgm"
        write_pgm(path, img)
        back = read_pgm(path)
        expected = np.clip(np.rint(img * 255), 0, 255).astype(np.uint8)
        assert np.array_equal(back, expected)

    def test_montage_four_rows_single_digit(self):
        rng = np.random.default_rng(87)
        tiles = [{3: rng.random((28, 28))} for _ in range(4)]
        grid = montage_grid(tiles, [3])
        assert grid.shape == (4 * 28, 28)
        assert np.array_equal(grid[:28], tiles[0][3])

    def test_montage_ten_digits(self):
        rng = np.random.default_rng(88)
        tiles = [{d: rng.random((28, 28)) for d in range(10)} for _ in range(4)]
        grid = montage_grid(tiles, range(10))
        assert grid.shape == (4 * 28, 10 * 28)
        # column order ascending by digit
        assert np.array_equal(grid[:28, :28], tiles[0][0])
        assert np.array_equal(grid[28 * 3 :, 28 * 9 :], tiles[3][9])

    def test_montage_missing_digit_column_omitted(self, caplog):
        rng = np.random.default_rng(89)
        tiles = [{d: rng.random((28, 28)) for d in (1, 2)} for _ in range(4)]
        del tiles[2][1]
        import logging

        with caplog.at_level(logging.WARNING):
            grid = montage_grid(tiles, [1, 2])
        assert grid.shape == (4 * 28, 28)
        assert any("omitted" in rec.message for rec in caplog.records)

    def test_montage_tile_copy_contract(self, tmp_path):
        rng = np.random.default_rng(90)
        tile = rng.random((28, 28))
        grid = montage_grid([{5: tile}, {5: tile}, {5: tile}, {5: tile}], [5])
        path = tmp_path / "m.pgm"
        write_pgm(path, grid)
        back = read_pgm(path)
        assert back[0, 0] == np.clip(np.rint(tile[0, 0] * 255), 0, 255).astype(np.uint8)
