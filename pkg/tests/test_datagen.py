import numpy as np

from cgmca.datagen import generate_corpus, make_demo_corpus, render_digit
from cgmca.imaging import read_idx
from cgmca.train import DataSet, sample_stats


def test_render_shapes_and_range():
    rng = np.random.default_rng(0)
    for digit in range(10):
        img = render_digit(digit, rng)
        assert img.shape == (28, 28)
        assert img.dtype == np.uint8
        assert img.max() > 100  # visible ink


def test_generate_corpus_labels_and_shuffling():
    images, labels = generate_corpus(20, seed=1, digits=[2, 7])
    assert images.shape == (40, 28, 28)
    assert sorted(np.unique(labels)) == [2, 7]
    assert np.bincount(labels, minlength=10)[2] == 20
    # shuffled, not blocked by digit
    assert len(set(labels[:10])) > 1


def test_corpus_deterministic_given_seed(tmp_path):
    a = make_demo_corpus(tmp_path / "a", n_per_digit=15, seed=5, digits=[3, 4])
    b = make_demo_corpus(tmp_path / "b", n_per_digit=15, seed=5, digits=[3, 4])
    assert (a[0].read_bytes(), a[1].read_bytes()) == (b[0].read_bytes(), b[1].read_bytes())
    c = make_demo_corpus(tmp_path / "c", n_per_digit=15, seed=6, digits=[3, 4])
    assert a[0].read_bytes() != c[0].read_bytes()


def test_corpus_loads_through_idx_reader(tmp_path):
    ip, lp = make_demo_corpus(tmp_path, n_per_digit=25, seed=2, digits=[3])
    images = read_idx(ip, lp)
    assert images.n == 25
    assert np.all(images.labels == 3)
    assert 0.0 <= images.pixels.min() and images.pixels.max() <= 1.0


def test_class_covariance_has_substantial_rank(tmp_path):
    ip, lp = make_demo_corpus(tmp_path, n_per_digit=200, seed=3, digits=[3])
    images = read_idx(ip, lp)
    stats = sample_stats(DataSet(images.pixels))
    assert stats.r > 120
