import pytest

from cgmca.datagen import make_demo_corpus


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """Tiny two-digit IDX corpus shared by the CLI plumbing tests."""
    out = tmp_path_factory.mktemp("corpus")
    images_path, labels_path = make_demo_corpus(out, n_per_digit=140, seed=11, digits=[2, 3])
    return str(images_path), str(labels_path)
