import pytest

from nilminfer.synth import gen_corpus


@pytest.fixture(scope="session")
def default_corpus(tmp_path_factory):
    """The 20-home x 14-day seed-7 corpus, with CSVs and manifest on disk."""
    out = tmp_path_factory.mktemp("default_corpus")
    return gen_corpus(20, seed=7, days=14, out_dir=out)


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """A 5-home x 7-day corpus for protocol and CLI tests (one full week so
    every module accepts it)."""
    out = tmp_path_factory.mktemp("small_corpus")
    return gen_corpus(5, seed=3, days=7, out_dir=out)
