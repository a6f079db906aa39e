from importlib import resources
from pathlib import Path

import pytest

from typelink.annotations import read_documents, read_gold
from typelink.lexicon import load_lexicon
from typelink.matcher import annotate_corpus
from typelink.type_system import default_type_map
from typelink.typer import TrainConfig, build_examples, train

FIXTURES = Path(str(resources.files("typelink.data").joinpath("fixtures")))


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def type_map():
    return default_type_map()


@pytest.fixture(scope="session")
def lexicon(type_map):
    return load_lexicon(type_map=type_map)


@pytest.fixture(scope="session")
def fixture_docs():
    return read_documents(FIXTURES / "docs.jsonl")


@pytest.fixture(scope="session")
def fixture_gold(fixture_docs):
    return read_gold(FIXTURES / "gold.jsonl", {d.id: d for d in fixture_docs})


@pytest.fixture(scope="session")
def fixture_sets(lexicon, fixture_docs):
    return annotate_corpus(lexicon, fixture_docs)


@pytest.fixture(scope="session")
def fixture_typer(lexicon, type_map):
    docs = read_documents(FIXTURES / "train_docs.jsonl")
    gold = read_gold(FIXTURES / "train.jsonl")
    examples = build_examples(docs, gold, lexicon, type_map, window_k=64)
    model, _ = train(examples, TrainConfig(epochs=5, seed=1), type_map.groups)
    return model


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    from test_acceptance import ACCEPTANCE_KEY

    lines = config.stash.get(ACCEPTANCE_KEY, None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(lines):
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
