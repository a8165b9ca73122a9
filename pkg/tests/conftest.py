from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kgcert import build_graph, parse_raw_dataset
from kgcert.data import toy_dataset_paths


@pytest.fixture(scope="session")
def toy_raw():
    paths = toy_dataset_paths()
    return parse_raw_dataset(
        paths["triples"],
        paths["entity_aliases"],
        paths["relation_aliases"],
        paths["corpus"],
    )


@pytest.fixture(scope="session")
def toy_graph(toy_raw):
    return build_graph(toy_raw)
