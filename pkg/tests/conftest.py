import pytest
from hypothesis import strategies as st

import storage
from instance import random_instance
from scenarios import COMPLEMENTS, DISJOINT, FOUR_CLIENT, LONE_PACKET


@pytest.fixture(autouse=True)
def isolated_cache(tmp_path, monkeypatch):
    """Keep the oracle cache out of the working tree."""
    cache_dir = tmp_path / "cache"
    monkeypatch.setattr(storage, "CACHE_DIR", cache_dir)
    monkeypatch.setattr(storage, "CACHE_FILE", cache_dir / "oracle_cache.json")
    return cache_dir


@pytest.fixture
def lone_packet():
    return LONE_PACKET


@pytest.fixture
def complements():
    return COMPLEMENTS


@pytest.fixture
def four_client():
    return FOUR_CLIENT


@pytest.fixture
def disjoint():
    return DISJOINT


def instances(max_n=6, max_k=4):
    """Random valid instances drawn through the seeded generator."""
    return st.builds(
        random_instance,
        n=st.integers(min_value=1, max_value=max_n),
        k=st.integers(min_value=1, max_value=max_k),
        density=st.sampled_from([0.3, 0.5, 0.8]),
        seed=st.integers(min_value=0, max_value=2**32 - 1),
    )
