import numpy as np
import pytest

from svcache.catalog import (Catalog, CatalogConfig, generate_catalog,
                             generate_participants)

KIB = 1024
MIB = 1024 * 1024
GIB = 1024 ** 3


@pytest.fixture(scope="session")
def small_catalog() -> Catalog:
    return generate_catalog(CatalogConfig(n_videos=2_000, seed=11))


@pytest.fixture(scope="session")
def small_corpus(small_catalog):
    participants = generate_participants(small_catalog, 20, 12, seed=3)
    return small_catalog, participants


def make_catalog(ids, sizes=None, durations=None, plays=None) -> Catalog:
    """Hand-built catalog for unit tests; ids are sorted by the constructor's
    contract, so pass them sorted."""
    n = len(ids)
    return Catalog(
        np.array(sorted(ids), dtype=np.uint64),
        np.array(sizes if sizes is not None else [1] * n, dtype=np.int64),
        np.array(durations if durations is not None else [1000] * n, dtype=np.int64),
        np.array(plays if plays is not None else [1] * n, dtype=np.int64),
    )
