import numpy as np
import pytest

from fairrerank.dataset import Interactions, PopularityPartition


@pytest.fixture
def tiny_train():
    """6 users x 5 items; items 0,1 popular (4 and 3 distinct users)."""
    triples = [
        (0, 0, 1.0), (0, 1, 1.0), (0, 2, 1.0),
        (1, 0, 1.0), (1, 1, 1.0),
        (2, 0, 1.0), (2, 1, 1.0),
        (3, 0, 1.0), (3, 3, 1.0),
        (4, 2, 1.0),
        (5, 4, 1.0),
    ]
    return Interactions.from_triples(triples, 6, 5)


def make_partition(short_flags):
    short = np.asarray(short_flags, dtype=bool)
    # counts consistent with the flags: short-head items get higher counts
    counts = np.where(short, 10, 1).astype(np.int64)
    return PopularityPartition(short_head=short, popularity_count=counts)
