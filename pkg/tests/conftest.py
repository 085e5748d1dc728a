import numpy as np
import pytest

from addrhop.chaos import DEFAULT_HASH_PARAMS, digest_sequence

SAMPLE_START = 3_000_000


@pytest.fixture(scope="session")
def digests_100k() -> np.ndarray:
    """Digests of 1e5 consecutive timestamps under default params.

    Shared by the uniformity, whiteness and avalanche checks (and the
    acceptance suite) so the expensive sequence is computed once per session.
    """
    return digest_sequence(SAMPLE_START, 100_000, DEFAULT_HASH_PARAMS)
