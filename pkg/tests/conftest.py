import numpy as np
import pytest
from pathlib import Path

CACHE_DIR = Path(__file__).resolve().parent / "_cache"


def cached_arrays(key: str, builder):
    """Disk-memoize a dict of numpy arrays keyed by an explicit tag.

    The heavy acceptance ensembles are deterministic functions of their
    seeds, so caching them makes test reruns cheap without changing any
    result.  Delete tests/_cache to force recomputation.
    """
    CACHE_DIR.mkdir(exist_ok=True)
    path = CACHE_DIR / (key + ".npz")
    if path.exists():
        with np.load(path) as z:
            return {k: z[k] for k in z.files}
    data = builder()
    np.savez_compressed(path, **data)
    return data


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
