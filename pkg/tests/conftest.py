import os
from pathlib import Path

import pytest

from patchlab.compiler import Compiler, SolcCache
from patchlab.errors import ToolchainMissing

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "fixtures"
SOLC_VERSION = "0.4.26"


def solc_cache_dir() -> Path:
    return Path(os.environ.get("PATCHLAB_SOLC_CACHE", REPO_ROOT / ".solc-cache"))


@pytest.fixture(scope="session")
def solc_cache() -> SolcCache:
    cache = SolcCache(solc_cache_dir())
    try:
        # Seeds from the npm registry on first use when the cache is empty;
        # offline runs need the committed cache (see README).
        cache.ensure(SOLC_VERSION, allow_network=True)
    except ToolchainMissing as exc:
        pytest.skip(f"solc {SOLC_VERSION} unavailable: {exc}")
    return cache


@pytest.fixture(scope="session")
def compiler(solc_cache) -> Compiler:
    return Compiler(solc_cache, allow_network=False)


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    if not FIXTURES.is_dir():
        pytest.skip("bundled fixtures directory missing")
    return FIXTURES
