import pytest

import witt


@pytest.fixture(autouse=True, scope="session")
def isolated_cache_root(tmp_path_factory):
    """Keep universal-polynomial tables out of the home directory."""
    with pytest.MonkeyPatch.context() as mp:
        home = tmp_path_factory.mktemp("asw-home")
        mp.setattr(witt, "cache_root", home)
        # worker processes import witt afresh
        mp.setenv("ASW_IWASAWA_HOME", str(home))
        yield
