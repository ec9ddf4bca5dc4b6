import os

import pytest


def pytest_collection_modifyitems(config, items):
    if os.environ.get("DNAMP_SLOW", "") not in ("", "0"):
        return
    skip = pytest.mark.skip(reason="slow tier: set DNAMP_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)
