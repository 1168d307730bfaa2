"""Tag selection: ``pytest --tags basic,oracle`` runs only tests carrying those tags."""

import pytest

from tests.test_tags import TestTags


def pytest_addoption(parser):
    parser.addoption("--tags", default="all",
                     help="comma-separated test tags to run (default: all)")


def pytest_configure(config):
    for tag in TestTags:
        config.addinivalue_line("markers", f"{tag.name.lower()}: tests tagged {tag.name}")


def pytest_collection_modifyitems(config, items):
    wanted = {TestTags[name.strip().upper()]
              for name in config.getoption("--tags").split(",") if name.strip()}
    selected, deselected = [], []
    for item in items:
        tags = getattr(getattr(item, "function", None), "tags", set())
        for tag in tags:
            item.add_marker(getattr(pytest.mark, tag.name.lower()))
        if TestTags.ALL in wanted or tags & wanted:
            selected.append(item)
        else:
            deselected.append(item)
    if deselected:
        config.hook.pytest_deselected(items=deselected)
        items[:] = selected
