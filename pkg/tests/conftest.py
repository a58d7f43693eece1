from __future__ import annotations

import socket
import sys

import pytest

from ropetrain.bundles import TaskRegistry, builtin_bundle_root


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and item.module.__name__ == "test_acceptance":
        status = "PASS" if report.passed else "FAIL"
        print(f"[ACCEPTANCE] {item.name}: {status}", file=sys.__stdout__)


@pytest.fixture(autouse=True)
def no_network(monkeypatch):
    """Fail any test that tries to open a network connection."""

    def _blocked(*args, **kwargs):
        raise AssertionError("network access attempted during an offline test")

    monkeypatch.setattr(socket.socket, "connect", _blocked)
    monkeypatch.setattr(socket, "create_connection", _blocked)


@pytest.fixture(scope="session")
def registry() -> TaskRegistry:
    return TaskRegistry(builtin_bundle_root())


@pytest.fixture(scope="session")
def tictactoe(registry):
    return registry.get("tictactoe")


@pytest.fixture(scope="session")
def tetris(registry):
    return registry.get("tetris")


@pytest.fixture(scope="session")
def outline(registry):
    return registry.get("outline_assistant")
