import os
import sys

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

from poimlab.fixedpoint import Scale  # noqa: E402
from poimlab.models import (  # noqa: E402
    Cnn1d,
    DecisionTree,
    Linear,
    Mlp,
    QuantizedModel,
    Rnn,
    TreeNode,
)

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


def small_tree(d=3):
    # depth-2 tree: root on feature 0, left child on feature d-1
    return DecisionTree(d, (
        TreeNode(0, 1, 2),
        TreeNode(d - 1, 3, 4),
        TreeNode(label=1),
        TreeNode(label=0),
        TreeNode(label=1),
    ))


def archs_for(d):
    """One representative of every architecture family at input width ``d``."""
    out = [Linear(d), Mlp(d, (2, 1)), Cnn1d(d, 2, min(2, d)), Rnn(d, 2, min(2, d)), small_tree(d)]
    return out


def random_quantized(arch, rng, S=10, spread=None, version=0):
    spread = spread if spread is not None else 2 * S
    w = rng.integers(-spread, spread + 1, arch.n_weights).tolist()
    b = rng.integers(-spread, spread + 1, arch.n_biases).tolist()
    return QuantizedModel(arch, w, b, Scale.from_value(S), version)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- acceptance reporting -------------------------------------------------------

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not report.failed:
        return
    number, title = marker.args
    entry = _CRITERIA.setdefault(number, {"title": title, "parts": []})
    entry["parts"].append((item.name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        ok = all(outcome == "passed" for _, outcome in entry["parts"])
        failed = [name for name, outcome in entry["parts"] if outcome != "passed"]
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {entry['title']}"
        if failed:
            line += f"  (failing: {', '.join(failed)})"
        terminalreporter.write_line(line)
