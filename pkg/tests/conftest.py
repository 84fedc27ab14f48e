import math
import warnings
from collections import OrderedDict

import numpy as np
import pytest

from cavitybec.params import ModelParams
from cavitybec.presets import COLLISION_PROTOCOL

_criteria = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    number, title = marker
    entry = _criteria.setdefault(number, {"title": title, "results": []})
    entry["results"].append((report.nodeid.split("::")[-1], report.passed))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        report.criterion = tuple(mark.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        ok = all(passed for _, passed in entry["results"])
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {entry['title']}")
        if not ok:
            for name, passed in entry["results"]:
                terminalreporter.write_line(f"    {'pass' if passed else 'FAIL'}  {name}")


@pytest.fixture(scope="session")
def protocol():
    return COLLISION_PROTOCOL


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


def model(**changes):
    base = dict(atom_count=1e5, U0=0.4414, delta_c=-300.0, omega_sw=50.0, kappa=24.0, gamma=0.024, eta=81.0)
    base.update(changes)
    return ModelParams(**base)


def random_stable_models(seed, count):
    """Random stable single-stable-branch parameter sets around the laboratory scale."""
    from cavitybec.errors import NumericError
    from cavitybec.lindyn import resolve_working_point

    rng = np.random.default_rng(seed)
    found = []
    while len(found) < count:
        kappa = rng.uniform(5.0, 80.0)
        sw = rng.uniform(0.0, 150.0)
        m = model(
            kappa=kappa,
            gamma=kappa * 10 ** rng.uniform(-4, -2),
            omega_sw=sw,
            eta=rng.uniform(10.0, 150.0),
            delta_c=rng.uniform(-1.0, 4.0) * math.sqrt(4 + 2 * sw) * 2,
        )
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                wp = resolve_working_point(m, "only_stable")
            except NumericError:
                continue
        if wp.G > 0:
            found.append((m, wp))
    return found
