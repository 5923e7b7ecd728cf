from __future__ import annotations

import time

import pytest

from pbgladder.discretize import build_quadratic_grid, build_uniform_grid
from pbgladder.dos import GeneralizedLorentzian, IsotropicBandEdge
from pbgladder.dynamics import LadderConfig, propagate
from pbgladder.scenario import build, preset, resolve

ISO = IsotropicBandEdge(0.0, 1.0, 1.5)
LOR = GeneralizedLorentzian(0.0, 1.0, 6, 0.5, 1.0)

ISO_DETUNINGS = [(-1.0, 0.5), (0.3, -0.4), (-2.0, 2.0)]
LOR_DETUNINGS = [(0.1, 0.3), (-0.5, 1.0), (1.5, -1.2)]


def small_isotropic(d12: float, d23: float, n: int = 6, width: float = 9.9) -> LadderConfig:
    res = build_quadratic_grid(ISO, n, width / n**2, transitions=(d12, d23))
    return LadderConfig(d12, d23, res)


def small_lorentzian(d12: float, d23: float, n: int = 6, half: float = 4.0) -> LadderConfig:
    res = build_uniform_grid(LOR, -half, half, n, transitions=(d12, d23))
    return LadderConfig(d12, d23, res)


def small_configs(n: int = 6) -> list[tuple[str, LadderConfig]]:
    out = [(f"iso{d12:+g}{d23:+g}", small_isotropic(d12, d23, n)) for d12, d23 in ISO_DETUNINGS]
    out += [(f"lor{d12:+g}{d23:+g}", small_lorentzian(d12, d23, n)) for d12, d23 in LOR_DETUNINGS]
    return out


class PresetRuns:
    """Lazily propagated presets, shared by the whole session."""

    def __init__(self):
        self._cache: dict[tuple[str, int | None], tuple] = {}

    def get(self, name: str, n_modes: int | None = None):
        key = (name, n_modes)
        if key not in self._cache:
            scenario = resolve(preset(name), {"n_modes": n_modes})
            _, _, config = build(scenario)
            start = time.perf_counter()
            series = propagate(config, scenario.run["t_end"], scenario.run["n_samples"])
            self._cache[key] = (series, time.perf_counter() - start, scenario)
        return self._cache[key]

    def series(self, name: str, n_modes: int | None = None):
        return self.get(name, n_modes)[0]


@pytest.fixture(scope="session")
def preset_runs() -> PresetRuns:
    return PresetRuns()


# -- per-criterion summary for the acceptance suite ------------------------------

_CRITERIA: dict[int, dict] = {}


@pytest.fixture
def detail(request):
    """Attach a short measured-value note to the criterion summary line."""

    def note(text: str) -> None:
        request.node.acceptance_detail = text

    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    entry = _CRITERIA.setdefault(number, {"title": title, "passed": True, "seen": False, "details": []})
    if report.when == "call" or (report.when == "setup" and report.failed):
        entry["seen"] = True
        if report.failed:
            entry["passed"] = False
        detail = getattr(item, "acceptance_detail", None)
        if detail:
            entry["details"].append(detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        if not entry["seen"]:
            continue
        status = "PASS" if entry["passed"] else "FAIL"
        line = f"criterion {number:2d} {status}  {entry['title']}"
        if entry["details"]:
            line += "  [" + "; ".join(entry["details"]) + "]"
        terminalreporter.write_line(line)
