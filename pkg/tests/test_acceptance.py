"""Exit criteria. Each test carries ``@pytest.mark.acceptance(number, title)``;
the terminal summary prints one PASS/FAIL line per criterion."""

import math

import numpy as np
import pytest

from conftest import ISO, LOR_DETUNINGS, ISO_DETUNINGS, small_isotropic, small_lorentzian
from pbgladder.analysis import (
    correlation,
    dominant_frequency,
    inphase_metric,
    peak_amplitude,
    surviving_population,
    trapping_fraction,
)
from pbgladder.discretize import build_quadratic_grid, build_recurrence_grid, build_uniform_grid, compute_shift
from pbgladder.dos import GeneralizedLorentzian, IsotropicBandEdge, isotropic_rho0, spectral_response
from pbgladder.dynamics import TimeSeries, propagate
from pbgladder.oracle import RabiModel, dense_propagate, isotropic_shift_closed_form, rabi_populations
from pbgladder.scenario import preset_names

TRANSIENT = 5.0
PRESETS = preset_names()


def acceptance(number, title):
    return pytest.mark.acceptance(number, title)


def dynamic(series: TimeSeries, values):
    return np.asarray(values)[series.times >= TRANSIENT]


def quarter(values, k):
    n = len(values)
    return values[k * n // 4 : (k + 1) * n // 4]


def ptp(values):
    return float(np.max(values) - np.min(values))


@acceptance(1, "unitarity |norm^2 - 1| < 1e-6 on every preset; fig2 under 300 s")
@pytest.mark.slow
@pytest.mark.parametrize("name", PRESETS)
def test_01_unitarity(name, preset_runs, detail):
    series, elapsed, _ = preset_runs.get(name)
    drift = float(np.max(np.abs(series.norm - 1.0)))
    note = f"{name} drift {drift:.1e}"
    if name == "fig2":
        note += f", {elapsed:.0f} s"
    detail(note)
    assert drift < 1e-6
    if name == "fig2":
        assert elapsed < 300


@acceptance(2, "N=6 propagate vs dense oracle, max amplitude error < 1e-8 up to t=5")
@pytest.mark.parametrize(
    "kind, d12, d23",
    [("iso", *d) for d in ISO_DETUNINGS] + [("lor", *d) for d in LOR_DETUNINGS],
)
def test_02_oracle_equivalence(kind, d12, d23, detail):
    cfg = small_isotropic(d12, d23) if kind == "iso" else small_lorentzian(d12, d23)
    worst = 0.0
    for t in np.linspace(0.5, 5.0, 10):
        got = propagate(cfg, float(t), 3).final_state.vector()
        ref = dense_propagate(cfg, float(t)).vector()
        worst = max(worst, float(np.max(np.abs(got - ref))))
    if (kind, d12, d23) in (("iso", *ISO_DETUNINGS[0]), ("lor", *LOR_DETUNINGS[0])):
        detail(f"{kind} {worst:.1e}")
    assert worst < 1e-8


@acceptance(3, "grid identity < 1e-12; sum G^2 vs integral SR within 1% for N >= 100")
def test_03_grid_identity(detail):
    dw = 4.4e-4
    quad_grid = build_quadratic_grid(ISO, 150, dw)
    rec = build_recurrence_grid(ISO, 0.0, 150, rho0=isotropic_rho0(dw))
    rel = float(np.max(np.abs(rec.frequencies - quad_grid.frequencies) / quad_grid.frequencies))
    detail(f"identity {rel:.1e}")
    assert rel < 1e-12


@acceptance(3, "grid identity < 1e-12; sum G^2 vs integral SR within 1% for N >= 100")
@pytest.mark.parametrize("n", [100, 150, 300])
def test_03_spectral_quadrature(n, detail):
    from scipy.integrate import quad

    lor = GeneralizedLorentzian(0.0, 1.0, 6, 0.5, 1.0)
    lor_dense = GeneralizedLorentzian(0.0, 1.0, 6, 0.5, 1.0, rho0=5.0)
    grids = [
        (ISO, build_quadratic_grid(ISO, n, 9.9 / n**2)),
        (ISO, build_recurrence_grid(ISO, 0.0, n, rho0=isotropic_rho0(9.9 / n**2))),
        (lor, build_uniform_grid(lor, -20.0, 20.0, n)),
        (lor_dense, build_recurrence_grid(lor_dense, 1.5, n)),
    ]
    worst = 0.0
    for model, res in grids:
        low, up = res.band
        for transition, g in (("upper", res.couplings_upper), ("lower", res.couplings_lower)):
            if isinstance(model, IsotropicBandEdge):
                exact = 2 * model.coupling(transition) * math.sqrt(up - model.edge) / math.pi
            else:
                sr = lambda w: spectral_response(model, transition, w)  # noqa: E731
                exact = quad(sr, low, up, points=[0.0] if low < 0 < up else None, limit=400)[0]
            worst = max(worst, abs(float(np.sum(g**2)) - exact) / exact)
    if n == 100:
        detail(f"quadrature N=100 {worst:.1e}")
    assert worst < 0.01


@acceptance(4, "isotropic shift matches the closed form to 1e-10 at 5 in-gap detunings")
def test_04_shift_closed_form(detail):
    model = IsotropicBandEdge(0.0, 1.0, 1.5)
    band = (0.0, 9.9)
    worst = 0.0
    for delta in (-4.0, -2.0, -1.0, -0.1, 0.0):
        got = compute_shift(model, delta, band, "upper")
        ref = isotropic_shift_closed_form(1.0, delta, 9.9)
        worst = max(worst, abs(got - ref) / abs(ref))
    edge = compute_shift(model, 0.0, band, "upper")
    edge_rel = abs(edge + (2 / math.pi) / math.sqrt(9.9)) / abs(edge)
    detail(f"{worst:.1e}, edge {edge_rel:.1e}")
    assert worst < 1e-10
    assert edge_rel < 1e-10


@acceptance(5, "fig2: tail trapping of levels 1 and 2 > 0.05, tail P1+P2+P3 > 0.5")
@pytest.mark.slow
def test_05_fig2(preset_runs, detail):
    series = preset_runs.series("fig2")
    t1, t2 = trapping_fraction(series, 1), trapping_fraction(series, 2)
    total = trapping_fraction(series, 1) + trapping_fraction(series, 2) + trapping_fraction(series, 3)
    detail(f"P1 {t1:.3f}, P2 {t2:.3f}, total {total:.3f}")
    assert t1 > 0.05 and t2 > 0.05
    assert total > 0.5


@acceptance(6, "fig3: surviving 0.85 +- 0.10, undamped P1, fig3b P2/P3 in phase and within 0.05")
@pytest.mark.slow
@pytest.mark.parametrize("name", ["fig3a", "fig3b"])
def test_06_fig3(name, preset_runs, detail):
    series = preset_runs.series(name)
    end = float(series.times[-1])
    surviving = surviving_population(series, (TRANSIENT, end))
    second, last = ptp(quarter(series.p1, 1)), ptp(quarter(series.p1, 3))
    note = f"{name} surviving {surviving:.3f}, ptp ratio {last / second:.2f}"
    checks = [abs(surviving - 0.85) <= 0.10, last >= 0.5 * second]
    if name == "fig3b":
        corr = inphase_metric(series, 2, 3, (TRANSIENT, end))
        gap = float(np.max(np.abs(dynamic(series, series.p2 - series.p3))))
        note += f", corr {corr:.3f}, max|P2-P3| {gap:.3f}"
        checks += [corr > 0.9, gap < 0.05]
    detail(note)
    assert all(checks)


@acceptance(7, "fig5: std P2 < 0.2 std P1 in the dynamic regime; P1 peak-to-peak >= 0.1")
@pytest.mark.slow
@pytest.mark.parametrize("name", ["fig5a", "fig5b"])
def test_07_fig5(name, preset_runs, detail):
    series = preset_runs.series(name)
    s1, s2 = float(np.std(dynamic(series, series.p1))), float(np.std(dynamic(series, series.p2)))
    swing = ptp(dynamic(series, series.p1))
    detail(f"{name} std ratio {s2 / s1:.3f}, ptp {swing:.3f}")
    assert s2 < 0.2 * s1
    assert swing >= 0.1


@acceptance(8, "fig6 tail P1 < 0.1 while fig5a tail P1 > 0.1")
@pytest.mark.slow
def test_08_fig6_vs_fig5a(preset_runs, detail):
    decayed = trapping_fraction(preset_runs.series("fig6"), 1)
    trapped = trapping_fraction(preset_runs.series("fig5a"), 1)
    detail(f"fig6 {decayed:.3f}, fig5a {trapped:.3f}")
    assert decayed < 0.1
    assert trapped > 0.1


@acceptance(9, "fig7: levels 1 and 2 trapped > 0.02 at t=20; no P1 spectral peak above 0.05")
@pytest.mark.slow
def test_09_fig7(preset_runs, detail):
    series = preset_runs.series("fig7")
    assert series.times[-1] == pytest.approx(20.0)
    t1, t2 = trapping_fraction(series, 1), trapping_fraction(series, 2)
    peak = peak_amplitude(series, 1, (TRANSIENT, 20.0))
    detail(f"P1 {t1:.3f} (end {series.p1[-1]:.3f}), P2 {t2:.3f} (end {series.p2[-1]:.3f}), peak {peak:.4f}")
    assert min(t1, t2, series.p1[-1], series.p2[-1]) > 0.02
    assert peak < 0.05


@acceptance(10, "Rabi model: dominant frequency = sqrt(O1^2 + O2^2) within one bin; P2, P3 correlation 1")
def test_10_rabi(detail):
    rng = np.random.default_rng(2024)
    pairs = rng.uniform(0.2, 5.0, size=(5, 2))
    worst_bins, worst_corr = 0.0, 0.0
    for o1, o2 in pairs:
        model = RabiModel(float(o1), float(o2))
        t_end = 60.0  # at least 2.5 periods for every sampled pair
        t = np.linspace(0.0, t_end, 4001)
        p1, p2, p3 = rabi_populations(model, t)
        series = TimeSeries(t, p1, p2, p3, p1 + p2 + p3)
        bin_width = 2 * math.pi / t_end
        for level in (1, 2, 3):
            worst_bins = max(worst_bins, abs(dominant_frequency(series, level) - model.omega) / bin_width)
        worst_corr = max(worst_corr, abs(correlation(p2, p3) - 1.0))
    detail(f"max offset {worst_bins:.2f} bins, |corr - 1| {worst_corr:.1e}")
    assert worst_bins <= 1.0
    assert worst_corr < 1e-6


@acceptance(11, "doubling N changes every preset's populations by < 1e-2 uniformly in t")
@pytest.mark.slow
@pytest.mark.parametrize("name", PRESETS)
def test_11_convergence(name, preset_runs, detail):
    base = preset_runs.series(name)
    fine = preset_runs.series(name, 300)
    diff = max(float(np.max(np.abs(base.level(k) - fine.level(k)))) for k in (1, 2, 3))
    detail(f"{name} {diff:.3f}")
    assert diff < 1e-2
