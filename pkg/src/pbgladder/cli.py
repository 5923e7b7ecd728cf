"""Command-line front end.

Subcommands: ``run``, ``list-presets``, ``verify``, ``dump-reservoir``.
Exit codes: 0 success, 1 verification failure, 2 config parse failure,
3 validation failure, 4 integrator failure, 5 I/O failure.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any

import numpy as np
from scipy.linalg import expm

from . import __version__
from .analysis import amplitude_spectrum, correlation, regime_report
from .discretize import (
    DiscretizedReservoir,
    ShiftQuadratureError,
    build_quadratic_grid,
    build_recurrence_grid,
    build_uniform_grid,
    compute_shift,
)
from .dos import GeneralizedLorentzian, IsotropicBandEdge, isotropic_rho0
from .dynamics import Generator, IntegrationError, LadderConfig, propagate, sector_size
from .oracle import RabiModel, dense_propagate, isotropic_shift_closed_form, rabi_populations
from .scenario import ConfigParseError, Scenario, ScenarioError, build, list_presets, load, preset, resolve

log = logging.getLogger("pbgladder")

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_INTEGRATION = 4
EXIT_IO = 5

OUT_ENV = "PBGLADDER_OUT"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _csv(header: list[str], columns: list[np.ndarray]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in zip(*columns):
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def simulate(scenario: Scenario) -> dict[str, str]:
    """Run one scenario and return ``{filename: contents}`` without touching disk."""
    _, reservoir, config = build(scenario)
    run = scenario.run
    series = propagate(
        config,
        run["t_end"],
        run["n_samples"],
        rtol=run["rtol"],
        atol=run["atol"],
        max_step=run["max_step"],
        norm_tolerance=run["norm_tolerance"],
        spectra=bool(scenario.output["spectra"]),
    )
    report = regime_report(series, run["transient_end"], run["tail_window"])
    metadata: dict[str, Any] = {
        "program": f"pbgladder {__version__}",
        "scenario": scenario.to_dict(),
        "reservoir": {
            "n_modes": reservoir.n_modes,
            "band": list(reservoir.band),
            "shift_upper": reservoir.shift_upper,
            "shift_lower": reservoir.shift_lower,
            "provenance": reservoir.provenance,
        },
        "two_photon_detuning": config.two_photon_detuning,
        "integrator": {"method": "DOP853", **series.stats},
        "norm_drift": series.max_norm_drift,
        "dynamic_regime_start": run["transient_end"],
    }
    name = scenario.name
    files: dict[str, str] = {}
    columns = [series.times, series.p1, series.p2, series.p3, series.norm]
    header = ["t", "P1", "P2", "P3", "norm"]
    if scenario.output["format"] == "csv":
        text = "# " + metadata["program"] + "\n"
        text += "# metadata: " + json.dumps(metadata, sort_keys=True) + "\n"
        text += _csv(header, columns)
        files[f"{name}.csv"] = text
    else:
        doc = {
            "metadata": metadata,
            "series": {key: [float(v) for v in col] for key, col in zip(header, columns)},
            "report": report.to_dict(),
        }
        files[f"{name}.json"] = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if scenario.output["report"]:
        files[f"{name}_report.json"] = json.dumps(
            {"scenario": name, "units": scenario.units, **report.to_dict()}, indent=1, sort_keys=True
        ) + "\n"
    if series.spectra is not None:
        labels = ["t"] + [f"n_{j}" for j in range(1, reservoir.n_modes + 1)]
        files[f"{name}_spectra.csv"] = _csv(labels, [series.times] + list(series.spectra.T))
    if scenario.output["reservoir"]:
        files[f"{name}_reservoir.csv"] = reservoir_csv(reservoir)
    return files


def reservoir_csv(reservoir: DiscretizedReservoir) -> str:
    table = reservoir.table()
    head = (
        f"# band: {_fmt(reservoir.band[0])},{_fmt(reservoir.band[1])}\n"
        f"# shift_upper: {_fmt(reservoir.shift_upper)}\n"
        f"# shift_lower: {_fmt(reservoir.shift_lower)}\n"
    )
    buf = io.StringIO()
    buf.write(head)
    buf.write("index,omega,G1,G2\n")
    for row in table:
        buf.write(f"{int(row[0])}," + ",".join(_fmt(v) for v in row[1:]) + "\n")
    return buf.getvalue()


def _write(out_dir: Path, files: dict[str, str]) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for fname, text in files.items():
        path = out_dir / fname
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        tmp.replace(path)
        paths.append(path)
    return paths


def _out_dir(scenario: Scenario, cli_out: str | None) -> Path:
    if cli_out:
        return Path(cli_out)
    return Path(os.environ.get(OUT_ENV) or scenario.output["dir"])


def _scenarios(args) -> list[Scenario]:
    overrides = {
        "n_modes": args.modes,
        "t_end": args.t_end,
        "format": args.format,
        "spectra": True if getattr(args, "spectra", False) else None,
    }
    raws = []
    if args.config:
        raws += [load(path) for path in args.config]
    if args.preset:
        raws += [preset(name) for name in args.preset]
    if not raws:
        raise ScenarioError("give --config or --preset")
    return [resolve(raw, overrides) for raw in raws]


def _run_one(scenario: Scenario, out: str | None) -> tuple[int, str]:
    try:
        files = simulate(scenario)
    except ScenarioError as exc:
        return EXIT_VALIDATION, f"{scenario.name}: invalid scenario: {exc}"
    except (IntegrationError, ShiftQuadratureError) as exc:
        return EXIT_INTEGRATION, f"{scenario.name}: integration failed: {exc}"
    try:
        paths = _write(_out_dir(scenario, out), files)
    except OSError as exc:
        return EXIT_IO, f"{scenario.name}: cannot write output: {exc}"
    return EXIT_OK, "\n".join(str(p) for p in paths)


def cmd_run(args) -> int:
    scenarios = _scenarios(args)
    if args.jobs > 1 and len(scenarios) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, scenarios, [args.out] * len(scenarios)))
    else:
        results = [_run_one(sc, args.out) for sc in scenarios]
    status = EXIT_OK
    for code, message in results:
        print(message, file=sys.stdout if code == EXIT_OK else sys.stderr)
        status = status or code
    return status


def cmd_list_presets(args) -> int:
    for row in list_presets():
        print(
            f"{row['name']:6s} {row['dos']:10s} d12={row['delta_upper']:+.6f} d23={row['delta_lower']:+.6f} "
            f"N={row['n_modes']} t_end={row['t_end']:g} [{row['units']}]  {row['description']}"
        )
    return EXIT_OK


def cmd_dump_reservoir(args) -> int:
    scenarios = _scenarios(args)
    status = EXIT_OK
    for sc in scenarios:
        _, reservoir, _ = build(sc)
        text = reservoir_csv(reservoir)
        if args.out:
            try:
                _write(Path(args.out), {f"{sc.name}_reservoir.csv": text})
            except OSError as exc:
                print(f"cannot write output: {exc}", file=sys.stderr)
                status = EXIT_IO
        else:
            sys.stdout.write(text)
    return status


# -- verification --------------------------------------------------------------


def _small_configs() -> list[tuple[str, LadderConfig]]:
    iso = IsotropicBandEdge(0.0, 1.0, 1.5)
    lor = GeneralizedLorentzian(0.0, 1.0, 6, 0.5, 1.0)
    out = []
    for d12, d23 in ((-1.0, 0.5), (0.3, -0.4), (-2.0, 2.0)):
        res = build_quadratic_grid(iso, 6, 9.9 / 36, transitions=(d12, d23))
        out.append((f"isotropic d12={d12:+g} d23={d23:+g}", LadderConfig(d12, d23, res)))
    for d12, d23 in ((0.1, 0.3), (-0.5, 1.0), (1.5, -1.2)):
        res = build_uniform_grid(lor, -4.0, 4.0, 6, transitions=(d12, d23))
        out.append((f"lorentzian d12={d12:+g} d23={d23:+g}", LadderConfig(d12, d23, res)))
    return out


def verify_checks() -> list[tuple[str, float, float]]:
    """Built-in oracle suite as ``(name, residual, threshold)`` triples."""
    checks: list[tuple[str, float, float]] = []
    rng = np.random.default_rng(20240601)

    for label, config in _small_configs():
        gen = Generator(config)
        dim = sector_size(config.n_modes)
        u = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        lhs = np.vdot(u, gen.rotating(v))
        rhs_ = -np.conj(np.vdot(v, gen.rotating(u)))
        checks.append((f"anti-hermiticity {label}", abs(lhs - rhs_) / max(1.0, abs(lhs)), 1e-13))
        try:
            series = propagate(config, 5.0, 11, rtol=1e-12, atol=1e-14)
            ref = dense_propagate(config, 5.0).vector()
            residual = float(np.max(np.abs(series.final_state.vector() - ref)))
        except IntegrationError:
            residual = math.inf
        checks.append((f"dense equivalence N=6 {label}", residual, 1e-8))

    for o1, o2 in ((3.0, 4.0), (1.0, 1.0), (0.7, 2.2)):
        model = RabiModel(o1, o2)
        t = np.linspace(0, 40, 2001)
        h = model.hamiltonian()
        exact = np.array([np.abs(expm(-1j * h * tk)[:, 0]) ** 2 for tk in t[::100]])
        closed = np.column_stack(rabi_populations(model, t[::100]))
        checks.append((f"rabi closed form ({o1:g},{o2:g})", float(np.max(np.abs(exact - closed))), 1e-12))
        freqs, amp = amplitude_spectrum(t, rabi_populations(model, t)[0])
        k = 1 + int(np.argmax(amp[1:]))
        checks.append((f"rabi frequency ({o1:g},{o2:g})", abs(freqs[k] - model.omega), freqs[1]))
        _, p2, p3 = rabi_populations(model, t)
        checks.append((f"rabi in-phase ({o1:g},{o2:g})", abs(correlation(p2, p3) - 1.0), 1e-6))

    iso = IsotropicBandEdge(0.0, 1.0, 1.5)
    dw = 4.4e-4
    quad_grid = build_quadratic_grid(iso, 150, dw)
    rec_grid = build_recurrence_grid(iso, 0.0, 150, rho0=isotropic_rho0(dw))
    rel = np.max(np.abs(rec_grid.frequencies - quad_grid.frequencies) / quad_grid.frequencies)
    checks.append(("grid identity (recurrence vs quadratic)", float(rel), 1e-12))

    width = quad_grid.band[1]
    for detuning in (-4.0, -2.0, -1.0, -0.1, 0.0):
        got = compute_shift(iso, detuning, quad_grid.band, "upper")
        ref = isotropic_shift_closed_form(1.0, detuning, width)
        checks.append((f"shift closed form d={detuning:+g}", abs(got - ref) / abs(ref), 1e-10))
    return checks


def cmd_verify(args) -> int:
    failed = 0
    for name, residual, threshold in verify_checks():
        ok = bool(math.isfinite(residual) and residual < threshold)
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name:55s} residual={residual:.3e} (< {threshold:.0e})")
    print(f"{'all checks passed' if not failed else f'{failed} check(s) failed'}")
    return EXIT_OK if not failed else EXIT_VERIFY


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pbgladder", description="Ladder atom coupled to a photonic band gap reservoir."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_args(p):
        p.add_argument("--config", action="append", metavar="PATH", help="scenario file (YAML or JSON)")
        p.add_argument("--preset", action="append", metavar="NAME", help="built-in preset (see list-presets)")
        p.add_argument("--out", metavar="DIR", help=f"output directory (overrides ${OUT_ENV} and the scenario)")
        p.add_argument("--modes", type=int, metavar="N", help="number of discrete modes")
        p.add_argument("--t-end", type=float, metavar="X", help="final time")
        p.add_argument("--format", choices=["csv", "structured"])
        p.add_argument("--seed-free", action="store_true", help="reserved; the engine is deterministic")

    p_run = sub.add_parser("run", help="propagate one or more scenarios")
    scenario_args(p_run)
    p_run.add_argument("--spectra", action="store_true", help="also write per-mode photon numbers")
    p_run.add_argument("--jobs", type=int, default=1, help="run several scenarios in parallel")
    p_run.set_defaults(func=cmd_run)

    p_list = sub.add_parser("list-presets", help="show the built-in presets")
    p_list.set_defaults(func=cmd_list_presets)

    p_verify = sub.add_parser("verify", help="run the built-in oracle checks")
    p_verify.set_defaults(func=cmd_verify)

    p_dump = sub.add_parser("dump-reservoir", help="write the discretised reservoir")
    scenario_args(p_dump)
    p_dump.set_defaults(func=cmd_dump_reservoir)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigParseError as exc:
        print(f"config parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
