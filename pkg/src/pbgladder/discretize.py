"""Replace a structured continuum by a finite set of discrete modes.

Three grid strategies are provided:

``build_quadratic_grid``
    Band-edge DOS only: ``w_j = edge + j**2 * dw`` with one constant coupling
    per transition.
``build_recurrence_grid``
    Any DOS: the two-step recurrence ``w[j+1] = w[j-1] + 2 / rho(w[j])``,
    which puts one mode per unit of integrated density.
``build_uniform_grid``
    Lorentzian DOS: equidistant modes with frequency dependent couplings
    ``G(w) = sqrt(SR(w) * dw)``.

The part of the continuum outside the discretised band is eliminated
perturbatively and survives only as a real level shift per transition
(:func:`compute_shift`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .dos import (
    DosModel,
    GeneralizedLorentzian,
    IsotropicBandEdge,
    cumulative_density,
    density,
    spectral_response,
)

SHIFT_EPSABS = 1e-12
SHIFT_EPSREL = 1e-13
# half width of the symmetric window used to regularise Lorentzian tail shifts,
# in units of the gap half width
DEFAULT_CUTOFF_WIDTHS = 1.0e3
DEFAULT_MARGIN = 1.0


class DiscretizationError(ValueError):
    """Grid parameters inconsistent with the model or the atom."""


class ShiftQuadratureError(RuntimeError):
    """Adaptive quadrature of a tail shift did not converge."""


@dataclass(frozen=True)
class DiscretizedReservoir:
    """Discrete modes standing in for the resonant part of the continuum.

    ``cell_edges`` has ``N + 1`` entries; mode ``j`` represents the continuum
    between ``cell_edges[j]`` and ``cell_edges[j + 1]`` and its squared
    coupling approximates the spectral response integrated over that cell.
    ``reference`` is the frequency that atomic detunings are quoted against
    (band edge or gap center).
    """

    frequencies: np.ndarray
    couplings_upper: np.ndarray
    couplings_lower: np.ndarray
    band: tuple[float, float]
    shift_upper: float = 0.0
    shift_lower: float = 0.0
    reference: float = 0.0
    cell_edges: np.ndarray | None = None
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        freqs = np.asarray(self.frequencies, dtype=float)
        g1 = np.asarray(self.couplings_upper, dtype=float)
        g2 = np.asarray(self.couplings_lower, dtype=float)
        if freqs.ndim != 1 or freqs.size == 0:
            raise DiscretizationError("need at least one mode")
        if g1.shape != freqs.shape or g2.shape != freqs.shape:
            raise DiscretizationError("coupling arrays must match the number of modes")
        if not (np.all(np.isfinite(freqs)) and np.all(np.isfinite(g1)) and np.all(np.isfinite(g2))):
            raise DiscretizationError("frequencies and couplings must be finite")
        if np.any(g1 < 0) or np.any(g2 < 0):
            raise DiscretizationError("couplings must be non-negative")
        if np.any(np.diff(freqs) <= 0):
            raise DiscretizationError("mode frequencies must be strictly increasing")
        low, up = map(float, self.band)
        if not (low <= freqs[0] and freqs[-1] <= up):
            raise DiscretizationError("modes must lie inside the band")
        for name, value in (("frequencies", freqs), ("couplings_upper", g1), ("couplings_lower", g2)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "band", (low, up))
        if self.cell_edges is not None:
            edges = np.asarray(self.cell_edges, dtype=float)
            if edges.shape != (freqs.size + 1,):
                raise DiscretizationError("cell_edges must have N + 1 entries")
            edges.setflags(write=False)
            object.__setattr__(self, "cell_edges", edges)

    @property
    def n_modes(self) -> int:
        return int(self.frequencies.size)

    @property
    def offsets(self) -> np.ndarray:
        """Mode frequencies relative to ``reference``."""
        return self.frequencies - self.reference

    def with_shifts(self, shift_upper: float, shift_lower: float, **extra) -> DiscretizedReservoir:
        prov = dict(self.provenance, **extra)
        return DiscretizedReservoir(
            self.frequencies,
            self.couplings_upper,
            self.couplings_lower,
            self.band,
            float(shift_upper),
            float(shift_lower),
            self.reference,
            self.cell_edges,
            prov,
        )

    def table(self) -> np.ndarray:
        """Columns ``index, w_j, G1_j, G2_j`` (index starts at 1)."""
        idx = np.arange(1, self.n_modes + 1, dtype=float)
        return np.column_stack([idx, self.frequencies, self.couplings_upper, self.couplings_lower])


def _model_record(model: DosModel) -> dict[str, Any]:
    if isinstance(model, IsotropicBandEdge):
        return {
            "kind": "isotropic",
            "edge": model.edge,
            "c_upper": model.c_upper,
            "c_lower": model.c_lower,
            "rho0": model.rho0,
        }
    return {
        "kind": "lorentzian",
        "center": model.center,
        "half_width": model.half_width,
        "order": model.order,
        "gamma_upper": model.gamma_upper,
        "gamma_lower": model.gamma_lower,
        "rho0": model.rho0,
    }


def _attach_shifts(
    model: DosModel,
    reservoir: DiscretizedReservoir,
    transitions: tuple[float, float] | None,
    margin: float,
    cutoff: float | None,
) -> DiscretizedReservoir:
    if transitions is None:
        return reservoir
    upper, lower = map(float, transitions)
    low, up = reservoir.band
    top = max(upper, lower)
    if up - top < margin:
        raise DiscretizationError(
            f"band top {up:.6g} must exceed the highest transition frequency {top:.6g} by at least {margin:.6g}"
        )
    if isinstance(model, GeneralizedLorentzian) and min(upper, lower) - low < margin:
        raise DiscretizationError(
            f"band bottom {low:.6g} must lie below the lowest transition frequency by at least {margin:.6g}"
        )
    s1 = compute_shift(model, upper, reservoir.band, transition="upper", cutoff=cutoff)
    s2 = compute_shift(model, lower, reservoir.band, transition="lower", cutoff=cutoff)
    extra: dict[str, Any] = {"transitions": [upper, lower], "margin": margin}
    if isinstance(model, GeneralizedLorentzian):
        extra["shift_cutoff_halfwidth"] = _cutoff(model, cutoff)
    return reservoir.with_shifts(s1, s2, **extra)


def build_quadratic_grid(
    model: IsotropicBandEdge,
    n_modes: int,
    delta_omega: float,
    transitions: tuple[float, float] | None = None,
    margin: float = DEFAULT_MARGIN,
) -> DiscretizedReservoir:
    """Quadratic grid ``w_j = edge + j**2 * delta_omega`` for ``j = 1..N``.

    Every mode carries the same coupling ``sqrt(2 C sqrt(w_up - edge) / (N pi))``.
    When the absolute transition frequencies ``(upper, lower)`` are given,
    the band top must clear both by ``margin`` and the tail shifts are filled.
    """
    if not isinstance(model, IsotropicBandEdge):
        raise DiscretizationError("the quadratic grid requires the band-edge model")
    if int(n_modes) != n_modes or n_modes < 2:
        raise DiscretizationError(f"need N >= 2 modes, got {n_modes}")
    if not (math.isfinite(delta_omega) and delta_omega > 0):
        raise DiscretizationError(f"delta_omega must be positive, got {delta_omega}")
    n = int(n_modes)
    j = np.arange(0, n + 1, dtype=float)
    edges = model.edge + j**2 * delta_omega
    width = edges[-1] - model.edge
    g1 = math.sqrt(2.0 * model.c_upper * math.sqrt(width) / (n * math.pi))
    g2 = math.sqrt(2.0 * model.c_lower * math.sqrt(width) / (n * math.pi))
    reservoir = DiscretizedReservoir(
        frequencies=edges[1:],
        couplings_upper=np.full(n, g1),
        couplings_lower=np.full(n, g2),
        band=(model.edge, float(edges[-1])),
        reference=model.edge,
        cell_edges=edges,
        provenance={
            "model": _model_record(model),
            "grid": {"strategy": "quadratic", "n_modes": n, "delta_omega": delta_omega},
        },
    )
    return _attach_shifts(model, reservoir, transitions, margin, None)


def _first_mode(model: DosModel, start: float, rho0: float | None, band_limit: float) -> float:
    if isinstance(model, IsotropicBandEdge):
        scale = model.normalization() if rho0 is None else rho0
        # closed form of int_edge^w rho = 1
        base = math.sqrt(max(start - model.edge, 0.0)) + 1.0 / (2.0 * scale)
        return model.edge + base * base

    def excess(w):
        return cumulative_density(model, start, w, rho0) - 1.0

    lo, hi = start, start
    step = 1.0 / (model.rho0 if rho0 is None else rho0)
    for _ in range(200):
        if excess(hi) >= 0:
            break
        lo, hi = hi, hi + step
        step *= 2.0
        if hi > band_limit:
            raise DiscretizationError("recurrence seed falls outside the band limit")
    else:
        raise DiscretizationError(f"density underflow: integrated density from {start:.6g} never reaches one")
    return brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def build_recurrence_grid(
    model: DosModel,
    start: float,
    n_modes: int,
    rho0: float | None = None,
    band_limit: float = math.inf,
    transitions: tuple[float, float] | None = None,
    margin: float = DEFAULT_MARGIN,
    cutoff: float | None = None,
) -> DiscretizedReservoir:
    """Grid from the recurrence ``w[j+1] = w[j-1] + 2 / rho(w[j])``.

    The recurrence is seeded with ``w[0] = start`` (the band boundary) and
    ``w[1]`` at the point where the integrated density from ``start``
    reaches one. The squared coupling of mode ``j`` is ``SR(w_j)`` times the
    centred spacing ``(w[j+1] - w[j-1]) / 2``; at the top end the recurrence
    is run one extra step so that spacing is centred as well.

    Raises
    ------
    DiscretizationError
        If the recurrence leaves ``band_limit`` or the density vanishes on the
        way (a gap region).
    """
    if int(n_modes) != n_modes or n_modes < 2:
        raise DiscretizationError(f"need N >= 2 modes, got {n_modes}")
    if not math.isfinite(start):
        raise DiscretizationError("start must be finite")
    if isinstance(model, IsotropicBandEdge) and start < model.edge:
        raise DiscretizationError("start must not lie below the band edge")
    n = int(n_modes)
    w = np.empty(n + 2)
    w[0] = start
    w[1] = _first_mode(model, start, rho0, band_limit)
    tiny = np.finfo(float).tiny
    for j in range(1, n + 1):
        rho = density(model, float(w[j]), rho0)
        if not rho > tiny:
            raise DiscretizationError(f"density underflow at w = {w[j]:.6g} (gap region)")
        w[j + 1] = w[j - 1] + 2.0 / rho
        if not w[j + 1] > w[j]:
            raise DiscretizationError(f"recurrence stopped increasing at mode {j} (density varies too fast)")
        if w[j + 1] > band_limit and j < n:
            raise DiscretizationError(f"recurrence left the band limit {band_limit:.6g} after {j} modes")
    modes = w[1 : n + 1]
    spacing = 0.5 * (w[2 : n + 2] - w[0:n])
    g1 = np.sqrt(spectral_response(model, "upper", modes) * spacing)
    g2 = np.sqrt(spectral_response(model, "lower", modes) * spacing)
    reservoir = DiscretizedReservoir(
        frequencies=modes,
        couplings_upper=g1,
        couplings_lower=g2,
        band=(float(start), float(modes[-1])),
        reference=model.reference,
        cell_edges=w[0 : n + 1].copy(),
        provenance={
            "model": _model_record(model),
            "grid": {"strategy": "recurrence", "n_modes": n, "start": start, "rho0": rho0},
        },
    )
    return _attach_shifts(model, reservoir, transitions, margin, cutoff)


def build_uniform_grid(
    model: GeneralizedLorentzian,
    low: float,
    up: float,
    n_modes: int,
    transitions: tuple[float, float] | None = None,
    margin: float = DEFAULT_MARGIN,
    cutoff: float | None = None,
) -> DiscretizedReservoir:
    """Equidistant modes filling ``[low, up]`` with spacing ``(up - low) / N``.

    The band is split into ``N`` equal cells and one mode sits at each cell
    center, so the discretised part and the perturbative tails meet exactly
    at ``low`` and ``up``.
    """
    if not isinstance(model, GeneralizedLorentzian):
        raise DiscretizationError("the uniform grid requires the Lorentzian model")
    if int(n_modes) != n_modes or n_modes < 1:
        raise DiscretizationError(f"need N >= 1 modes, got {n_modes}")
    if not (math.isfinite(low) and math.isfinite(up) and low < model.center < up):
        raise DiscretizationError("need low < center < up")
    n = int(n_modes)
    edges = np.linspace(low, up, n + 1)
    spacing = (up - low) / n
    modes = 0.5 * (edges[:-1] + edges[1:])
    g1 = np.sqrt(spectral_response(model, "upper", modes) * spacing)
    g2 = np.sqrt(spectral_response(model, "lower", modes) * spacing)
    reservoir = DiscretizedReservoir(
        frequencies=modes,
        couplings_upper=g1,
        couplings_lower=g2,
        band=(float(low), float(up)),
        reference=model.center,
        cell_edges=edges,
        provenance={
            "model": _model_record(model),
            "grid": {"strategy": "uniform", "n_modes": n, "low": low, "up": up, "spacing": spacing},
        },
    )
    return _attach_shifts(model, reservoir, transitions, margin, cutoff)


def _cutoff(model: GeneralizedLorentzian, cutoff: float | None) -> float:
    return DEFAULT_CUTOFF_WIDTHS * model.half_width if cutoff is None else float(cutoff)


def _integrate(func, a: float, b: float) -> float:
    result = quad(func, a, b, epsabs=SHIFT_EPSABS, epsrel=SHIFT_EPSREL, limit=500, full_output=1)
    if len(result) > 3 and "roundoff" not in result[3]:
        raise ShiftQuadratureError(f"tail-shift quadrature did not converge: {result[3]}")
    return result[0]


def compute_shift(
    model: DosModel,
    transition_frequency: float,
    band: tuple[float, float],
    transition: str = "upper",
    cutoff: float | None = None,
) -> float:
    """Level shift from the continuum left outside ``band``.

    Returns ``int_tails SR(w) / (wa - w) dw``; it enters the amplitude
    equations as ``-i * shift * amplitude``.

    Band edge: only the upper tail ``[up, inf)`` contributes (there is no
    density below the edge). Integrated after the substitution
    ``u = 1 / sqrt(w - edge)``, which maps the tail to a finite interval
    with a smooth integrand.

    Lorentzian: tails ``[wa - L, low]`` and ``[up, wa + L]``, symmetric about
    the transition so the flat free-space parts cancel like a principal
    value. ``L`` is ``cutoff`` (default ``1000 * half_width``). The flat part is
    integrated in closed form and only the Lorentzian deficit numerically.
    """
    low, up = map(float, band)
    wa = float(transition_frequency)
    strength = model.coupling(transition)
    if strength == 0:
        return 0.0
    if isinstance(model, IsotropicBandEdge):
        if not wa < up:
            raise DiscretizationError(f"transition frequency {wa:.6g} not below the band top {up:.6g}")
        width = up - model.edge
        if not width > 0:
            raise DiscretizationError("band top must lie above the edge")
        detuning = wa - model.edge
        umax = 1.0 / math.sqrt(width)
        # int_X^inf dx / (sqrt(x) (d - x)) == int_0^{1/sqrt X} 2 du / (d u^2 - 1)
        integral = _integrate(lambda u: 2.0 / (detuning * u * u - 1.0), 0.0, umax)
        return strength / math.pi * integral

    if not low < wa < up:
        raise DiscretizationError(f"transition frequency {wa:.6g} outside the band ({low:.6g}, {up:.6g})")
    half = _cutoff(model, cutoff)
    bottom, top = wa - half, wa + half
    if not (bottom < low and top > up):
        raise DiscretizationError("cutoff window must enclose the discretised band")
    flat = math.log((up - wa) / (wa - low))

    def deficit(w):
        return (1.0 - float(model.profile(w))) / (wa - w)

    lower_tail = _integrate(deficit, bottom, low)
    upper_tail = _integrate(deficit, up, top)
    return strength / (2.0 * math.pi) * (flat - lower_tail - upper_tail)
