"""Density-of-states models for a photonic band gap reservoir.

Two isotropic profiles are supported:

* :class:`IsotropicBandEdge` -- the effective-mass band edge, with an
  inverse square-root divergence just above ``edge`` and a true gap below it.
* :class:`GeneralizedLorentzian` -- an inverted Lorentzian of even order ``n``
  with a single zero at ``center``, tending to the free-space value far from it.

Frequencies are unit-agnostic. The conventions used throughout the package are
``C1 = 1`` for the band-edge model (frequencies in units of ``C1**(2/3)``) and
``gamma_lower = 1`` for the Lorentzian model (frequencies in units of ``gamma2``).

The spectral response ``SR(w)`` is the density of states weighted by the
squared atom-field coupling; it is the only reservoir function the dynamics
depends on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Union

import numpy as np

Transition = Literal["upper", "lower"]

# delta_omega quoted for the 150-mode quadratic grid
DEFAULT_DELTA_OMEGA = 4.4e-4


def isotropic_rho0(delta_omega: float) -> float:
    """Normalisation that makes the quadratic grid obey the two-step recurrence."""
    if not delta_omega > 0:
        raise ValueError(f"delta_omega must be positive, got {delta_omega}")
    return 1.0 / (2.0 * math.sqrt(delta_omega))


@dataclass(frozen=True)
class IsotropicBandEdge:
    """Band edge DOS ``rho0 / sqrt(w - edge)`` above ``edge``, zero below.

    Parameters
    ----------
    edge : float
        Band-edge frequency.
    c_upper, c_lower : float
        Effective couplings (frequency**1.5) of the |1>-|2> and |2>-|3>
        transitions.
    rho0 : float, optional
        DOS normalisation. Defaults to ``isotropic_rho0(DEFAULT_DELTA_OMEGA)``;
        it affects only :func:`density` and recurrence grids, never the
        spectral response.
    """

    edge: float = 0.0
    c_upper: float = 1.0
    c_lower: float = 1.0
    rho0: float | None = None

    def __post_init__(self) -> None:
        _check_finite("edge", self.edge)
        for name in ("c_upper", "c_lower"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {value}")
        if self.rho0 is not None and not (math.isfinite(self.rho0) and self.rho0 > 0):
            raise ValueError(f"rho0 must be positive, got {self.rho0}")

    @property
    def kind(self) -> str:
        return "isotropic"

    @property
    def reference(self) -> float:
        """Frequency that detunings are measured from."""
        return self.edge

    def normalization(self) -> float:
        return self.rho0 if self.rho0 is not None else isotropic_rho0(DEFAULT_DELTA_OMEGA)

    def coupling(self, transition: Transition) -> float:
        return _pick(transition, self.c_upper, self.c_lower)


@dataclass(frozen=True)
class GeneralizedLorentzian:
    """Inverted Lorentzian DOS ``rho0 * [1 - G**n / ((w - w0)**n + G**n)]``.

    Parameters
    ----------
    center : float
        Mid-gap frequency ``w0`` where the DOS vanishes.
    half_width : float
        Gap half width ``G``.
    order : int
        Even positive order ``n`` (6 by default).
    gamma_upper, gamma_lower : float
        Free-space decay rates of levels |1> and |2>.
    rho0 : float
        Free-space DOS far from the gap.
    """

    center: float = 0.0
    half_width: float = 1.0
    order: int = 6
    gamma_upper: float = 0.5
    gamma_lower: float = 1.0
    rho0: float = 1.0

    def __post_init__(self) -> None:
        _check_finite("center", self.center)
        _check_order(self.order)
        for name in ("half_width", "rho0"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value}")
        for name in ("gamma_upper", "gamma_lower"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {value}")

    @property
    def kind(self) -> str:
        return "lorentzian"

    @property
    def reference(self) -> float:
        return self.center

    def normalization(self) -> float:
        return self.rho0

    def coupling(self, transition: Transition) -> float:
        return _pick(transition, self.gamma_upper, self.gamma_lower)

    def profile(self, omega):
        """Relative DOS ``rho / rho0``, in [0, 1)."""
        x = (np.asarray(omega, dtype=float) - self.center) / self.half_width
        xn = x**self.order
        # 1 - 1/(xn + 1) written to keep full relative precision near the center
        return xn / (xn + 1.0)


DosModel = Union[IsotropicBandEdge, GeneralizedLorentzian]


def _pick(transition: str, upper: float, lower: float) -> float:
    if transition == "upper":
        return upper
    if transition == "lower":
        return lower
    raise ValueError(f"transition must be 'upper' or 'lower', got {transition!r}")


def _check_finite(name: str, value) -> None:
    if not np.all(np.isfinite(value)):
        raise ValueError(f"{name} must be finite")


def _check_order(order) -> None:
    if isinstance(order, bool) or not isinstance(order, (int, np.integer)):
        raise ValueError(f"order must be a positive even integer, got {order!r}")
    if order <= 0 or order % 2:
        raise ValueError(f"order must be a positive even integer, got {order}")


def density(model: DosModel, omega, rho0: float | None = None):
    """Density of states at ``omega`` (scalar or array).

    For the band-edge model the density is zero at and below the edge.
    ``rho0`` overrides the model's normalisation.
    """
    _check_finite("omega", omega)
    if isinstance(model, GeneralizedLorentzian):
        _check_order(model.order)
        scale = model.rho0 if rho0 is None else rho0
        return _like(omega, scale * model.profile(omega))
    scale = model.normalization() if rho0 is None else rho0
    x = np.asarray(omega, dtype=float) - model.edge
    out = np.zeros_like(x)
    above = x > 0
    out[above] = scale / np.sqrt(x[above])
    return _like(omega, out)


def spectral_response(model: DosModel, transition: Transition, omega):
    """Spectral response of one transition at ``omega``.

    Band edge: ``(C / pi) / sqrt(w - edge)`` above the edge, zero otherwise.
    Lorentzian: ``(gamma / 2 pi) * rho(w) / rho0``.
    """
    _check_finite("omega", omega)
    strength = model.coupling(transition)
    if isinstance(model, GeneralizedLorentzian):
        _check_order(model.order)
        return _like(omega, strength / (2.0 * math.pi) * model.profile(omega))
    x = np.asarray(omega, dtype=float) - model.edge
    out = np.zeros_like(x)
    above = x > 0
    out[above] = strength / math.pi / np.sqrt(x[above])
    return _like(omega, out)


def free_space_response(model: DosModel, transition: Transition) -> float:
    """Spectral response far from the gap (zero for the band-edge model)."""
    if isinstance(model, GeneralizedLorentzian):
        return model.coupling(transition) / (2.0 * math.pi)
    return 0.0


def in_gap(model: DosModel, omega: float, threshold: float = 1e-6) -> bool:
    """Whether ``omega`` lies in the gap.

    For the Lorentzian profile this means ``rho(omega) / rho0 <= threshold``;
    the band-edge model has a true gap, so the threshold plays no role.
    """
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    if isinstance(model, GeneralizedLorentzian):
        return bool(model.profile(omega) <= threshold)
    return bool(omega <= model.edge)


def cumulative_density(model: DosModel, start: float, stop: float, rho0: float | None = None) -> float:
    """Number of modes ``int_start^stop rho(w) dw``."""
    if isinstance(model, IsotropicBandEdge):
        scale = model.normalization() if rho0 is None else rho0
        lo = max(start - model.edge, 0.0)
        hi = max(stop - model.edge, 0.0)
        return 2.0 * scale * (math.sqrt(hi) - math.sqrt(lo))
    from scipy.integrate import quad

    scale = model.rho0 if rho0 is None else rho0
    value, _ = quad(lambda w: float(model.profile(w)), start, stop, epsabs=1e-13, epsrel=1e-12, limit=200)
    return scale * value


def _like(template, values):
    if np.ndim(template) == 0:
        return float(values)
    return values
