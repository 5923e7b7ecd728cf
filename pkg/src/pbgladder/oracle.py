"""Independent reference solutions used to check the production propagator.

Nothing here shares code with :mod:`pbgladder.dynamics` beyond the data
containers: the dense generator is assembled element by element from the
Fock-space action of the field operators, and time evolution is an exact
matrix exponential through an eigendecomposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import AmplitudeState, LadderConfig, initial_state

MAX_DENSE_MODES = 12


def basis_labels(n_modes: int) -> list[tuple]:
    """Basis order ``[(1,), (2, j), ..., (3, j, m) for j <= m]`` (0-based modes)."""
    labels: list[tuple] = [(1,)]
    labels += [(2, j) for j in range(n_modes)]
    labels += [(3, j, m) for j in range(n_modes) for m in range(j, n_modes)]
    return labels


def dense_generator(config: LadderConfig) -> np.ndarray:
    """Hermitian rotating-frame Hamiltonian of the two-excitation sector.

    Raises ``ValueError`` above :data:`MAX_DENSE_MODES` modes.
    """
    res = config.reservoir
    n = res.n_modes
    if n > MAX_DENSE_MODES:
        raise ValueError(f"dense oracle is limited to {MAX_DENSE_MODES} modes, got {n}")
    labels = basis_labels(n)
    index = {label: k for k, label in enumerate(labels)}
    x = res.offsets
    g1 = res.couplings_upper
    g2 = res.couplings_lower
    h = np.zeros((len(labels), len(labels)), dtype=complex)

    for label, k in index.items():
        if label[0] == 1:
            h[k, k] = res.shift_upper
        elif label[0] == 2:
            h[k, k] = x[label[1]] - config.delta_upper + res.shift_lower
        else:
            h[k, k] = x[label[1]] + x[label[2]] - config.two_photon_detuning

    def couple(target: int, source: int, value: complex) -> None:
        h[target, source] += value
        h[source, target] += np.conj(value)

    src = index[(1,)]
    for j in range(n):
        # sigma_21 a_j^dagger |1, vac> = |2, 1_j>
        couple(index[(2, j)], src, 1j * g1[j])
    for j in range(n):
        for m in range(n):
            # sigma_32 a_m^dagger |2, 1_j>: bosonic factor sqrt(n_m + 1)
            factor = math.sqrt(2.0) if m == j else 1.0
            couple(index[(3, min(j, m), max(j, m))], index[(2, j)], 1j * g2[m] * factor)
    return h


def dense_propagate(config: LadderConfig, t: float, state: AmplitudeState | None = None) -> AmplitudeState:
    """Exact ``exp(-i H t)`` applied to ``state`` (default ``|1, vac>``)."""
    h = dense_generator(config)
    psi0 = (initial_state(config) if state is None else state).vector()
    energies, vectors = np.linalg.eigh(h)
    psi = vectors @ (np.exp(-1j * energies * t) * (vectors.conj().T @ psi0))
    return AmplitudeState.from_vector(psi, config.n_modes, t)


def two_level_populations(config: LadderConfig, times) -> np.ndarray:
    """Upper-level population with the lower transition switched off.

    Only ``|1, vac>`` and ``|2, 1_j>`` take part; built as its own
    ``(N + 1)``-dimensional problem and diagonalised directly.
    """
    res = config.reservoir
    n = res.n_modes
    h = np.zeros((n + 1, n + 1), dtype=complex)
    h[0, 0] = res.shift_upper
    h[1:, 1:] = np.diag(res.offsets - config.delta_upper + res.shift_lower)
    h[1:, 0] = 1j * res.couplings_upper
    h[0, 1:] = -1j * res.couplings_upper
    energies, vectors = np.linalg.eigh(h)
    weights = np.abs(vectors[0, :]) ** 2
    times = np.asarray(times, dtype=float)
    amp = np.exp(-1j * np.outer(times, energies)) @ weights
    return np.abs(amp) ** 2


def isotropic_shift_closed_form(coupling: float, detuning: float, width: float) -> float:
    """``(C / pi) * int_width^inf dx / (sqrt(x) (detuning - x))`` in closed form.

    ``detuning`` is the transition frequency minus the band edge and
    ``width`` the band top minus the edge; requires ``detuning < width``.
    """
    if not detuning < width:
        raise ValueError("detuning must lie below the band top")
    root = math.sqrt(width)
    if detuning < 0:
        kappa = math.sqrt(-detuning)
        value = -(2.0 / kappa) * math.atan(kappa / root)
    elif detuning == 0:
        value = -2.0 / root
    else:
        s = math.sqrt(detuning)
        value = -(1.0 / s) * math.log((root + s) / (root - s))
    return coupling / math.pi * value


@dataclass(frozen=True)
class RabiModel:
    """Lossless three-level model: ``|1>-|2>`` at ``omega1``, ``|1>-|3>`` at ``omega2``."""

    omega1: float
    omega2: float

    def __post_init__(self) -> None:
        if self.omega1 < 0 or self.omega2 < 0:
            raise ValueError("Rabi frequencies must be non-negative")

    @property
    def omega(self) -> float:
        return math.hypot(self.omega1, self.omega2)

    def hamiltonian(self) -> np.ndarray:
        h = np.zeros((3, 3))
        h[0, 1] = h[1, 0] = 0.5 * self.omega1
        h[0, 2] = h[2, 0] = 0.5 * self.omega2
        return h


def rabi_populations(model: RabiModel, t):
    """``(P1, P2, P3)`` at time(s) ``t`` starting from ``|1>``.

    ``P1 = cos^2(W t/2)`` and ``P2, P3 = (omega_k / W)^2 sin^2(W t/2)`` with
    ``W = sqrt(omega1^2 + omega2^2)``; all constant when both frequencies vanish.
    """
    t = np.asarray(t, dtype=float)
    big = model.omega
    if big == 0:
        ones = np.ones_like(t)
        return ones, 0.0 * ones, 0.0 * ones
    s2 = np.sin(0.5 * big * t) ** 2
    p1 = 1.0 - s2
    return p1, (model.omega1 / big) ** 2 * s2, (model.omega2 / big) ** 2 * s2
