"""Two-excitation amplitude dynamics of the ladder atom.

The wavefunction is restricted to the sector reachable from ``|1, vac>``::

    a       |1, 0, 0>
    b_j     |2, 1_j, 0>
    C_jm    |3, 1_j, 1_m>      (j <= m, C_jj is the two-photon Fock amplitude)

and packed into one complex vector ``[a, b_1..b_N, C_11, C_12, ..., C_NN]``
with ``C`` stored row-major over the upper triangle. The eliminated
off-resonant continuum contributes the real shifts carried by the reservoir.

Propagation uses a rotating frame in which the generator is time
independent::

    i da/dt    = S1 a           - i sum_j G1_j b_j
    i db_j/dt  = (x_j - d12 + S2) b_j + i G1_j a
                 - i [sum_{m != j} G2_m C_jm + sqrt(2) G2_j C_jj]
    i dC_jm/dt = (x_j + x_m - D2) C_jm + i (G2_m b_j + G2_j b_m)   (j < m)
    i dC_jj/dt = (2 x_j - D2) C_jj    + i sqrt(2) G2_j b_j

with ``x_j`` the mode offsets from the band reference, ``d12``/``d23`` the
transition detunings and ``D2 = d12 + d23``. Multiplying ``b_j`` and ``C_jm``
by the phases ``exp(-i (x_j - d12) t)`` and ``exp(-i (x_j + x_m - D2) t)`` gives
the interaction-picture equations with explicit ``exp(+-i delta t)`` factors,
which are also available (``frame="interaction"``) for cross-checking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import sparse
from scipy.integrate import DOP853

from .discretize import DiscretizedReservoir

SQRT2 = math.sqrt(2.0)
DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12
DEFAULT_SAMPLES = 500
NORM_TOLERANCE = 1e-6


class IntegrationError(RuntimeError):
    """The integrator failed (step-size underflow or too many steps)."""


class NormDriftError(IntegrationError):
    """The state norm drifted beyond the configured bound."""

    def __init__(self, message: str, series: TimeSeries | None = None):
        super().__init__(message)
        self.series = series


def sector_size(n_modes: int) -> int:
    """Dimension ``1 + N + N(N+1)/2`` of the two-excitation sector."""
    return 1 + n_modes + n_modes * (n_modes + 1) // 2


@dataclass(frozen=True)
class LadderConfig:
    """Atom detunings from the band reference plus the reservoir they couple to."""

    delta_upper: float
    delta_lower: float
    reservoir: DiscretizedReservoir

    def __post_init__(self) -> None:
        for name in ("delta_upper", "delta_lower"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        low, up = self.reservoir.band
        for name, freq in (("upper", self.upper_frequency), ("lower", self.lower_frequency)):
            if not freq < up:
                raise ValueError(f"{name} transition at {freq:.6g} is not inside the band (top {up:.6g})")
            if low < self.reservoir.reference and not freq > low:
                raise ValueError(f"{name} transition at {freq:.6g} is not inside the band (bottom {low:.6g})")

    @property
    def two_photon_detuning(self) -> float:
        return self.delta_upper + self.delta_lower

    @property
    def upper_frequency(self) -> float:
        return self.reservoir.reference + self.delta_upper

    @property
    def lower_frequency(self) -> float:
        return self.reservoir.reference + self.delta_lower

    @property
    def n_modes(self) -> int:
        return self.reservoir.n_modes


@dataclass
class AmplitudeState:
    """Amplitudes ``a``, ``b`` (N) and packed upper-triangular ``c`` at time ``t``."""

    a: complex
    b: np.ndarray
    c: np.ndarray
    t: float = 0.0

    def __post_init__(self) -> None:
        self.a = complex(self.a)
        self.b = np.asarray(self.b, dtype=complex)
        self.c = np.asarray(self.c, dtype=complex)
        n = self.b.size
        if self.c.size != n * (n + 1) // 2:
            raise ValueError(f"expected {n * (n + 1) // 2} C amplitudes for {n} modes, got {self.c.size}")

    @property
    def n_modes(self) -> int:
        return int(self.b.size)

    @classmethod
    def from_vector(cls, y: np.ndarray, n_modes: int, t: float = 0.0) -> AmplitudeState:
        y = np.asarray(y, dtype=complex)
        if y.size != sector_size(n_modes):
            raise ValueError("vector length does not match the number of modes")
        return cls(y[0], y[1 : n_modes + 1].copy(), y[n_modes + 1 :].copy(), t)

    def vector(self) -> np.ndarray:
        return np.concatenate([[self.a], self.b, self.c])

    def c_matrix(self) -> np.ndarray:
        """Symmetric ``N x N`` matrix of ``C_jm``."""
        n = self.n_modes
        iu, ju = np.triu_indices(n)
        out = np.zeros((n, n), dtype=complex)
        out[iu, ju] = self.c
        out[ju, iu] = self.c
        return out

    def populations(self) -> tuple[float, float, float]:
        return (
            abs(self.a) ** 2,
            float(np.sum(np.abs(self.b) ** 2)),
            float(np.sum(np.abs(self.c) ** 2)),
        )


def norm(state: AmplitudeState) -> float:
    """Squared norm ``|a|^2 + sum |b_j|^2 + sum_{j<=m} |C_jm|^2``."""
    p1, p2, p3 = state.populations()
    return math.fsum((p1, p2, p3))


def initial_state(
    config: LadderConfig,
    a: complex | None = None,
    b=None,
    c=None,
    tol: float = 1e-10,
) -> AmplitudeState:
    """Atom in ``|1>`` with the field in vacuum, or a custom normalised state."""
    n = config.n_modes
    if a is None and b is None and c is None:
        return AmplitudeState(1.0, np.zeros(n, complex), np.zeros(n * (n + 1) // 2, complex))
    state = AmplitudeState(
        0.0 if a is None else a,
        np.zeros(n, complex) if b is None else b,
        np.zeros(n * (n + 1) // 2, complex) if c is None else c,
    )
    if state.n_modes != n:
        raise ValueError(f"state has {state.n_modes} modes, config has {n}")
    if abs(norm(state) - 1.0) > tol:
        raise ValueError(f"initial state is not normalised (norm^2 = {norm(state):.12g})")
    return state


class Generator:
    """Right-hand side for one :class:`LadderConfig`.

    ``rotating(y)`` returns ``dy/dt`` in the time-independent frame, as one
    sparse matrix-vector product; ``interaction(t, y)`` evaluates the
    equivalent explicit-phase equations.
    """

    def __init__(self, config: LadderConfig):
        res = config.reservoir
        n = res.n_modes
        self.n = n
        self.g1 = res.couplings_upper.astype(float)
        self.g2 = res.couplings_lower.astype(float)
        self.iu, self.ju = np.triu_indices(n)
        weight = np.ones(self.iu.size)
        weight[self.iu == self.ju] = 1.0 / SQRT2
        self.weight = weight
        x = res.offsets
        self.detuning_upper = config.delta_upper - x  # delta^1_j
        self.detuning_lower = config.delta_lower - x  # delta^2_j
        self.energies = np.concatenate(
            [
                [res.shift_upper],
                x - config.delta_upper + res.shift_lower,
                x[self.iu] + x[self.ju] - config.two_photon_detuning,
            ]
        )
        self.shifts = (res.shift_upper, res.shift_lower)
        self.matrix = self._assemble()

    def _assemble(self) -> sparse.csr_matrix:
        n = self.n
        dim = sector_size(n)
        b_idx = 1 + np.arange(n)
        c_idx = 1 + n + np.arange(self.iu.size)
        # dC_jm/dt <- G2_m b_j + G2_j b_m; the two terms add on the diagonal,
        # where the weight 1/sqrt(2) turns 2 G2_j into sqrt(2) G2_j
        emit_rows = np.concatenate([c_idx, c_idx])
        emit_cols = np.concatenate([b_idx[self.iu], b_idx[self.ju]])
        emit_vals = np.concatenate([self.weight * self.g2[self.ju], self.weight * self.g2[self.iu]])
        rows = np.concatenate([np.arange(dim), b_idx, np.zeros(n, int), emit_rows, emit_cols])
        cols = np.concatenate([np.arange(dim), np.zeros(n, int), b_idx, emit_cols, emit_rows])
        vals = np.concatenate(
            [-1j * self.energies, self.g1, -self.g1, emit_vals, -emit_vals]
        ).astype(complex)
        return sparse.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr()

    @property
    def max_frequency(self) -> float:
        return float(np.max(np.abs(self.energies)))

    def rotating(self, y: np.ndarray) -> np.ndarray:
        return self.matrix @ y

    def interaction(self, t: float, y: np.ndarray) -> np.ndarray:
        n = self.n
        a, b, c = y[0], y[1 : n + 1], y[n + 1 :]
        s1, s2 = self.shifts
        e1 = np.exp(1j * self.detuning_upper * t)
        e2 = np.exp(1j * self.detuning_lower * t)
        m = np.zeros((n, n), dtype=complex)
        m[self.iu, self.ju] = c
        m[self.ju, self.iu] = c
        m[np.arange(n), np.arange(n)] *= SQRT2
        dy = np.empty_like(y)
        dy[0] = -1j * s1 * a - np.dot(self.g1 * e1, b)
        dy[1 : n + 1] = -1j * s2 * b - m @ (self.g2 * e2) + self.g1 * a * np.conj(e1)
        ge = self.g2 * np.conj(e2)
        dy[n + 1 :] = self.weight * (ge[self.ju] * b[self.iu] + ge[self.iu] * b[self.ju])
        return dy

    def to_interaction(self, t: float, y: np.ndarray) -> np.ndarray:
        """Map a rotating-frame vector at time ``t`` to the interaction picture."""
        n = self.n
        phase = np.concatenate([[0.0], self.energies[1 : n + 1] - self.shifts[1], self.energies[n + 1 :]])
        return y * np.exp(1j * phase * t)


def rhs(state: AmplitudeState, config: LadderConfig, frame: str = "rotating") -> AmplitudeState:
    """Time derivative of ``state``.

    ``frame="interaction"`` evaluates the explicit-phase equations at ``state.t``.
    """
    if state.n_modes != config.n_modes:
        raise ValueError("state and config disagree on the number of modes")
    gen = Generator(config)
    y = state.vector()
    if frame == "rotating":
        dy = gen.rotating(y)
    elif frame == "interaction":
        dy = gen.interaction(state.t, y)
    else:
        raise ValueError(f"unknown frame {frame!r}")
    return AmplitudeState.from_vector(dy, config.n_modes, state.t)


@dataclass
class TimeSeries:
    """Sampled atomic populations; ``norm`` holds the squared norm."""

    times: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    p3: np.ndarray
    norm: np.ndarray
    spectra: np.ndarray | None = None
    final_state: AmplitudeState | None = None
    stats: dict[str, Any] = field(default_factory=dict)

    def level(self, index: int) -> np.ndarray:
        if index not in (1, 2, 3):
            raise ValueError(f"level must be 1, 2 or 3, got {index}")
        return (self.p1, self.p2, self.p3)[index - 1]

    @property
    def max_norm_drift(self) -> float:
        return float(np.max(np.abs(self.norm - 1.0)))

    def __len__(self) -> int:
        return int(self.times.size)


def _mode_occupations(y: np.ndarray, n: int, iu: np.ndarray, ju: np.ndarray) -> np.ndarray:
    b = y[1 : n + 1]
    c2 = np.abs(y[n + 1 :]) ** 2
    occ = np.abs(b) ** 2
    # every C_jm puts one photon in j and one in m; C_jj puts two in j
    occ = occ + np.bincount(iu, weights=c2, minlength=n) + np.bincount(ju, weights=c2, minlength=n)
    return occ


def propagate(
    config: LadderConfig,
    t_end: float,
    n_samples: int = DEFAULT_SAMPLES,
    *,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    max_step: float | None = None,
    norm_tolerance: float = NORM_TOLERANCE,
    spectra: bool = False,
    initial: AmplitudeState | None = None,
    frame: str = "rotating",
) -> TimeSeries:
    """Integrate the amplitude equations from ``initial`` (default ``|1, vac>``).

    Populations are recorded at ``n_samples`` equally spaced times in
    ``[0, t_end]`` through the integrator's dense output. The final state is
    returned in the rotating frame (or the interaction picture when
    ``frame="interaction"``).

    Raises
    ------
    IntegrationError
        Step-size underflow or other integrator failure.
    NormDriftError
        ``|norm^2 - 1|`` exceeded ``norm_tolerance`` at some sample.
    """
    if not (math.isfinite(t_end) and t_end > 0):
        raise ValueError(f"t_end must be positive, got {t_end}")
    if n_samples < 2:
        raise ValueError("need at least two samples")
    if not (rtol > 0 and atol > 0):
        raise ValueError("tolerances must be positive")
    gen = Generator(config)
    n = config.n_modes
    state = initial_state(config) if initial is None else initial
    if state.n_modes != n:
        raise ValueError("initial state and config disagree on the number of modes")
    y0 = state.vector()
    max_step = t_end if max_step is None else min(max_step, t_end)

    if frame == "rotating":
        fun = lambda t, y: gen.rotating(y)  # noqa: E731
    elif frame == "interaction":
        fun = gen.interaction
    else:
        raise ValueError(f"unknown frame {frame!r}")

    times = np.linspace(0.0, t_end, n_samples)
    pops = np.empty((n_samples, 3))
    occ = np.empty((n_samples, n)) if spectra else None

    def record(k: int, y: np.ndarray) -> None:
        pops[k, 0] = abs(y[0]) ** 2
        pops[k, 1] = np.sum(np.abs(y[1 : n + 1]) ** 2)
        pops[k, 2] = np.sum(np.abs(y[n + 1 :]) ** 2)
        if occ is not None:
            occ[k] = _mode_occupations(y, n, gen.iu, gen.ju)

    record(0, y0)
    solver = DOP853(fun, 0.0, y0, t_end, max_step=max_step, rtol=rtol, atol=atol)
    k = 1
    steps = 0
    while k < n_samples:
        message = solver.step()
        if solver.status == "failed":
            raise IntegrationError(f"integration failed at t = {solver.t:.6g}: {message}")
        steps += 1
        if k < n_samples and times[k] <= solver.t:
            interp = solver.dense_output()
            while k < n_samples and times[k] <= solver.t:
                y = solver.y if times[k] == solver.t else interp(times[k])
                record(k, y)
                k += 1
        if solver.status == "finished" and k < n_samples:
            # last sample coincides with t_end up to rounding
            while k < n_samples:
                record(k, solver.y)
                k += 1

    norm2 = pops.sum(axis=1)
    final = AmplitudeState.from_vector(solver.y, n, float(solver.t))
    series = TimeSeries(
        times=times,
        p1=pops[:, 0].copy(),
        p2=pops[:, 1].copy(),
        p3=pops[:, 2].copy(),
        norm=norm2,
        spectra=occ,
        final_state=final,
        stats={
            "steps": steps,
            "nfev": int(solver.nfev),
            "rtol": rtol,
            "atol": atol,
            "max_step": max_step,
            "frame": frame,
            "dimension": sector_size(n),
        },
    )
    drift = series.max_norm_drift
    series.stats["max_norm_drift"] = drift
    if drift > norm_tolerance:
        raise NormDriftError(f"norm drift {drift:.3g} exceeds {norm_tolerance:.3g}", series)
    return series
