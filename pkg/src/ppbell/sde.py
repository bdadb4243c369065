"""Stochastic time evolution of the positive-P variables under parametric down-conversion.

Eight coupled complex equations (kappa_E real, dW and dW^+ independent):

    d alpha_1 = kappa_E beta_1^+ dt + sqrt(kappa_E) dW_1
    d beta_1  = kappa_E alpha_1^+ dt + sqrt(kappa_E) dW_1*
    d alpha_2 = kappa_E beta_2^+ dt + sqrt(kappa_E) dW_2
    d beta_2  = kappa_E alpha_2^+ dt + sqrt(kappa_E) dW_2*
    d alpha_1^+ = kappa_E beta_1 dt + sqrt(kappa_E) dW_1^+
    d beta_1^+  = kappa_E alpha_1 dt + sqrt(kappa_E) (dW_1^+)*
    d alpha_2^+ = kappa_E beta_2 dt + sqrt(kappa_E) dW_2^+
    d beta_2^+  = kappa_E alpha_2 dt + sqrt(kappa_E) (dW_2^+)*

The only non-vanishing noise correlators are <dW_i dW_j*> = dt delta_ij and
the same for the plus increments.  The noise is additive, so the Stratonovich
and Ito solutions coincide; the integrator is the semi-implicit midpoint
(central difference) rule with a fixed count of 4 fixed-point iterations.

Initial condition is the vacuum: a point mass at the origin of phase space.

State layout in the batch path: one complex array of shape (8, n) with rows
(alpha_1, alpha_2, beta_1, beta_2, alpha_1^+, alpha_2^+, beta_1^+, beta_2^+).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NonFiniteError
from .phasespace import PhasePoint

DEFAULT_KAPPA_E = 1.0
DEFAULT_DT = 2e-4

TAU_HARD_CAP = 1.0
TAU_WARN = 0.5

MIDPOINT_ITERATIONS = 4

# d x[i]/dt = kappa_E * x[DRIFT_ROWS[i]] in the (8, n) layout
DRIFT_ROWS = np.array([6, 7, 4, 5, 2, 3, 0, 1])


def _steps_for(t: float, dt: float) -> int:
    k = int(round(t / dt))
    if abs(t - k * dt) > 1e-9 * max(1.0, abs(t)):
        raise ConfigError(f"time {t} is not an integer multiple of dt={dt}")
    return k


@dataclass(frozen=True)
class SdeConfig:
    """Parameters of one trajectory-ensemble run."""

    kappa_E: float = DEFAULT_KAPPA_E
    dt: float = DEFAULT_DT
    t_end: float = 0.1
    n_traj: int = 1 << 18
    seed: int = 1
    record_times: tuple = field(default=None)

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.t_end < self.dt:
            raise ConfigError(f"t_end must be at least dt, got {self.t_end}")
        if self.kappa_E <= 0:
            raise ConfigError(f"kappa_E must be positive, got {self.kappa_E}")
        if self.n_traj < 1:
            raise ConfigError(f"n_traj must be positive, got {self.n_traj}")
        tau_end = self.kappa_E * self.t_end
        if tau_end > TAU_HARD_CAP:
            raise ConfigError(
                f"kappa_E * t_end = {tau_end:g} exceeds the hard cap {TAU_HARD_CAP}; "
                "sampling error grows too fast beyond it")
        if tau_end > TAU_WARN:
            warnings.warn(
                f"kappa_E * t_end = {tau_end:g} > {TAU_WARN}: sampling error "
                "grows noticeably in this regime", stacklevel=2)
        rt = self.record_times
        rt = (self.t_end,) if rt is None else tuple(float(t) for t in rt)
        if not rt:
            raise ConfigError("record_times must not be empty")
        if any(t < 0 or t > self.t_end + 1e-12 for t in rt):
            raise ConfigError(f"record_times must lie in [0, t_end], got {rt}")
        if list(rt) != sorted(rt):
            raise ConfigError("record_times must be sorted ascending")
        for t in rt:
            _steps_for(t, self.dt)  # validates divisibility
        object.__setattr__(self, "record_times", rt)

    @property
    def n_steps(self) -> int:
        return _steps_for(self.t_end, self.dt)

    def record_steps(self) -> dict:
        """Map step index -> record time."""
        return {_steps_for(t, self.dt): t for t in self.record_times}


@dataclass(frozen=True)
class NoiseDraw:
    """Wiener increments for one step of one trajectory."""

    dW1: complex
    dW2: complex
    dW1p: complex
    dW2p: complex


def draw_noise(dt: float, rng) -> NoiseDraw:
    """One set of increments: each sqrt(dt/2) (eta_r + i eta_i), all independent."""
    if dt <= 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    g = rng.standard_normal(8) * np.sqrt(dt / 2)
    return NoiseDraw(dW1=complex(g[0], g[1]), dW2=complex(g[2], g[3]),
                     dW1p=complex(g[4], g[5]), dW2p=complex(g[6], g[7]))


def _state_to_rows(point: PhasePoint) -> np.ndarray:
    a, ap = point.alpha, point.alpha_plus
    return np.concatenate([np.asarray([a[0], a[1], a[2], a[3]]),
                           np.asarray([ap[0], ap[1], ap[2], ap[3]])]).reshape(8, -1)


def _rows_to_state(x: np.ndarray, squeeze: bool) -> PhasePoint:
    a, ap = x[:4], x[4:]
    if squeeze:
        a, ap = a[:, 0], ap[:, 0]
    return PhasePoint(alpha=a, alpha_plus=ap)


def drift(state: PhasePoint, kappa_E: float) -> PhasePoint:
    """Deterministic increment rates, returned in the same PhasePoint layout."""
    x = _state_to_rows(state)
    dx = kappa_E * x[DRIFT_ROWS]
    return _rows_to_state(dx, squeeze=state.alpha.ndim == 1)


def _noise_rows(noise: NoiseDraw, kappa_E: float) -> np.ndarray:
    s = np.sqrt(kappa_E)
    return s * np.array([
        noise.dW1, noise.dW2, np.conj(noise.dW1), np.conj(noise.dW2),
        noise.dW1p, noise.dW2p, np.conj(noise.dW1p), np.conj(noise.dW2p),
    ]).reshape(8, 1)


def step(state: PhasePoint, cfg: SdeConfig, noise: NoiseDraw) -> PhasePoint:
    """One semi-implicit midpoint step.

    Iterate x_mid = x0 + (drift(x_mid) dt + noise)/2 four times, then
    x1 = 2 x_mid - x0.
    """
    x0 = _state_to_rows(state)
    w = _noise_rows(noise, cfg.kappa_E)
    base = x0 + 0.5 * w
    c = 0.5 * cfg.dt * cfg.kappa_E
    mid = x0.copy()
    for _ in range(MIDPOINT_ITERATIONS):
        mid = base + c * mid[DRIFT_ROWS]
    x1 = 2.0 * mid - x0
    if not np.isfinite(x1).all():
        raise NonFiniteError("non-finite state after step; linear system must not fail")
    return _rows_to_state(x1, squeeze=state.alpha.ndim == 1)


def evolve_chunk(n: int, cfg: SdeConfig, rng, on_record) -> None:
    """Run n vacuum-seeded trajectories, invoking on_record(time, alpha, alpha_plus).

    The batch path repeats the scalar `step` arithmetic exactly (same
    operation order per midpoint iteration) with buffer reuse.  Records hand
    out views of the live state split as alpha = rows 0..3,
    alpha_plus = rows 4..7; callbacks must not mutate or retain them.
    """
    x = np.zeros((8, n), dtype=np.complex128)
    g = np.empty((8, n))
    w = np.empty((8, n), dtype=np.complex128)
    base = np.empty_like(x)
    mid = np.empty_like(x)
    buf = np.empty_like(x)
    record = cfg.record_steps()
    if 0 in record:
        on_record(record[0], x[:4], x[4:])
    s_noise = np.sqrt(cfg.dt / 2) * np.sqrt(cfg.kappa_E)
    c = 0.5 * cfg.dt * cfg.kappa_E
    for k in range(1, cfg.n_steps + 1):
        rng.standard_normal(out=g)
        g *= s_noise
        w.real[0] = g[0]; w.imag[0] = g[1]
        w.real[1] = g[2]; w.imag[1] = g[3]
        w.real[2] = g[0]; w.imag[2] = -g[1]
        w.real[3] = g[2]; w.imag[3] = -g[3]
        w.real[4] = g[4]; w.imag[4] = g[5]
        w.real[5] = g[6]; w.imag[5] = g[7]
        w.real[6] = g[4]; w.imag[6] = -g[5]
        w.real[7] = g[6]; w.imag[7] = -g[7]
        np.multiply(w, 0.5, out=base)
        base += x
        np.copyto(mid, x)
        for _ in range(MIDPOINT_ITERATIONS):
            np.take(mid, DRIFT_ROWS, axis=0, out=buf)
            buf *= c
            buf += base
            mid, buf = buf, mid
        x *= -1.0
        x += mid
        x += mid
        if k in record:
            if not np.isfinite(x).all():
                bad = int(np.count_nonzero(~np.isfinite(x).all(axis=0)))
                raise NonFiniteError(
                    f"{bad} non-finite trajectories at t={record[k]:g}; "
                    "the linear system must have zero failures")
            on_record(record[k], x[:4], x[4:])


def simulate(cfg: SdeConfig, workers: int = None) -> dict:
    """Full trajectory set: {record_time: PhasePoint batch of shape (4, n_traj)}.

    Deterministic given (seed, n_traj): trajectories are generated in fixed
    chunks with per-chunk random substreams, so the result is independent of
    the worker count.  For large runs prefer the accumulator pipeline in
    `ppbell.runner`, which never materializes whole ensembles.
    """
    from . import runner

    raw = runner.run_dynamic_raw(cfg, workers=workers)
    return {t: PhasePoint(alpha=x[:4], alpha_plus=x[4:]) for t, x in raw.items()}
