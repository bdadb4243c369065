"""Multi-mode parametric waveguide propagation on a 1D moving-frame grid.

Ten stochastic fields over comoving time t_v: pump Psi, its conjugate-role
partner Psi^+, four down-converted fields Phi_i^a, Phi_i^b (i = 1, 2 labels
polarization pairs, a/b the two output polarizations) and their four
partners.  Propagation is in z:

  d Phi_i^a = [-(i k''/2) d^2/dt^2 - gamma] Phi_i^a dz
              + kappa* Psi Phi_i^b+ dz + sqrt(kappa* Psi) zeta_i
  d Phi_i^b =  same with Phi_i^a+ and zeta_i*
  d Phi_i^a+ = [+(i k''/2) d^2/dt^2 - gamma] Phi_i^a+ dz
              + kappa Psi^+ Phi_i^b dz + sqrt(kappa Psi^+) zeta_i^+
  d Phi_i^b+ =  same with Phi_i^a and (zeta_i^+)*
  d Psi   = [-(i k_p''/2) d^2/dt^2 - gamma_p] Psi dz
              - kappa (Phi_1^a Phi_1^b + Phi_2^a Phi_2^b) dz
  d Psi^+ =  conjugate-role mirror with -kappa* (Phi^a+ Phi^b+) sums

with zeta delta-correlated in z and t_v (variance dz / delta_t per grid
cell per step).  The scheme is split-step: a half step of the linear part
applied exactly in the Fourier domain, a full midpoint step of the local
coupling and noise (noise coefficient evaluated at the midpoint), then a
second linear half step.

The square root of the complex pump is taken on the principal branch with
sign continuity tracked along z per grid cell; trajectories that go
non-finite are counted as failed and excluded from statistics.

Output modes: at a chosen grid cell the flux-normalized amplitudes
alpha = Phi sqrt(delta_t) are handed to the four-mode estimators under the
identification (Phi_1^a, Phi_2^a, Phi_1^b, Phi_2^b) -> (alpha_1, alpha_2,
beta_1, beta_2); the polarizing beam splitter that separates the arms is
this relabeling.  With one grid cell, a frozen constant pump, and no
dispersion or loss, the per-cell equations are term for term the four-mode
model with kappa E = kappa Psi_0 and z in the role of t.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .sde import _steps_for

PUMP_KINDS = ("constant", "gaussian")
SIGNAL_KINDS = ("none", "constant", "gaussian")

MIDPOINT_ITERATIONS = 4

# row layout of the field array
PSI, PSI_P = 0, 1
PHI_A1, PHI_A2, PHI_B1, PHI_B2 = 2, 3, 4, 5
PHI_A1_P, PHI_A2_P, PHI_B1_P, PHI_B2_P = 6, 7, 8, 9

_SIG = np.array([PHI_A1, PHI_A2, PHI_B1, PHI_B2])
_SIG_P = np.array([PHI_A1_P, PHI_A2_P, PHI_B1_P, PHI_B2_P])
# drift partner of each signal row: a <-> b+ within a pair, mirrored for plus
_PARTNER = np.array([PHI_B1_P, PHI_B2_P, PHI_A1_P, PHI_A2_P,
                     PHI_B1, PHI_B2, PHI_A1, PHI_A2])


@dataclass(frozen=True)
class WaveguideConfig:
    """Grid, medium, pump, and run parameters for one propagation."""

    kappa: complex = 1.0
    k2: float = 0.0
    k2_p: float = 0.0
    gamma_loss: float = 0.0
    gamma_p: float = 0.0
    z_end: float = 0.1
    dz: float = 2e-4
    n_t: int = 1
    T: float = 1.0
    seed: int = 1
    n_traj: int = 1 << 16
    record_z: tuple = field(default=None)
    pump_kind: str = "constant"
    pump_peak: complex = 1.0
    pump_t0: float = 0.0
    pump_width: float = 0.1
    pump_frozen: bool = True
    signal_kind: str = "none"
    signal_peak: complex = 0.0
    signal_t0: float = 0.0
    signal_width: float = 0.1
    cell_index: int = None

    def __post_init__(self):
        if self.dz <= 0:
            raise ConfigError(f"dz must be positive, got {self.dz}")
        if self.z_end < self.dz:
            raise ConfigError(f"z_end must be at least dz, got {self.z_end}")
        if self.n_t < 1 or self.n_t & (self.n_t - 1):
            raise ConfigError(f"n_t must be a power of two, got {self.n_t}")
        if self.T <= 0:
            raise ConfigError(f"window T must be positive, got {self.T}")
        if self.n_traj < 1:
            raise ConfigError(f"n_traj must be positive, got {self.n_traj}")
        if self.pump_kind not in PUMP_KINDS:
            raise ConfigError(f"pump_kind must be one of {PUMP_KINDS}")
        if self.signal_kind not in SIGNAL_KINDS:
            raise ConfigError(f"signal_kind must be one of {SIGNAL_KINDS}")
        if self.pump_kind == "gaussian" and self.pump_width <= 0:
            raise ConfigError("pump_width must be positive for a gaussian pump")
        if self.signal_kind == "gaussian" and self.signal_width <= 0:
            raise ConfigError("signal_width must be positive for a gaussian seed")
        rz = self.record_z
        rz = (self.z_end,) if rz is None else tuple(float(z) for z in rz)
        if not rz:
            raise ConfigError("record_z must not be empty")
        if any(z < 0 or z > self.z_end + 1e-12 for z in rz):
            raise ConfigError(f"record_z must lie in [0, z_end], got {rz}")
        if list(rz) != sorted(rz):
            raise ConfigError("record_z must be sorted ascending")
        for z in rz:
            _steps_for(z, self.dz)
        object.__setattr__(self, "record_z", rz)
        ci = self.n_t // 2 if self.cell_index is None else int(self.cell_index)
        if not 0 <= ci < self.n_t:
            raise ConfigError(f"cell_index must be in [0, {self.n_t}), got {ci}")
        object.__setattr__(self, "cell_index", ci)

    @property
    def delta_t(self) -> float:
        return self.T / self.n_t

    @property
    def n_steps(self) -> int:
        return _steps_for(self.z_end, self.dz)

    def record_steps(self) -> dict:
        return {_steps_for(z, self.dz): z for z in self.record_z}

    def t_grid(self) -> np.ndarray:
        """Comoving time samples, centered on cell n_t // 2."""
        return self.delta_t * (np.arange(self.n_t) - self.n_t // 2)

    @property
    def effective_kappa_E(self) -> float:
        return float((self.kappa * self.pump_peak).real)

    @property
    def is_reduction(self) -> bool:
        """True when the configuration is exactly the four-mode model."""
        ke = self.kappa * self.pump_peak
        return (self.n_t == 1 and self.pump_frozen
                and self.pump_kind == "constant"
                and self.k2 == 0 and self.k2_p == 0
                and self.gamma_loss == 0 and self.gamma_p == 0
                and abs(ke.imag) < 1e-14 and ke.real > 0)

    def pump_profile(self) -> np.ndarray:
        t = self.t_grid()
        if self.pump_kind == "constant":
            return np.full(self.n_t, self.pump_peak, dtype=np.complex128)
        w = self.pump_width
        return self.pump_peak * np.exp(-((t - self.pump_t0) ** 2) / (2 * w * w))

    def signal_profile(self) -> np.ndarray:
        t = self.t_grid()
        if self.signal_kind == "none":
            return np.zeros(self.n_t, dtype=np.complex128)
        if self.signal_kind == "constant":
            return np.full(self.n_t, self.signal_peak, dtype=np.complex128)
        w = self.signal_width
        return self.signal_peak * np.exp(-((t - self.signal_t0) ** 2) / (2 * w * w))


def dispersed_gaussian(cfg: WaveguideConfig, z: float) -> np.ndarray:
    """Analytic linear propagation of the gaussian signal seed (kappa = 0).

    For Phi(0, t) = A exp(-t^2 / (2 sigma^2)) under the dispersion-plus-loss
    linear part, with s(z) = sigma^2 - i k'' z:

        Phi(z, t) = A e^{-gamma z} sigma / sqrt(s) exp(-t^2 / (2 s))

    valid while the pulse stays well inside the periodic window."""
    if cfg.signal_kind != "gaussian":
        raise ConfigError("analytic solution needs a gaussian signal seed")
    t = cfg.t_grid() - cfg.signal_t0
    s = cfg.signal_width ** 2 - 1j * cfg.k2 * z
    amp = cfg.signal_peak * np.exp(-cfg.gamma_loss * z)
    return amp * cfg.signal_width / np.sqrt(s) * np.exp(-(t * t) / (2 * s))


def _linear_half_step(cfg: WaveguideConfig) -> np.ndarray:
    """Spectral multipliers for half a step of dispersion and loss, one row
    per field; conjugate-role rows get the opposite dispersion sign."""
    omega = 2 * np.pi * np.fft.fftfreq(cfg.n_t, d=cfg.delta_t)
    w2 = omega * omega
    h = cfg.dz / 2
    rows = np.empty((10, cfg.n_t), dtype=np.complex128)
    rows[PSI] = np.exp((0.5j * cfg.k2_p * w2 - cfg.gamma_p) * h)
    rows[PSI_P] = np.exp((-0.5j * cfg.k2_p * w2 - cfg.gamma_p) * h)
    sig = np.exp((0.5j * cfg.k2 * w2 - cfg.gamma_loss) * h)
    sig_p = np.exp((-0.5j * cfg.k2 * w2 - cfg.gamma_loss) * h)
    for r in _SIG:
        rows[r] = sig
    for r in _SIG_P:
        rows[r] = sig_p
    return rows


def _aligned_sqrt(val: np.ndarray, prev: np.ndarray):
    """Principal square root with the sign flipped wherever it points away
    from the previous value; returns (root, flip count)."""
    amp = np.sqrt(val)
    if prev is None:
        return amp, 0
    flip = amp.real * prev.real + amp.imag * prev.imag < 0
    n_flip = int(np.count_nonzero(flip))
    if n_flip:
        amp = np.where(flip, -amp, amp)
    return amp, n_flip


def initial_state(cfg: WaveguideConfig, n: int) -> np.ndarray:
    """Vacuum down-conversion fields, coherent pump and optional coherent
    signal seed on the hermitian diagonal (plus field = conjugate)."""
    x = np.zeros((10, cfg.n_t, n), dtype=np.complex128)
    pump = cfg.pump_profile()
    x[PSI] = pump[:, None]
    x[PSI_P] = np.conj(pump)[:, None]
    seed_profile = cfg.signal_profile()
    x[PHI_A1] = seed_profile[:, None]
    x[PHI_A1_P] = np.conj(seed_profile)[:, None]
    return x


def evolve_chunk(n: int, cfg: WaveguideConfig, rng, on_record,
                 snapshot: dict = None) -> tuple:
    """Propagate n trajectories, invoking
    on_record(z, alpha, alpha_plus, alive) at each recorded z with the
    flux-normalized output modes of the configured grid cell.  When a
    snapshot dict is supplied it additionally receives a full copy of the
    (10, n_t, n) field array at each recorded z.

    Returns (number of trajectories non-finite at z_end, branch flip count)."""
    x = initial_state(cfg, n)
    record = cfg.record_steps()
    lin = _linear_half_step(cfg)
    lin_active = not np.allclose(lin, 1.0, rtol=0, atol=0)
    spectral = cfg.n_t > 1 and (cfg.k2 != 0 or cfg.k2_p != 0)
    mult = lin[:, :, None]
    if cfg.pump_frozen:
        mult = mult.copy()
        mult[PSI] = 1.0
        mult[PSI_P] = 1.0

    kc = np.conj(cfg.kappa)
    s_noise = np.sqrt(cfg.dz / (2 * cfg.delta_t))
    half_dz = 0.5 * cfg.dz
    flux = np.sqrt(cfg.delta_t)
    cell = cfg.cell_index

    amp_a_prev = None
    amp_p_prev = None
    n_flips = 0

    def emit(z):
        alive = np.isfinite(x).all(axis=(0, 1))
        alpha = x[_SIG][:, cell, :] * flux
        alpha_plus = x[_SIG_P][:, cell, :] * flux
        if snapshot is not None:
            snapshot[z] = x.copy()
        on_record(z, alpha, alpha_plus, alive)

    if 0 in record:
        emit(record[0])

    mid = np.empty_like(x)
    for k in range(1, cfg.n_steps + 1):
        if lin_active:
            if spectral:
                x = np.fft.ifft(np.fft.fft(x, axis=1) * mult, axis=1)
            else:
                x *= mult
        g = rng.standard_normal((8, cfg.n_t, n)) * s_noise
        z1 = g[0] + 1j * g[1]
        z2 = g[2] + 1j * g[3]
        z1p = g[4] + 1j * g[5]
        z2p = g[6] + 1j * g[7]
        np.copyto(mid, x)
        for _ in range(MIDPOINT_ITERATIONS):
            pump = mid[PSI]
            pump_p = mid[PSI_P]
            amp_a, fa = _aligned_sqrt(kc * pump, amp_a_prev)
            amp_p, fp = _aligned_sqrt(cfg.kappa * pump_p, amp_p_prev)
            drift_sig = mid[_PARTNER].copy()
            drift_sig[:4] *= kc * pump
            drift_sig[4:] *= cfg.kappa * pump_p
            mid[_SIG[0]] = x[_SIG[0]] + half_dz * drift_sig[0] + 0.5 * amp_a * z1
            mid[_SIG[1]] = x[_SIG[1]] + half_dz * drift_sig[1] + 0.5 * amp_a * z2
            mid[_SIG[2]] = x[_SIG[2]] + half_dz * drift_sig[2] + 0.5 * amp_a * np.conj(z1)
            mid[_SIG[3]] = x[_SIG[3]] + half_dz * drift_sig[3] + 0.5 * amp_a * np.conj(z2)
            mid[_SIG_P[0]] = x[_SIG_P[0]] + half_dz * drift_sig[4] + 0.5 * amp_p * z1p
            mid[_SIG_P[1]] = x[_SIG_P[1]] + half_dz * drift_sig[5] + 0.5 * amp_p * z2p
            mid[_SIG_P[2]] = x[_SIG_P[2]] + half_dz * drift_sig[6] + 0.5 * amp_p * np.conj(z1p)
            mid[_SIG_P[3]] = x[_SIG_P[3]] + half_dz * drift_sig[7] + 0.5 * amp_p * np.conj(z2p)
            if not cfg.pump_frozen:
                dep = mid[PHI_A1] * mid[PHI_B1] + mid[PHI_A2] * mid[PHI_B2]
                dep_p = (mid[PHI_A1_P] * mid[PHI_B1_P]
                         + mid[PHI_A2_P] * mid[PHI_B2_P])
                mid[PSI] = x[PSI] - half_dz * cfg.kappa * dep
                mid[PSI_P] = x[PSI_P] - half_dz * kc * dep_p
        n_flips += fa + fp
        amp_a_prev = amp_a
        amp_p_prev = amp_p
        x = 2.0 * mid - x
        if cfg.pump_frozen:
            x[PSI] = mid[PSI]
            x[PSI_P] = mid[PSI_P]
        if lin_active:
            if spectral:
                x = np.fft.ifft(np.fft.fft(x, axis=1) * mult, axis=1)
            else:
                x *= mult
        if k in record:
            emit(record[k])

    alive = np.isfinite(x).all(axis=(0, 1))
    return n - int(np.count_nonzero(alive)), n_flips


@dataclass(frozen=True, eq=False)
class PropagationResult:
    """Raw field snapshots plus failure accounting for a direct run."""

    fields: dict            # z -> (10, n_t, n_traj) complex array
    n_failed: int
    n_branch_flips: int
    config: WaveguideConfig

    def output_modes(self, z: float):
        """Flux-normalized (alpha, alpha_plus) at the configured cell."""
        x = self.fields[z]
        flux = np.sqrt(self.config.delta_t)
        return (x[_SIG][:, self.config.cell_index, :] * flux,
                x[_SIG_P][:, self.config.cell_index, :] * flux)


def propagate(cfg: WaveguideConfig) -> PropagationResult:
    """Direct single-chunk propagation, materializing field snapshots.

    Uses the same substream as chunk 0 of the ensemble path, so a direct run
    with n_traj at most the ensemble chunk size reproduces its first chunk.
    Ensemble statistics at scale belong to runner.run_waveguide."""
    from .runner import STREAM_WAVEGUIDE, substream

    rng = substream(cfg.seed, STREAM_WAVEGUIDE, 0)
    snaps = {}

    def ignore(z, alpha, alpha_plus, alive):
        pass

    n_failed, n_flips = evolve_chunk(cfg.n_traj, cfg, rng, ignore,
                                     snapshot=snaps)
    return PropagationResult(fields=snaps, n_failed=n_failed,
                             n_branch_flips=n_flips, config=cfg)
