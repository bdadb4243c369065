"""Positive-P phase-space value types, polarizer rotations, and quasi-observable kernels.

A positive-P sample carries four complex mode amplitudes (alpha_1, alpha_2,
beta_1, beta_2) together with four independent conjugate-role partners
(alpha_1^+, ..., beta_2^+).  The partner equals the complex conjugate only on
the hermitian diagonal of the distribution; everywhere else it is a separate
coordinate, which is what lets normally ordered operator moments become plain
phase-space averages.

Mode order is fixed as (A1, A2, B1, B2) in every array in this package.

All operations here are pure and broadcast over a trailing sample axis, so a
PhasePoint may hold a single sample (shape ``(4,)``) or a whole batch
(shape ``(4, n)``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NonFiniteError

MODE_LABELS = ("A1", "A2", "B1", "B2")

ROTATED_MODES = ("gamma_plus", "gamma_minus", "delta_plus", "delta_minus")

MAX_POWER = 32

EVENT_PATTERNS = ("++", "+-", "-+", "--")


def _as_complex_4(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.complex128)
    if arr.ndim not in (1, 2) or arr.shape[0] != 4:
        raise ConfigError(f"{name} must have shape (4,) or (4, n), got {arr.shape}")
    return arr


def _check_finite(arr: np.ndarray, name: str) -> None:
    if not np.isfinite(arr).all():
        bad = np.argwhere(~np.isfinite(arr))
        coord = tuple(bad[0])
        raise NonFiniteError(f"non-finite value in {name} at index {coord}")


@dataclass(frozen=True)
class PhasePoint:
    """One positive-P sample (or a batch): amplitudes and conjugate-role partners.

    ``alpha[k]`` and ``alpha_plus[k]`` pair up per mode; 8 complex numbers
    = 16 real coordinates per sample.
    """

    alpha: np.ndarray
    alpha_plus: np.ndarray

    def __post_init__(self):
        a = _as_complex_4(self.alpha, "alpha")
        ap = _as_complex_4(self.alpha_plus, "alpha_plus")
        if a.shape != ap.shape:
            raise ConfigError(
                f"alpha and alpha_plus shapes differ: {a.shape} vs {ap.shape}")
        _check_finite(a, "alpha")
        _check_finite(ap, "alpha_plus")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "alpha_plus", ap)

    @property
    def n_samples(self) -> int:
        return 1 if self.alpha.ndim == 1 else self.alpha.shape[1]


@dataclass(frozen=True)
class RotatedPoint:
    """Polarizer-basis amplitudes for analyser angles (theta at A, phi at B)."""

    gamma_plus: np.ndarray
    gamma_minus: np.ndarray
    delta_plus: np.ndarray
    delta_minus: np.ndarray
    gamma_plus_p: np.ndarray
    gamma_minus_p: np.ndarray
    delta_plus_p: np.ndarray
    delta_minus_p: np.ndarray
    theta: float
    phi: float

    def mode(self, name: str):
        """Return (amplitude, conjugate-role partner) for a rotated mode."""
        if name not in ROTATED_MODES:
            raise ConfigError(f"unknown rotated mode {name!r}; expected one of {ROTATED_MODES}")
        return getattr(self, name), getattr(self, name + "_p")


@dataclass(frozen=True)
class QuasiNumber:
    """A quasi-photon-number sample n = gamma^+ gamma.

    Complex sample by sample; only the ensemble mean is constrained (real up
    to sampling error, non-negative up to sampling error), which is asserted
    at the estimator level.
    """

    value: complex


def rotate(point: PhasePoint, theta: float, phi: float) -> RotatedPoint:
    """Rotate to the polarizer basis at analyser angles theta (side A), phi (side B).

    gamma_+ = alpha_1 cos(theta) + alpha_2 sin(theta)
    gamma_- = -alpha_1 sin(theta) + alpha_2 cos(theta)
    and likewise delta_+/- from (beta_1, beta_2) with phi.  The conjugate-role
    partners transform with the same real coefficients, so total
    quasi-intensity per side is preserved exactly.
    """
    a, ap = point.alpha, point.alpha_plus
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    return RotatedPoint(
        gamma_plus=ct * a[0] + st * a[1],
        gamma_minus=-st * a[0] + ct * a[1],
        delta_plus=cp * a[2] + sp * a[3],
        delta_minus=-sp * a[2] + cp * a[3],
        gamma_plus_p=ct * ap[0] + st * ap[1],
        gamma_minus_p=-st * ap[0] + ct * ap[1],
        delta_plus_p=cp * ap[2] + sp * ap[3],
        delta_minus_p=-sp * ap[2] + cp * ap[3],
        theta=float(theta),
        phi=float(phi),
    )


def quasi_intensity(rp: RotatedPoint, mode: str):
    """n = m^+ m for one rotated mode (complex sample by sample)."""
    m, mp = rp.mode(mode)
    return mp * m


def quasi_intensity_power(rp: RotatedPoint, mode: str, power: int):
    """(m^+)^power m^power by repeated multiplication.

    Powers are small integers; repeated multiplication avoids the branch-cut
    ambiguity a log-based complex power would introduce.
    """
    if not 0 <= power <= MAX_POWER:
        raise ConfigError(f"power must be in [0, {MAX_POWER}], got {power}")
    m, mp = rp.mode(mode)
    base = mp * m
    out = np.ones_like(base)
    for _ in range(power):
        out = out * base
    return out


def vacuum_projector_weight(rp: RotatedPoint, modes=ROTATED_MODES):
    """exp(-sum of quasi-intensities over the chosen rotated modes).

    This is the phase-space kernel of the normally ordered vacuum projector
    on those modes; the full-set call gives exp(-gamma_vec^+ . gamma_vec).
    """
    modes = tuple(modes)
    if not modes:
        raise ConfigError("modes must be a non-empty subset of the rotated modes")
    total = 0
    for name in modes:
        m, mp = rp.mode(name)
        total = total + mp * m
    return np.exp(-total)


def single_photon_event_weight(rp: RotatedPoint, pattern: str):
    """Kernel of the one-photon-per-side coincidence projector.

    Pattern '++' selects |1,0> at A (photon in gamma_+) and |1,0> at B;
    '+-' puts the B photon in delta_-; and so on.  All four rotated modes
    always sit in the exponent.
    """
    if pattern not in EVENT_PATTERNS:
        raise ConfigError(f"pattern must be one of {EVENT_PATTERNS}, got {pattern!r}")
    kern = vacuum_projector_weight(rp, ROTATED_MODES)
    na = quasi_intensity(rp, "gamma_plus" if pattern[0] == "+" else "gamma_minus")
    nb = quasi_intensity(rp, "delta_plus" if pattern[1] == "+" else "delta_minus")
    return na * nb * kern


def event_selection_weight(rp: RotatedPoint):
    """Kernel for the redefined '+' coincidence: one photon up and one down at each polarizer.

    This is the fixed-total-count event (|1,1> at each side) that projects
    onto a definite particle number without post-selection.  Exposed for
    exploration; no quantitative contract is attached to it.
    """
    kern = vacuum_projector_weight(rp, ROTATED_MODES)
    return (quasi_intensity(rp, "gamma_plus") * quasi_intensity(rp, "gamma_minus")
            * quasi_intensity(rp, "delta_plus") * quasi_intensity(rp, "delta_minus")
            * kern)
