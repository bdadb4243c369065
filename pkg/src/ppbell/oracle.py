"""Closed-form and brute-force quantum-mechanical predictions.

Two layers of ground truth:

  * closed forms: g = cos^{2N}(phi) for the N-pair Bell state,
    S_CHD from it, and the squeezed-vacuum moments sinh^2(tau) and
    sinh(tau) cosh(tau) that the stochastic engine must reproduce;

  * a Fock-basis evaluator for the state the dynamics actually prepares, a
    product of two two-mode squeezed pairs with amplitudes
    c_n = x^n sqrt(1 - x^2), x = tanh(r).  Polarizer rotations are applied
    as beamsplitter unitaries on each side's two-mode Fock space, and every
    estimator component (intensity moments via falling factorials,
    projector-kernel probabilities, the post-selection norm) is evaluated
    exactly on the rotated state.

The Fock layer accepts the same component objects as the estimators module,
so "oracle equals Monte Carlo" checks compare the identical functional on
both routes.

All amplitudes here are real, which the evaluator exploits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .errors import ConfigError, TruncationError, UnstableDenominatorError
from . import estimators
from .estimators import AngleSet, GInfinity, GPhi, Joint, Marginal, NormZ

N_MAX_DEFAULT = 3
TAIL_TOL = 1e-8
R_MAX = 0.5


def g_exact(N: int, phi_rel: float) -> float:
    """Static N-pair Bell state correlator ratio: cos^{2N}(phi)."""
    if N < 1:
        raise ConfigError(f"N must be >= 1, got {N}")
    return math.cos(phi_rel) ** (2 * N)


def s_chd_exact(N: int, phi_rel: float) -> float:
    """(3 g(phi) - g(3 phi)) / 2 for the static N-pair Bell state."""
    return (3 * g_exact(N, phi_rel) - g_exact(N, 3 * phi_rel)) / 2


def mean_photon_number(tau: float) -> float:
    """<alpha_1^+ alpha_1> = sinh^2(tau) under the pair-creation evolution."""
    return math.sinh(tau) ** 2


def anomalous_moment(tau: float) -> float:
    """<alpha_1 beta_1> = sinh(tau) cosh(tau), the pairing correlation."""
    return math.sinh(tau) * math.cosh(tau)


def g_dynamic_n1(tau: float, phi_rel: float) -> float:
    """I=J=1 correlator ratio for the squeezed-pair product state.

    With m = sinh^2(tau): G(phi) = m^2 + m(1+m) cos^2(phi) and
    G(inf) = m(1 + 3m); exact at any tau, no truncation."""
    m = math.sinh(tau) ** 2
    return (m + math.cos(phi_rel) ** 2 * (1 + m)) / (1 + 3 * m)


def s_chd_dynamic_n1(tau: float, phi_rel: float) -> float:
    return (3 * g_dynamic_n1(tau, phi_rel) - g_dynamic_n1(tau, 3 * phi_rel)) / 2


# ---------------------------------------------------------------------------
# Fock-basis brute force


@dataclass(frozen=True)
class SqueezeParams:
    """Dimensionless squeezing tau = kappa E t and x = tanh(tau)."""

    r: float

    def __post_init__(self):
        if self.r < 0:
            raise ConfigError(f"r must be >= 0, got {self.r}")

    @property
    def x(self) -> float:
        return math.tanh(self.r)

    def pair_amplitudes(self, n_max: int) -> np.ndarray:
        """Normalized two-mode squeezed amplitudes c_n = x^n sqrt(1-x^2)."""
        x = self.x
        return x ** np.arange(n_max + 1) * math.sqrt(1 - x * x)


@dataclass(frozen=True, eq=False)
class FockStateVector:
    """Four-mode state as a matrix over (side A pair index, side B pair index).

    Pair index n1 * dim + n2 encodes the occupations of the side's two
    modes; dim = 2 n_max + 1 leaves room for beamsplitter mixing, which
    conserves each side's total."""

    amplitudes: np.ndarray
    n_max: int
    r: float

    def __post_init__(self):
        d = self.dim
        if self.amplitudes.shape != (d * d, d * d):
            raise ConfigError(
                f"amplitude matrix must be ({d * d}, {d * d}), "
                f"got {self.amplitudes.shape}")
        x = math.tanh(self.r)
        expected = (1 - x ** (2 * (self.n_max + 1))) ** 2
        if abs(self.norm - expected) > 1e-10:
            raise ConfigError(
                f"state norm {self.norm:.12f} deviates from the analytic "
                f"truncated norm {expected:.12f}")

    @property
    def dim(self) -> int:
        return 2 * self.n_max + 1

    @property
    def norm(self) -> float:
        return float(np.sum(self.amplitudes ** 2))


def fock_pdc_state(r: float, n_max: int = N_MAX_DEFAULT,
                   tail_tol: float = TAIL_TOL) -> FockStateVector:
    """Product of two two-mode squeezed pairs, truncated at n_max per pair.

    The discarded per-pair weight is x^{2(n_max+1)}; if it exceeds tail_tol
    the truncation is refused rather than silently degrading the oracle.
    At r = 0.25 the default n_max = 3 is already insufficient for the 1e-8
    tolerance (tail 1.3e-5), so larger r needs a larger n_max."""
    if r < 0 or r > R_MAX:
        raise ConfigError(f"r must be in [0, {R_MAX}], got {r}")
    if n_max < 3:
        raise ConfigError(f"n_max must be >= 3, got {n_max}")
    params = SqueezeParams(r=r)
    tail = params.x ** (2 * (n_max + 1))
    if tail > tail_tol:
        raise TruncationError(
            f"per-pair truncation tail {tail:.3e} exceeds {tail_tol:.1e} at "
            f"r={r}, n_max={n_max}; increase n_max")
    c = params.pair_amplitudes(n_max)
    dim = 2 * n_max + 1
    psi = np.zeros((dim * dim, dim * dim))
    for n in range(n_max + 1):
        for m in range(n_max + 1):
            psi[n * dim + m, n * dim + m] = c[n] * c[m]
    return FockStateVector(amplitudes=psi, n_max=n_max, r=r)


def fock_pdc_state_auto(r: float, tail_tol: float = TAIL_TOL,
                        n_max_cap: int = 8) -> FockStateVector:
    """fock_pdc_state with the smallest n_max meeting the tail tolerance.

    Keeps oracle columns usable across a tau sweep: r = 0.25 needs
    n_max = 6 where the default truncation only covers r <= 0.1."""
    x = SqueezeParams(r=r).x
    n_max = N_MAX_DEFAULT
    while n_max <= n_max_cap and x ** (2 * (n_max + 1)) > tail_tol:
        n_max += 1
    return fock_pdc_state(r, n_max=n_max, tail_tol=tail_tol)


@lru_cache(maxsize=256)
def _side_rotation(theta: float, dim: int) -> np.ndarray:
    """Beamsplitter unitary exp(theta (a1^dag a2 - a2^dag a1)) on one side's
    two-mode Fock space; real orthogonal for real theta."""
    a = np.diag(np.sqrt(np.arange(1.0, dim)), 1)
    eye = np.eye(dim)
    a1 = np.kron(a, eye)
    a2 = np.kron(eye, a)
    return expm(theta * (a1.T @ a2 - a2.T @ a1))


def _rotated_probs(state: FockStateVector, theta: float, phi: float) -> np.ndarray:
    ua = _side_rotation(float(theta), state.dim)
    ub = _side_rotation(float(phi), state.dim)
    ps = ua @ state.amplitudes @ ub.T
    return ps ** 2


def _falling(n: np.ndarray, k: int) -> np.ndarray:
    """Falling factorial n (n-1) ... (n-k+1): the normally ordered k-th
    moment of a number operator evaluated on occupation n."""
    v = np.ones_like(n, dtype=float)
    for j in range(k):
        v = v * (n - j)
    return v


def fock_expect(state: FockStateVector, component) -> float:
    """Exact expectation of one estimator measurement component."""
    dim = state.dim
    n1 = np.arange(dim * dim) // dim   # occupation of the side's first mode
    n2 = np.arange(dim * dim) % dim

    def idx(a, b):
        return a * dim + b

    if isinstance(component, GPhi):
        p = _rotated_probs(state, component.theta, component.phi)
        wa = _falling(n1, component.I)
        wb = _falling(n1, component.J)   # delta_+ is side B's first rotated mode
        return float(wa @ p @ wb)
    if isinstance(component, GInfinity):
        p = state.amplitudes ** 2
        wa = _falling(n1, component.I)
        wb = _falling(n1 + n2, component.J)
        return float(wa @ p @ wb)
    if isinstance(component, Joint):
        p = _rotated_probs(state, component.theta, component.phi)
        if component.pattern == "sel":
            return float(p[idx(1, 1), idx(1, 1)])
        row = idx(1, 0) if component.pattern[0] == "+" else idx(0, 1)
        col = idx(1, 0) if component.pattern[1] == "+" else idx(0, 1)
        return float(p[row, col])
    if isinstance(component, Marginal):
        if component.side == "A":
            p = _rotated_probs(state, component.angle, 0.0)
            return float(p[idx(1, 0), :].sum())
        p = _rotated_probs(state, 0.0, component.angle)
        return float(p[:, idx(1, 0)].sum())
    if isinstance(component, NormZ):
        return 1.0 - float(state.amplitudes[0, 0] ** 2)
    raise ConfigError(f"no Fock rule for component {type(component).__name__}")


def fock_ratio(state: FockStateVector, plan, ratio) -> float:
    """Evaluate a (plan, ratio) statistic design exactly.

    Same assembly as the Monte Carlo path: ratio of the component means,
    with the post-selection common factor dividing out."""
    m = np.array([fock_expect(state, c) for c in plan.components])
    num = sum(c * m[i] for c, i in ratio.num)
    den = ratio.den_const + sum(d * m[j] for d, j in ratio.den)
    if den == 0:
        raise UnstableDenominatorError(
            f"{ratio.name}: exact denominator is zero (degenerate state)")
    if ratio.postselect_index is not None:
        z = m[ratio.postselect_index]
        if z == 0:
            raise UnstableDenominatorError(
                f"{ratio.name}: post-selection norm is zero (vacuum state)")
        return float((num / z) / (den / z))
    return float(num / den)


def fock_probabilities(state: FockStateVector, theta: float, phi: float) -> dict:
    """All four coincidence probabilities plus the marginals and the vacuum."""
    out = {pat: fock_expect(state, Joint(theta=theta, phi=phi, pattern=pat))
           for pat in ("++", "+-", "-+", "--")}
    out["margA"] = fock_expect(state, Marginal(side="A", angle=theta))
    out["margB"] = fock_expect(state, Marginal(side="B", angle=phi))
    out["vacuum"] = float(state.amplitudes[0, 0] ** 2)
    return out


def fock_correlation_E(state: FockStateVector, theta: float, phi: float,
                       postselect: bool = False) -> float:
    p = fock_probabilities(state, theta, phi)
    e = p["++"] + p["--"] - p["+-"] - p["-+"]
    if not postselect:
        return e
    z = 1.0 - p["vacuum"]
    if z == 0:
        raise UnstableDenominatorError("post-selection norm is zero (vacuum state)")
    return e / z


def fock_g(state: FockStateVector, phi_rel: float, I: int = 1,
           J: int = 1) -> float:
    gphi = fock_expect(state, GPhi(theta=0.0, phi=phi_rel, I=I, J=J))
    ginf = fock_expect(state, GInfinity(I=I, J=J))
    if ginf == 0:
        raise UnstableDenominatorError("G(inf) is zero (vacuum state)")
    return gphi / ginf


def fock_s_chd(state: FockStateVector, phi_rel: float, N: int = 1) -> float:
    return (3 * fock_g(state, phi_rel, N, N) - fock_g(state, 3 * phi_rel, N, N)) / 2


def fock_s_ch(state: FockStateVector, angles: AngleSet = None,
              postselect: bool = False) -> float:
    angles = angles or AngleSet()
    plan, ratio = estimators.ch_design(angles, postselect=postselect)
    return fock_ratio(state, plan, ratio)


def fock_s_chsh(state: FockStateVector, angles: AngleSet = None,
                postselect: bool = False) -> float:
    angles = angles or AngleSet()
    plan, ratio = estimators.chsh_design(angles, postselect=postselect)
    return fock_ratio(state, plan, ratio)
