"""Exact sampling of the positive-P distribution of the N-pair Bell state.

The distribution factorizes, after a change to sum and difference variables,
into a coupled density on the sum variables (mu) times independent Gaussians
on the difference variables (nu):

    P(A, B) ~ |A . B|^{2N} exp(-|A|^2 - |B|^2),   A = (mu_A1, mu_A2), etc.

with A . B = A1*B1 + A2*B2 bilinear (no conjugation).  The mu marginal
|A|^{2N} exp(-|A|^2) is a Gamma(N+2) radial law times a uniform direction on
the 3-sphere, so proposals are cheap and a von Neumann rejection step with
acceptance probability |A . B|^{2N} / (|A|^{2N} |B|^{2N}) yields exact
samples.  The overall acceptance rate is 1/(N+1).

A full phase-space sample is then alpha = mu + nu, alpha^+ = (mu - nu)*,
with each real coordinate of nu Gaussian with variance 1/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SamplingError
from .phasespace import PhasePoint

MAX_PAIRS = 16

ACCEPT_LOOP_CAP = 10**6

NU_SIGMA = np.sqrt(0.5)  # real-coordinate standard deviation of nu


@dataclass(frozen=True)
class PairCount:
    """Number of photon pairs N of the Bell state."""

    N: int

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or not 1 <= self.N <= MAX_PAIRS:
            raise ConfigError(f"N must be an integer in [1, {MAX_PAIRS}], got {self.N!r}")


@dataclass(frozen=True)
class MuPair:
    """Accepted sum-variable vectors A (side A) and B (side B), 2 complex each."""

    A: np.ndarray
    B: np.ndarray


@dataclass(frozen=True)
class DeltaPair:
    """Difference-variable vectors, 2 complex per side; 8 real Gaussian coordinates."""

    dA: np.ndarray
    dB: np.ndarray


def _pairs(N) -> PairCount:
    """Accept a PairCount or a bare integer pair count."""
    return N if isinstance(N, PairCount) else PairCount(N)


def sample_direction(dim: int = 4, rng=None) -> np.ndarray:
    """Uniform direction on the unit sphere in R^4: normalized Gaussian 4-vector."""
    if dim != 4:
        raise ConfigError(f"direction sampling is fixed at dim=4, got {dim}")
    v = rng.standard_normal(4)
    return v / np.linalg.norm(v)


def sample_radius_sq(N: PairCount, rng) -> float:
    """Squared proposal radius: Gamma(shape N+2, scale 1)."""
    return float(rng.standard_gamma(_pairs(N).N + 2))


def sample_tilde_p(N: PairCount, rng) -> np.ndarray:
    """One proposal vector from |A|^{2N} e^{-|A|^2} / (pi^2 (N+1)!), as 2 complex."""
    v = sample_direction(4, rng) * np.sqrt(sample_radius_sq(N, rng))
    return np.array([v[0] + 1j * v[1], v[2] + 1j * v[3]])


def accept(A: np.ndarray, B: np.ndarray, N: PairCount, rng) -> bool:
    """Von Neumann acceptance with probability |A.B|^{2N} / (|A|^{2N}|B|^{2N}).

    The dot product is bilinear.  By Cauchy-Schwarz the ratio lies in [0, 1].
    Zero-norm proposals (a probability-zero event) are rejected outright,
    which signals the caller to resample.
    """
    a2 = abs(A[0]) ** 2 + abs(A[1]) ** 2
    b2 = abs(B[0]) ** 2 + abs(B[1]) ** 2
    if a2 == 0.0 or b2 == 0.0:
        return False
    q = abs(A[0] * B[0] + A[1] * B[1]) ** 2 / (a2 * b2)
    return bool(rng.random() < q ** _pairs(N).N)


def sample_mu_pair(N: PairCount, rng) -> MuPair:
    """Propose-and-reject until one accepted MuPair."""
    N = _pairs(N)
    for _ in range(ACCEPT_LOOP_CAP):
        A = sample_tilde_p(N, rng)
        B = sample_tilde_p(N, rng)
        if accept(A, B, N, rng):
            return MuPair(A=A, B=B)
    raise SamplingError(
        f"no acceptance within {ACCEPT_LOOP_CAP} proposals for N={N.N}; "
        "the acceptance law is broken")


def sample_delta_pair(rng) -> DeltaPair:
    """Independent difference variables: 8 real Gaussians with variance 1/2."""
    g = rng.standard_normal(8) * NU_SIGMA
    return DeltaPair(dA=np.array([g[0] + 1j * g[4], g[1] + 1j * g[5]]),
                     dB=np.array([g[2] + 1j * g[6], g[3] + 1j * g[7]]))


def sample_bell_point(N: PairCount, rng) -> PhasePoint:
    """One full positive-P sample of the N-pair Bell state."""
    mu = sample_mu_pair(N, rng)
    d = sample_delta_pair(rng)
    m = np.concatenate([mu.A, mu.B])
    nu = np.concatenate([d.dA, d.dB])
    return PhasePoint(alpha=m + nu, alpha_plus=np.conj(m - nu))


# ---------------------------------------------------------------------------
# Vectorized batch path (same distribution, chunk-at-a-time).

def _tilde_block(N: int, n: int, rng):
    """n proposal vectors as two complex rows, vectorized."""
    r2 = rng.standard_gamma(N + 2, size=n)
    v = rng.standard_normal((4, n))
    v /= np.linalg.norm(v, axis=0)
    v *= np.sqrt(r2)
    return v[0] + 1j * v[1], v[2] + 1j * v[3]


def sample_bell_chunk(N: PairCount, n: int, rng):
    """n accepted samples plus proposal accounting.

    Returns (PhasePoint batch of shape (4, n), n_proposed, n_accepted).
    n_accepted can exceed n: surplus acceptances in the last proposal block
    are discarded, but they still count toward the acceptance-rate tally.
    The proposal block-size policy is deterministic, so the stream of random
    draws (and hence the samples) depends only on the rng state.
    """
    nn = _pairs(N).N
    mu = np.empty((4, n), dtype=np.complex128)
    got = 0
    n_proposed = 0
    n_accepted = 0
    for _ in range(ACCEPT_LOOP_CAP):
        if got >= n:
            break
        block = max(4096, int((n - got) * (nn + 1) * 1.15))
        A1, A2 = _tilde_block(nn, block, rng)
        B1, B2 = _tilde_block(nn, block, rng)
        a2 = np.abs(A1) ** 2 + np.abs(A2) ** 2
        b2 = np.abs(B1) ** 2 + np.abs(B2) ** 2
        # zero-norm proposals reject outright (probability-zero resample rule)
        safe = (a2 > 0) & (b2 > 0)
        q = np.zeros(block)
        np.divide(np.abs(A1 * B1 + A2 * B2) ** 2, a2 * b2, out=q, where=safe)
        acc = rng.random(block) < q ** nn
        n_proposed += block
        n_accepted += int(acc.sum())
        idx = np.flatnonzero(acc)[: n - got]
        take = idx.size
        mu[0, got:got + take] = A1[idx]
        mu[1, got:got + take] = A2[idx]
        mu[2, got:got + take] = B1[idx]
        mu[3, got:got + take] = B2[idx]
        got += take
    else:
        raise SamplingError(f"acceptance loop exceeded {ACCEPT_LOOP_CAP} blocks for N={nn}")
    g = rng.standard_normal((8, n)) * NU_SIGMA
    nu = g[:4] + 1j * g[4:]
    point = PhasePoint(alpha=mu + nu, alpha_plus=np.conj(mu - nu))
    return point, n_proposed, n_accepted


def acceptance_rate_experiment(N: PairCount, n_proposals: int, rng) -> int:
    """Count acceptances over exactly n_proposals proposal pairs."""
    nn = _pairs(N).N
    n_accepted = 0
    done = 0
    while done < n_proposals:
        block = min(1 << 16, n_proposals - done)
        A1, A2 = _tilde_block(nn, block, rng)
        B1, B2 = _tilde_block(nn, block, rng)
        a2 = np.abs(A1) ** 2 + np.abs(A2) ** 2
        b2 = np.abs(B1) ** 2 + np.abs(B2) ** 2
        safe = (a2 > 0) & (b2 > 0)
        q = np.zeros(block)
        np.divide(np.abs(A1 * B1 + A2 * B2) ** 2, a2 * b2, out=q, where=safe)
        n_accepted += int((rng.random(block) < q ** nn).sum())
        done += block
    return n_accepted
