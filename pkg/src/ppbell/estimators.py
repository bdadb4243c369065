"""Bell statistics from phase-space ensembles.

Every observable here is a ratio of linear combinations of complex sample
moments.  The pipeline is:

  1. a MeasurementPlan lists the per-sample complex components (intensity
     moments, projector-kernel probabilities, the post-selection norm),
  2. a MomentAccumulator reduces samples to batch means (batch size 2^10)
     and their covariance, mergeable across chunks and workers,
  3. a RatioSpec assembles value = N_r / D_r from the real parts of the
     component means, with the standard error propagated to first order
     through the quotient using the measured covariance of the batch means.

Real parts are taken at the ensemble level only.  Per-sample quantities stay
complex; their imaginary parts average to zero for a valid positive-P
ensemble, and the residual N_i / D_r is reported with its own standard error
as a consistency diagnostic.

Statistics:

  S_CHD  = (3 g(phi) - g(3 phi)) / 2,  g = G(phi) / G(inf)
  S_CH   = [P(t,p) - P(t,p') + P(t',p) + P(t',p')] / [P_A(t') + P_B(p)]
  S_CHSH = [E(t,p) - E(t,p') + E(t',p) + E(t',p')] / 2
           with E = P++ + P-- - P+- - P-+, each P divided by the
           post-selection norm z = <1 - exp(-sum of all four intensities)>
           when post-selecting.

The CH ratio is degree one in the probabilities in both numerator and
denominator, so the post-selection norm cancels; computing it with the
division in place changes the value only at machine precision and leaves the
standard error unchanged (the z-gradient of the ratio is identically zero).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, UnstableDenominatorError
from .phasespace import (
    EVENT_PATTERNS,
    PhasePoint,
    event_selection_weight,
    quasi_intensity,
    quasi_intensity_power,
    rotate,
    single_photon_event_weight,
    vacuum_projector_weight,
)

BATCH = 1 << 10

# denominator mean must exceed this multiple of its standard error
DENOMINATOR_SNR_MIN = 5.0

DEFAULT_LHV_BOUND = 1.0


@dataclass(frozen=True)
class AngleSet:
    """Polarizer angles theta, phi, theta', phi' in radians."""

    theta: float = 0.0
    phi: float = math.pi / 8
    theta_p: float = math.pi / 4
    phi_p: float = 3 * math.pi / 8

    @staticmethod
    def from_relative(phi_rel: float) -> "AngleSet":
        """Equal-spacing construction: theta=0, phi=f, theta'=2f, phi'=3f.

        Keeps phi - theta = phi' - theta' = theta' - phi = f, the relative
        angle that the correlators depend on.
        """
        f = float(phi_rel)
        return AngleSet(theta=0.0, phi=f, theta_p=2 * f, phi_p=3 * f)

    def pairs(self) -> tuple:
        """The four (A-angle, B-angle) pairs entering CH and CHSH."""
        return ((self.theta, self.phi), (self.theta, self.phi_p),
                (self.theta_p, self.phi), (self.theta_p, self.phi_p))


# ---------------------------------------------------------------------------
# measurement components


@dataclass(frozen=True)
class GPhi:
    """(gamma_+^+ gamma_+)^I (delta_+^+ delta_+)^J at polarizer angles (theta, phi)."""

    theta: float
    phi: float
    I: int
    J: int

    def evaluate(self, point, rotated):
        rp = rotated(self.theta, self.phi)
        return (quasi_intensity_power(rp, "gamma_plus", self.I)
                * quasi_intensity_power(rp, "delta_plus", self.J))


@dataclass(frozen=True)
class GInfinity:
    """(alpha_1^+ alpha_1)^I (beta_1^+ beta_1 + beta_2^+ beta_2)^J: polarizer at
    theta=0 on side A, no polarizer on side B (the J-th power of the total)."""

    I: int
    J: int

    def evaluate(self, point, rotated):
        a, ap = point.alpha, point.alpha_plus
        na = ap[0] * a[0]
        nb = ap[2] * a[2] + ap[3] * a[3]
        out = np.ones_like(na)
        for _ in range(self.I):
            out = out * na
        for _ in range(self.J):
            out = out * nb
        return out


@dataclass(frozen=True)
class Joint:
    """Kernel-weighted joint detection quasiprobability at (theta, phi).

    pattern is one of ++, +-, -+, -- for single-photon coincidences, or
    'sel' for the event-selection kernel (one photon up and one down at each
    polarizer)."""

    theta: float
    phi: float
    pattern: str

    def __post_init__(self):
        if self.pattern not in EVENT_PATTERNS + ("sel",):
            raise ConfigError(f"unknown pattern {self.pattern!r}")

    def evaluate(self, point, rotated):
        rp = rotated(self.theta, self.phi)
        if self.pattern == "sel":
            return event_selection_weight(rp)
        return single_photon_event_weight(rp, self.pattern)


@dataclass(frozen=True)
class Marginal:
    """Single-side detection quasiprobability P_+ with the projector kernel
    restricted to that side's two rotated modes."""

    side: str
    angle: float

    def __post_init__(self):
        if self.side not in ("A", "B"):
            raise ConfigError(f"side must be 'A' or 'B', got {self.side!r}")

    def evaluate(self, point, rotated):
        if self.side == "A":
            rp = rotated(self.angle, 0.0)
            mode, pair = "gamma_plus", ("gamma_plus", "gamma_minus")
        else:
            rp = rotated(0.0, self.angle)
            mode, pair = "delta_plus", ("delta_plus", "delta_minus")
        return quasi_intensity(rp, mode) * vacuum_projector_weight(rp, pair)


@dataclass(frozen=True)
class NormZ:
    """Post-selection norm 1 - exp(-sum of all four quasi-intensities).

    The exponent is invariant under the polarizer rotations, so it is
    computed from the unrotated modes."""

    def evaluate(self, point, rotated):
        a, ap = point.alpha, point.alpha_plus
        total = ap[0] * a[0] + ap[1] * a[1] + ap[2] * a[2] + ap[3] * a[3]
        return -np.expm1(-total)


RAW_MOMENT_KINDS = ("n_a1", "n_a2", "n_b1", "n_b2", "anom_11", "anom_22",
                    "pair_coherence")


@dataclass(frozen=True)
class RawMoment:
    """Unrotated quadratic or quartic moment of the bare modes.

    n_a1 = alpha_1^+ alpha_1 and friends; anom_11 = alpha_1 beta_1 (the
    anomalous pairing moment); pair_coherence = alpha_2^+ beta_2^+ alpha_1
    beta_1, the cross-pair coherence that distinguishes the entangled state
    from a product of independent pairs."""

    kind: str

    def __post_init__(self):
        if self.kind not in RAW_MOMENT_KINDS:
            raise ConfigError(f"unknown moment kind {self.kind!r}")

    def evaluate(self, point, rotated):
        a, ap = point.alpha, point.alpha_plus
        if self.kind == "n_a1":
            return ap[0] * a[0]
        if self.kind == "n_a2":
            return ap[1] * a[1]
        if self.kind == "n_b1":
            return ap[2] * a[2]
        if self.kind == "n_b2":
            return ap[3] * a[3]
        if self.kind == "anom_11":
            return a[0] * a[2]
        if self.kind == "anom_22":
            return a[1] * a[3]
        return ap[1] * ap[3] * a[0] * a[2]


@dataclass(frozen=True)
class MeasurementPlan:
    """Ordered list of per-sample components to extract from an ensemble."""

    components: tuple

    def __post_init__(self):
        if not self.components:
            raise ConfigError("measurement plan must have at least one component")

    @property
    def n_components(self) -> int:
        return len(self.components)

    def measure(self, alpha: np.ndarray, alpha_plus: np.ndarray) -> np.ndarray:
        """Evaluate all components on a (4, n) batch; returns complex (k, n).

        Rotations are cached per distinct (theta, phi) pair so shared angles
        cost one rotation."""
        point = PhasePoint(alpha=alpha, alpha_plus=alpha_plus)
        cache = {}

        def rotated(theta, phi):
            key = (theta, phi)
            if key not in cache:
                cache[key] = rotate(point, theta, phi)
            return cache[key]

        rows = [np.asarray(c.evaluate(point, rotated), dtype=np.complex128)
                for c in self.components]
        return np.stack(rows)


# ---------------------------------------------------------------------------
# batch-means accumulation


class MomentAccumulator:
    """Batch-means reduction of complex component samples.

    Stores, per batch of 2^10 samples, the running sum of batch-mean vectors
    and of their outer products in interleaved (Re, Im) coordinates.  Merging
    two accumulators adds the sums, so merges commute and associate up to
    floating-point rounding (<= 1e-12 relative on the final mean).
    """

    def __init__(self, n_components: int):
        if n_components < 1:
            raise ConfigError("need at least one component")
        self.n_components = int(n_components)
        self.n_batches = 0
        self.n_samples = 0
        k = self.n_components
        self._sum_means = np.zeros(k, dtype=np.complex128)
        self._sum_outer = np.zeros((2 * k, 2 * k))

    @staticmethod
    def _interleave(means: np.ndarray) -> np.ndarray:
        k = means.shape[0]
        x = np.empty((2 * k,) + means.shape[1:])
        x[0::2] = means.real
        x[1::2] = means.imag
        return x

    def add_chunk(self, values: np.ndarray) -> None:
        """Fold in a (k, n) block of samples; n must be a multiple of 2^10."""
        values = np.asarray(values)
        if values.ndim != 2 or values.shape[0] != self.n_components:
            raise ConfigError(
                f"expected ({self.n_components}, n) samples, got {values.shape}")
        n = values.shape[1]
        if n == 0 or n % BATCH:
            raise ConfigError(f"chunk size must be a positive multiple of {BATCH}, got {n}")
        nb = n // BATCH
        bm = values.reshape(self.n_components, nb, BATCH).mean(axis=2)
        x = self._interleave(bm)
        self._sum_means += bm.sum(axis=1)
        self._sum_outer += x @ x.T
        self.n_batches += nb
        self.n_samples += n

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        if other.n_components != self.n_components:
            raise ConfigError("cannot merge accumulators of different widths")
        out = MomentAccumulator(self.n_components)
        out.n_batches = self.n_batches + other.n_batches
        out.n_samples = self.n_samples + other.n_samples
        out._sum_means = self._sum_means + other._sum_means
        out._sum_outer = self._sum_outer + other._sum_outer
        return out

    def mean(self) -> np.ndarray:
        if self.n_batches == 0:
            raise ConfigError("empty accumulator")
        return self._sum_means / self.n_batches

    def cov_of_mean(self) -> np.ndarray:
        """Covariance of the grand mean in interleaved (Re, Im) coordinates:
        sample covariance of the batch means divided by the batch count."""
        if self.n_batches < 2:
            raise ConfigError("need at least 2 batches for an error estimate")
        nb = self.n_batches
        xbar = self._interleave(self._sum_means / nb)
        c = (self._sum_outer - nb * np.outer(xbar, xbar)) / (nb - 1)
        return c / nb


def accumulate(plan: MeasurementPlan, samples: PhasePoint) -> MomentAccumulator:
    """Measure a materialized ensemble into a fresh accumulator."""
    n = samples.n_samples
    if n == 0:
        raise ConfigError("empty ensemble")
    if n % BATCH:
        raise ConfigError(f"ensemble size must be a multiple of {BATCH}, got {n}")
    acc = MomentAccumulator(plan.n_components)
    acc.add_chunk(plan.measure(samples.alpha, samples.alpha_plus))
    return acc


def stderr_batch(acc: MomentAccumulator, component: int = 0) -> float:
    """Standard error of the real part of one component's mean."""
    cov = acc.cov_of_mean()
    return float(np.sqrt(cov[2 * component, 2 * component]))


# ---------------------------------------------------------------------------
# ratio assembly


@dataclass(frozen=True)
class BellStatistic:
    """One Bell-statistic estimate with its sampling diagnostics.

    imag_residual is the same ratio evaluated on the imaginary parts of the
    numerator moments; it should sit within 3 imag_stderr of zero for a
    healthy ensemble."""

    name: str
    value: float
    stderr: float
    imag_residual: float
    imag_stderr: float
    n_samples: int
    params: dict = field(default_factory=dict)
    lhv_bound: float = DEFAULT_LHV_BOUND

    @property
    def violation(self) -> bool:
        return self.value > self.lhv_bound

    def imag_consistent(self, n_sigma: float = 3.0) -> bool:
        # floor guards combinations that are real per sample up to rounding,
        # where the estimated imag SE itself collapses to zero
        return abs(self.imag_residual) <= max(n_sigma * self.imag_stderr, 1e-12)


@dataclass(frozen=True)
class RatioSpec:
    """value = sum(c_i Re m_i) / (den_const + sum(d_j Re m_j)), with optional
    division of both sums by the real mean of a post-selection component.

    num and den are tuples of (coefficient, component-index) pairs into the
    accompanying MeasurementPlan."""

    name: str
    num: tuple
    den: tuple = ()
    den_const: float = 0.0
    postselect_index: int = None

    def __post_init__(self):
        if not self.num:
            raise ConfigError("ratio needs at least one numerator term")
        if not self.den and self.den_const == 0.0:
            raise ConfigError("ratio needs a denominator")

    def evaluate(self, acc: MomentAccumulator, params: dict = None,
                 lhv_bound: float = DEFAULT_LHV_BOUND) -> BellStatistic:
        m = acc.mean()
        cov = acc.cov_of_mean()
        k = acc.n_components

        num_r = sum(c * m[i].real for c, i in self.num)
        num_i = sum(c * m[i].imag for c, i in self.num)
        den_r = self.den_const + sum(d * m[j].real for d, j in self.den)

        if self.den:
            gd = np.zeros(2 * k)
            for d, j in self.den:
                gd[2 * j] += d
            den_se = float(np.sqrt(gd @ cov @ gd))
            if den_se > 0 and den_r <= DENOMINATOR_SNR_MIN * den_se:
                raise UnstableDenominatorError(
                    f"{self.name}: denominator mean {den_r:.3e} is not above "
                    f"{DENOMINATOR_SNR_MIN:g} x SE {den_se:.3e}; ratio unstable")

        if self.postselect_index is not None:
            z = m[self.postselect_index].real
            gz = np.zeros(2 * k)
            gz[2 * self.postselect_index] = 1.0
            z_se = float(np.sqrt(gz @ cov @ gz))
            if z_se > 0 and z <= DENOMINATOR_SNR_MIN * z_se:
                raise UnstableDenominatorError(
                    f"{self.name}: post-selection norm {z:.3e} is not above "
                    f"{DENOMINATOR_SNR_MIN:g} x SE {z_se:.3e}")
            # common factor: cancels in the ratio, zero net gradient
            value = (num_r / z) / (den_r / z)
            imag = (num_i / z) / (den_r / z)
        else:
            value = num_r / den_r
            imag = num_i / den_r

        # first-order propagation; post-selection contributes no gradient
        gr = np.zeros(2 * k)
        gi = np.zeros(2 * k)
        for c, i in self.num:
            gr[2 * i] += c / den_r
            gi[2 * i + 1] += c / den_r
        for d, j in self.den:
            gr[2 * j] += -value * d / den_r
            gi[2 * j] += -imag * d / den_r
        # quadratic forms can round to small negatives when a combination is
        # exactly real per sample (mirror-symmetric ensembles); clamp at zero
        stderr = float(np.sqrt(max(gr @ cov @ gr, 0.0)))
        imag_se = float(np.sqrt(max(gi @ cov @ gi, 0.0)))

        return BellStatistic(name=self.name, value=float(value), stderr=stderr,
                             imag_residual=float(imag), imag_stderr=imag_se,
                             n_samples=acc.n_samples,
                             params=dict(params or {}), lhv_bound=lhv_bound)


# ---------------------------------------------------------------------------
# statistic designs: (MeasurementPlan, RatioSpec) pairs the runner can stream


def chd_design(N: int, phi_rel: float) -> tuple:
    """S_CHD = (3 G(phi) - G(3 phi)) / (2 G(inf)) with I = J = N."""
    if N < 1:
        raise ConfigError(f"N must be >= 1, got {N}")
    plan = MeasurementPlan(components=(
        GPhi(theta=0.0, phi=float(phi_rel), I=N, J=N),
        GPhi(theta=0.0, phi=3.0 * phi_rel, I=N, J=N),
        GInfinity(I=N, J=N),
    ))
    ratio = RatioSpec(name="CHD", num=((3.0, 0), (-1.0, 1)), den=((2.0, 2),))
    return plan, ratio


def ch_design(angles: AngleSet, postselect: bool = False) -> tuple:
    """S_CH from the four ++ joints and the two marginals; optionally divide
    every probability by the post-selection norm (which cancels)."""
    pairs = angles.pairs()
    comps = [Joint(theta=t, phi=p, pattern="++") for t, p in pairs]
    comps.append(Marginal(side="A", angle=angles.theta_p))
    comps.append(Marginal(side="B", angle=angles.phi))
    psi = None
    if postselect:
        comps.append(NormZ())
        psi = 6
    plan = MeasurementPlan(components=tuple(comps))
    ratio = RatioSpec(name="CH",
                      num=((1.0, 0), (-1.0, 1), (1.0, 2), (1.0, 3)),
                      den=((1.0, 4), (1.0, 5)),
                      postselect_index=psi)
    return plan, ratio


# CHSH sign structure: +E(t,p) - E(t,p') + E(t',p) + E(t',p'), and within
# each E the patterns ++/-- enter with +, +-/-+ with -
_PAIR_SIGNS = (1.0, -1.0, 1.0, 1.0)
_PATTERN_SIGNS = {"++": 1.0, "--": 1.0, "+-": -1.0, "-+": -1.0}


def chsh_design(angles: AngleSet, postselect: bool = False) -> tuple:
    """S_CHSH from the sixteen signed joints, denominator 2 (bare) or twice
    the post-selection norm (post-selected)."""
    comps = []
    num = []
    for ps, (t, p) in zip(_PAIR_SIGNS, angles.pairs()):
        for pat in EVENT_PATTERNS:
            num.append((ps * _PATTERN_SIGNS[pat], len(comps)))
            comps.append(Joint(theta=t, phi=p, pattern=pat))
    if postselect:
        z_idx = len(comps)
        comps.append(NormZ())
        plan = MeasurementPlan(components=tuple(comps))
        ratio = RatioSpec(name="CHSH_postselected", num=tuple(num),
                          den=((2.0, z_idx),))
    else:
        plan = MeasurementPlan(components=tuple(comps))
        ratio = RatioSpec(name="CHSH", num=tuple(num), den_const=2.0)
    return plan, ratio


def moments_design() -> MeasurementPlan:
    """The raw quadratic moments plus the cross-pair coherence."""
    return MeasurementPlan(components=tuple(RawMoment(k) for k in RAW_MOMENT_KINDS))


def concat_designs(designs) -> tuple:
    """Fuse several (plan, ratio) designs into one plan with shifted ratios.

    Lets a sweep over angles share a single pass over the ensemble: the
    fused plan measures every component once, and each returned RatioSpec
    indexes its own slice."""
    import dataclasses

    comps = []
    ratios = []
    for plan, ratio in designs:
        off = len(comps)
        comps.extend(plan.components)

        def shift(terms, off=off):
            return tuple((c, i + off) for c, i in terms)

        psi = ratio.postselect_index
        ratios.append(dataclasses.replace(
            ratio, num=shift(ratio.num), den=shift(ratio.den),
            postselect_index=None if psi is None else psi + off))
    return MeasurementPlan(components=tuple(comps)), ratios


# ---------------------------------------------------------------------------
# direct operations on materialized ensembles


def correlator_g(samples: PhasePoint, N: int, I: int, J: int,
                 phi_rel: float) -> tuple:
    """Mean pair (G(phi), G(inf)) of the intensity correlators at theta=0."""
    if I < 1 or J < 1:
        raise ConfigError(f"moment orders must be >= 1, got I={I}, J={J}")
    plan = MeasurementPlan(components=(
        GPhi(theta=0.0, phi=float(phi_rel), I=I, J=J),
        GInfinity(I=I, J=J),
    ))
    m = accumulate(plan, samples).mean()
    return complex(m[0]), complex(m[1])


def s_chd(samples: PhasePoint, N: int, phi_rel: float,
          lhv_bound: float = DEFAULT_LHV_BOUND) -> BellStatistic:
    plan, ratio = chd_design(N, phi_rel)
    acc = accumulate(plan, samples)
    return ratio.evaluate(acc, params={"N": N, "phi_rel": phi_rel},
                          lhv_bound=lhv_bound)


def prob_joint(samples: PhasePoint, theta: float, phi: float,
               pattern: str) -> complex:
    """Ensemble mean of the joint-detection kernel; complex on purpose."""
    plan = MeasurementPlan(components=(Joint(theta=theta, phi=phi,
                                             pattern=pattern),))
    return complex(accumulate(plan, samples).mean()[0])


def prob_marginal(samples: PhasePoint, side: str, angle: float) -> complex:
    plan = MeasurementPlan(components=(Marginal(side=side, angle=angle),))
    return complex(accumulate(plan, samples).mean()[0])


def norm_z(samples: PhasePoint) -> complex:
    """Mean post-selection norm <1 - exp(-total intensity)>."""
    plan = MeasurementPlan(components=(NormZ(),))
    return complex(accumulate(plan, samples).mean()[0])


def correlation_E(samples: PhasePoint, theta: float, phi: float,
                  postselect: bool = False) -> complex:
    """Signed sum of the four pattern probabilities, optionally divided by
    the post-selection norm."""
    comps = [Joint(theta=theta, phi=phi, pattern=pat) for pat in EVENT_PATTERNS]
    comps.append(NormZ())
    plan = MeasurementPlan(components=tuple(comps))
    acc = accumulate(plan, samples)
    m = acc.mean()
    e = sum(_PATTERN_SIGNS[pat] * m[i] for i, pat in enumerate(EVENT_PATTERNS))
    if not postselect:
        return complex(e)
    z = m[4].real
    cov = acc.cov_of_mean()
    z_se = float(np.sqrt(cov[8, 8]))
    if z_se > 0 and z <= DENOMINATOR_SNR_MIN * z_se:
        raise UnstableDenominatorError(
            f"post-selection norm {z:.3e} is not above "
            f"{DENOMINATOR_SNR_MIN:g} x SE {z_se:.3e}")
    return complex(e / z)


def s_ch(samples: PhasePoint, angles: AngleSet = None,
         postselect: bool = False,
         lhv_bound: float = DEFAULT_LHV_BOUND) -> BellStatistic:
    angles = angles or AngleSet()
    plan, ratio = ch_design(angles, postselect=postselect)
    acc = accumulate(plan, samples)
    return ratio.evaluate(acc, params={"angles": angles,
                                       "postselect": postselect},
                          lhv_bound=lhv_bound)


def s_chsh(samples: PhasePoint, angles: AngleSet = None,
           postselect: bool = False,
           lhv_bound: float = DEFAULT_LHV_BOUND) -> BellStatistic:
    angles = angles or AngleSet()
    plan, ratio = chsh_design(angles, postselect=postselect)
    acc = accumulate(plan, samples)
    return ratio.evaluate(acc, params={"angles": angles,
                                       "postselect": postselect},
                          lhv_bound=lhv_bound)
