"""Monte Carlo phase-space tests of Bell inequalities.

The positive P-representation gives every four-mode bosonic state a genuine
probability density on a doubled phase space (independent amplitudes alpha
and alpha^+ per mode).  Sampling that density and averaging polynomial or
projector-kernel observables reproduces quantum predictions, including ones
that violate Bell inequalities, with errors that shrink as 1/sqrt(samples).

Two sample sources feed the estimators: a rejection sampler for the static
N-pair Bell state, and a stochastic integrator for parametric
down-conversion dynamics from vacuum (plus its multi-mode waveguide
extension).  Three Bell statistics are built from them: the intensity-moment
CHD form, the probability-ratio CH form, and the post-selected CHSH form,
each with batch-means standard errors and checked against closed-form or
Fock-basis oracles.
"""

from .errors import (
    ConfigError,
    ImagResidualError,
    NonFiniteError,
    PpbellError,
    SamplingError,
    TruncationError,
    UnstableDenominatorError,
)
from .phasespace import PhasePoint, RotatedPoint, rotate
from .static_sampler import PairCount, sample_bell_chunk, sample_bell_point
from .sde import SdeConfig, simulate
from .estimators import (
    AngleSet,
    BellStatistic,
    MomentAccumulator,
    correlation_E,
    correlator_g,
    prob_joint,
    prob_marginal,
    s_ch,
    s_chd,
    s_chsh,
    stderr_batch,
)
from .oracle import (
    FockStateVector,
    SqueezeParams,
    fock_expect,
    fock_pdc_state,
    g_exact,
    s_chd_exact,
)
from .waveguide import PropagationResult, WaveguideConfig, propagate

__version__ = "1.0.0"

__all__ = [
    "AngleSet",
    "BellStatistic",
    "ConfigError",
    "FockStateVector",
    "ImagResidualError",
    "MomentAccumulator",
    "NonFiniteError",
    "PairCount",
    "PhasePoint",
    "PpbellError",
    "PropagationResult",
    "RotatedPoint",
    "SamplingError",
    "SdeConfig",
    "SqueezeParams",
    "TruncationError",
    "UnstableDenominatorError",
    "WaveguideConfig",
    "correlation_E",
    "correlator_g",
    "fock_expect",
    "fock_pdc_state",
    "g_exact",
    "prob_joint",
    "prob_marginal",
    "propagate",
    "rotate",
    "s_ch",
    "s_chd",
    "s_chd_exact",
    "s_chsh",
    "sample_bell_chunk",
    "sample_bell_point",
    "simulate",
    "stderr_batch",
    "__version__",
]
