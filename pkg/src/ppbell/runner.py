"""Chunked, optionally parallel ensemble execution with reproducible streams.

Every ensemble is generated in fixed-size chunks.  Chunk i of a run draws
from the substream seeded by (seed, stream_tag, i), and partial results are
merged in chunk order, so the final accumulators are bit-identical whether
chunks run in one process or across a worker pool, and for any worker count.

Stream tags separate the static sampler, the four-mode dynamics, and the
waveguide so a shared seed never reuses random numbers across run kinds.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from functools import reduce

from .errors import ConfigError
from .estimators import BATCH, MeasurementPlan, MomentAccumulator
from .static_sampler import PairCount, sample_bell_chunk

CHUNK = 1 << 14
WAVEGUIDE_CHUNK = 1 << 11   # smaller: each trajectory carries a full grid

STREAM_STATIC = 1
STREAM_DYNAMIC = 2
STREAM_WAVEGUIDE = 3

WORKERS_ENV = "PPBELL_WORKERS"


def substream(seed: int, stream_tag: int, chunk_index: int):
    """Independent generator for one chunk of one run kind."""
    import numpy as np

    return np.random.default_rng([int(seed), int(stream_tag), int(chunk_index)])


def resolve_workers(workers=None) -> int:
    if workers is None:
        raw = os.environ.get(WORKERS_ENV, "1")
        try:
            workers = int(raw)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV}={raw!r} is not an integer") from None
    workers = int(workers)
    if workers < 1:
        raise ConfigError(f"worker count must be >= 1, got {workers}")
    return workers


def _chunk_sizes(n: int, chunk: int) -> list:
    if n < 1:
        raise ConfigError(f"sample count must be positive, got {n}")
    if n % BATCH:
        raise ConfigError(f"sample count must be a multiple of {BATCH}, got {n}")
    return [min(chunk, n - lo) for lo in range(0, n, chunk)]


def _map_ordered(task, args, workers: int):
    """Run task over args, yielding results in submission order."""
    if workers == 1 or len(args) == 1:
        return [task(a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, args))


# ---------------------------------------------------------------------------
# static ensembles


def _static_task(args):
    n_pairs, n, seed, index, plan = args
    rng = substream(seed, STREAM_STATIC, index)
    point, n_proposed, n_accepted = sample_bell_chunk(n_pairs, n, rng)
    acc = MomentAccumulator(plan.n_components)
    acc.add_chunk(plan.measure(point.alpha, point.alpha_plus))
    return acc, n_proposed, n_accepted


def run_static(N: int, n_samples: int, seed: int, plan: MeasurementPlan,
               workers=None):
    """Accumulate a static Bell-state ensemble.

    Returns (accumulator, n_proposed, n_accepted); the proposal counts cover
    the whole run including acceptances discarded at chunk boundaries."""
    workers = resolve_workers(workers)
    n_pairs = PairCount(N).N
    sizes = _chunk_sizes(n_samples, CHUNK)
    args = [(n_pairs, size, seed, i, plan) for i, size in enumerate(sizes)]
    parts = _map_ordered(_static_task, args, workers)
    acc = reduce(lambda a, b: a.merge(b), (p[0] for p in parts))
    n_proposed = sum(p[1] for p in parts)
    n_accepted = sum(p[2] for p in parts)
    return acc, n_proposed, n_accepted


# ---------------------------------------------------------------------------
# four-mode dynamic ensembles


def _dynamic_task(args):
    cfg, n, index, plan = args
    from .sde import evolve_chunk

    rng = substream(cfg.seed, STREAM_DYNAMIC, index)
    accs = {t: MomentAccumulator(plan.n_components) for t in cfg.record_times}

    def on_record(t, alpha, alpha_plus):
        accs[t].add_chunk(plan.measure(alpha, alpha_plus))

    evolve_chunk(n, cfg, rng, on_record)
    return accs


def run_dynamic(cfg, plan: MeasurementPlan, workers=None) -> dict:
    """Accumulate the stochastic evolution at every record time.

    Returns {record_time: MomentAccumulator} over cfg.n_traj trajectories."""
    workers = resolve_workers(workers)
    sizes = _chunk_sizes(cfg.n_traj, CHUNK)
    args = [(cfg, size, i, plan) for i, size in enumerate(sizes)]
    parts = _map_ordered(_dynamic_task, args, workers)
    out = {}
    for t in cfg.record_times:
        out[t] = reduce(lambda a, b: a.merge(b), (p[t] for p in parts))
    return out


def _dynamic_raw_task(args):
    cfg, n, index = args
    import numpy as np

    from .sde import evolve_chunk

    rng = substream(cfg.seed, STREAM_DYNAMIC, index)
    out = {}

    def on_record(t, alpha, alpha_plus):
        out[t] = np.concatenate([alpha, alpha_plus]).copy()

    evolve_chunk(n, cfg, rng, on_record)
    return out


def run_dynamic_raw(cfg, workers=None) -> dict:
    """Materialize whole trajectories: {record_time: (8, n_traj) array}."""
    import numpy as np

    workers = resolve_workers(workers)
    sizes = _chunk_sizes(cfg.n_traj, CHUNK)
    args = [(cfg, size, i) for i, size in enumerate(sizes)]
    parts = _map_ordered(_dynamic_raw_task, args, workers)
    out = {t: np.empty((8, cfg.n_traj), dtype=np.complex128)
           for t in cfg.record_times}
    lo = 0
    for size, part in zip(sizes, parts):
        for t in cfg.record_times:
            out[t][:, lo:lo + size] = part[t]
        lo += size
    return out


# ---------------------------------------------------------------------------
# waveguide ensembles


def _waveguide_task(args):
    cfg, n, index, plan = args
    import numpy as np

    from .waveguide import evolve_chunk

    rng = substream(cfg.seed, STREAM_WAVEGUIDE, index)
    accs = {z: MomentAccumulator(plan.n_components) for z in cfg.record_z}
    dropped = {z: 0 for z in cfg.record_z}

    def on_record(z, alpha, alpha_plus, alive):
        n_alive = int(np.count_nonzero(alive))
        n_use = (n_alive // BATCH) * BATCH
        dropped[z] += n - n_use
        if n_use == 0:
            return
        cols = np.flatnonzero(alive)[:n_use]
        accs[z].add_chunk(plan.measure(alpha[:, cols], alpha_plus[:, cols]))

    n_failed, n_flips = evolve_chunk(n, cfg, rng, on_record)
    return accs, dropped, n_failed, n_flips


def run_waveguide(cfg, plan: MeasurementPlan, workers=None):
    """Accumulate waveguide output statistics at every recorded z.

    Failed trajectories (non-finite fields, usually a depleted-pump square
    root crossing) are excluded from the statistics from the point of
    failure on; the count is returned so callers can report it.  Surviving
    samples are folded in whole batches, so up to batch-size - 1 survivors
    per chunk and record point may be dropped alongside the failures.

    Returns (accumulators per z, dropped counts per z, n_failed, n_flips)."""
    workers = resolve_workers(workers)
    sizes = _chunk_sizes(cfg.n_traj, WAVEGUIDE_CHUNK)
    args = [(cfg, size, i, plan) for i, size in enumerate(sizes)]
    parts = _map_ordered(_waveguide_task, args, workers)
    accs = {}
    dropped = {}
    for z in cfg.record_z:
        accs[z] = reduce(lambda a, b: a.merge(b), (p[0][z] for p in parts))
        dropped[z] = sum(p[1][z] for p in parts)
    n_failed = sum(p[2] for p in parts)
    n_flips = sum(p[3] for p in parts)
    return accs, dropped, n_failed, n_flips
