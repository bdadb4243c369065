"""Experiment runner: config + flags in, reproducible CSV + JSON manifest out.

Subcommands:

  static-chd    rejection-sampled N-pair Bell state, S_CHD over a phi sweep
  dynamic-chd   stochastic evolution, S_CHD over a tau or phi sweep
  dynamic-ch    S_CH over a tau or phi sweep, optional post-selection
  dynamic-chsh  S_CHSH over a tau or phi sweep, optional post-selection
  waveguide     multi-mode propagation with per-z statistics
  selftest      oracle-equivalence checks at a small trajectory count

Configuration comes from an INI-style file (sections [run], [static],
[dynamic], [waveguide]) overridden by command-line flags; precedence is
flags > file > built-in defaults.

Outputs: a CSV whose first line points at the JSON manifest sidecar
(<output>.manifest.json).  All floats are printed with nine significant
digits, and the CSV bytes depend only on the configuration and seed, never
on the worker count or timing.  Exit codes: 0 on success, 2 on
configuration errors, 3 on statistical-quality failures (unstable ratio
denominator, or an imaginary residual beyond three of its standard errors;
the CSV is still written in the latter case).
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
import time

from . import __version__
from .errors import ConfigError, ImagResidualError, PpbellError
from . import estimators, oracle, runner
from .estimators import AngleSet, ch_design, chd_design, chsh_design, concat_designs
from .sde import DEFAULT_DT, DEFAULT_KAPPA_E, SdeConfig
from .waveguide import WaveguideConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_QUALITY = 3

PI = math.pi
STATIC_PHI_DEFAULT = tuple(k * PI / 64 for k in range(17))
PHI_SWEEP_DEFAULT = tuple(k * PI / 16 for k in range(9))
TAU_SWEEP_DEFAULT = tuple((k + 1) * 0.025 for k in range(10))
DEFAULT_SEED = 1
DEFAULT_PHI_REL = PI / 8
DEFAULT_TAU = 0.1
WAVEGUIDE_STATS = ("moments", "chd", "ch", "chsh")


def _fmt(v) -> str:
    return f"{float(v):.8e}"


def _float_list(text: str) -> tuple:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"cannot parse float list from {text!r}") from None


def _load_config(path):
    if path is None:
        return None
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise ConfigError(f"config file {path!r} not found or unreadable")
    return cp


_CASTS = {
    "int": int,
    "float": float,
    "complex": complex,
    "str": str,
    "floatlist": _float_list,
}


def _opt(args, cp, section: str, key: str, kind: str, default):
    """Resolve one option: flag > config file > default."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if cp is not None and cp.has_option(section, key):
        raw = cp.get(section, key)
        if kind == "bool":
            try:
                return cp.getboolean(section, key)
            except ValueError:
                raise ConfigError(
                    f"[{section}] {key} = {raw!r} is not a boolean") from None
        try:
            return _CASTS[kind](raw)
        except (ValueError, TypeError):
            raise ConfigError(
                f"[{section}] {key} = {raw!r} is not a valid {kind}") from None
    return default


def _run_opts(args, cp):
    seed = _opt(args, cp, "run", "seed", "int", DEFAULT_SEED)
    workers = _opt(args, cp, "run", "workers", "int", None)
    workers = runner.resolve_workers(workers)
    return seed, workers


def _write_csv(path: str, columns, rows, trailers=()):
    import os

    # reference by basename so the bytes do not depend on the directory
    lines = [f"# manifest: {os.path.basename(path)}.manifest.json",
             ",".join(columns)]
    lines.extend(rows)
    lines.extend(trailers)
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_manifest(path: str, payload: dict):
    with open(path + ".manifest.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _imag_gate(stats) -> None:
    """Statistics whose imaginary residual exceeds 3 sigma invalidate the run."""
    bad = [s for s in stats if not s.imag_consistent()]
    if bad:
        worst = max(bad, key=lambda s: abs(s.imag_residual)
                    / max(s.imag_stderr, 1e-300))
        raise ImagResidualError(
            f"{len(bad)} statistic(s) have imaginary residuals beyond 3 sigma "
            f"(worst: {worst.name} residual {worst.imag_residual:.3e} vs "
            f"SE {worst.imag_stderr:.3e}); ensemble too small or biased")


def _stat_rows(stats):
    return [{"name": s.name, "value": s.value, "stderr": s.stderr,
             "imag_residual": s.imag_residual, "imag_stderr": s.imag_stderr,
             "params": s.params} for s in stats]


def _fuse(probe_components, ratio_designs):
    """One measurement plan from leading probe components plus ratio designs
    whose component indices are shifted past everything before them."""
    import dataclasses

    comps = list(probe_components)
    ratios = []
    for plan_i, ratio_i in ratio_designs:
        off = len(comps)
        comps.extend(plan_i.components)

        def shift(terms, off=off):
            return tuple((c, i + off) for c, i in terms)

        psi = ratio_i.postselect_index
        ratios.append(dataclasses.replace(
            ratio_i, num=shift(ratio_i.num), den=shift(ratio_i.den),
            postselect_index=None if psi is None else psi + off))
    return estimators.MeasurementPlan(components=tuple(comps)), ratios


# ---------------------------------------------------------------------------
# static-chd


def cmd_static_chd(args, cp) -> int:
    seed, workers = _run_opts(args, cp)
    n_pairs = _opt(args, cp, "static", "n_pairs", "int", 1)
    default_samples = 1 << 18 if n_pairs == 1 else 1 << 24
    samples = _opt(args, cp, "static", "samples", "int", default_samples)
    phis = _opt(args, cp, "static", "phi_list", "floatlist", STATIC_PHI_DEFAULT)
    lhv = _opt(args, cp, "static", "lhv_bound", "float", 1.0)
    out = _opt(args, cp, "run", "out", "str", "static_chd.csv")

    t0 = time.perf_counter()
    plan, ratios = concat_designs([chd_design(n_pairs, f) for f in phis])
    acc, n_proposed, n_accepted = runner.run_static(
        n_pairs, samples, seed, plan, workers)
    stats = [ratio.evaluate(acc, params={"N": n_pairs, "phi_rel": f},
                            lhv_bound=lhv)
             for f, ratio in zip(phis, ratios)]

    rows = [",".join([_fmt(f), _fmt(s.value), _fmt(s.stderr),
                      _fmt(s.imag_residual), str(s.n_samples),
                      _fmt(oracle.s_chd_exact(n_pairs, f))])
            for f, s in zip(phis, stats)]
    _write_csv(out, ("phi", "S_chd", "stderr", "imag_residual", "n_samples",
                     "s_chd_exact"), rows)
    _write_manifest(out, {
        "command": "static-chd", "version": __version__, "seed": seed,
        "workers": workers, "n_pairs": n_pairs, "n_samples": samples,
        "phi_list": list(phis), "lhv_bound": lhv,
        "n_proposed": n_proposed, "n_accepted": n_accepted,
        "acceptance_rate": n_accepted / n_proposed,
        "statistics": _stat_rows(stats),
        "wall_time_s": time.perf_counter() - t0,
    })
    _imag_gate(stats)
    return EXIT_OK


# ---------------------------------------------------------------------------
# dynamic sweeps


def _dynamic_oracle(stat: str, tau: float, phi_rel: float, angles: AngleSet,
                    postselect: bool) -> float:
    state = oracle.fock_pdc_state_auto(tau)
    if stat == "chd":
        return oracle.fock_s_chd(state, phi_rel, 1)
    if stat == "ch":
        return oracle.fock_s_ch(state, angles, postselect=postselect)
    return oracle.fock_s_chsh(state, angles, postselect=postselect)


def cmd_dynamic(args, cp, stat: str) -> int:
    seed, workers = _run_opts(args, cp)
    sweep = _opt(args, cp, "dynamic", "sweep", "str", "tau")
    if sweep not in ("tau", "phi"):
        raise ConfigError(f"sweep must be 'tau' or 'phi', got {sweep!r}")
    n_traj = _opt(args, cp, "dynamic", "traj", "int", 1 << 18)
    dt = _opt(args, cp, "dynamic", "dt", "float", DEFAULT_DT)
    kappa_e = _opt(args, cp, "dynamic", "kappa_e", "float", DEFAULT_KAPPA_E)
    lhv = _opt(args, cp, "dynamic", "lhv_bound", "float", 1.0)
    postselect = bool(_opt(args, cp, "dynamic", "postselect", "bool", False))
    if stat == "chd":
        postselect = False
    out_default = f"dynamic_{stat}.csv"
    out = _opt(args, cp, "run", "out", "str", out_default)
    col = {"chd": "S_chd", "ch": "S_ch", "chsh": "S_chsh"}[stat]

    t0 = time.perf_counter()
    if sweep == "tau":
        taus = _opt(args, cp, "dynamic", "tau_list", "floatlist",
                    TAU_SWEEP_DEFAULT)
        phi_rel = _opt(args, cp, "dynamic", "phi_rel", "float",
                       DEFAULT_PHI_REL)
        angles = AngleSet.from_relative(phi_rel)
        if stat == "chd":
            plan, ratio = chd_design(1, phi_rel)
        elif stat == "ch":
            plan, ratio = ch_design(angles, postselect=postselect)
        else:
            plan, ratio = chsh_design(angles, postselect=postselect)
        times = tuple(tau / kappa_e for tau in taus)
        cfg = SdeConfig(kappa_E=kappa_e, dt=dt, t_end=max(times),
                        n_traj=n_traj, seed=seed, record_times=times)
        accs = runner.run_dynamic(cfg, plan, workers)
        stats, rows = [], []
        for tau, t in zip(taus, times):
            s = ratio.evaluate(accs[t],
                               params={"tau": tau, "phi_rel": phi_rel,
                                       "postselect": postselect},
                               lhv_bound=lhv)
            stats.append(s)
            rows.append(",".join([
                _fmt(tau), _fmt(s.value), _fmt(s.stderr),
                _fmt(s.imag_residual), str(s.n_samples),
                _fmt(_dynamic_oracle(stat, tau, phi_rel, angles, postselect))]))
        sweep_axis = "tau"
        sweep_values = list(taus)
    else:
        tau = _opt(args, cp, "dynamic", "tau", "float", DEFAULT_TAU)
        phis = _opt(args, cp, "dynamic", "phi_list", "floatlist",
                    PHI_SWEEP_DEFAULT)
        designs = []
        for f in phis:
            if stat == "chd":
                designs.append(chd_design(1, f))
            elif stat == "ch":
                designs.append(ch_design(AngleSet.from_relative(f),
                                         postselect=postselect))
            else:
                designs.append(chsh_design(AngleSet.from_relative(f),
                                           postselect=postselect))
        plan, ratios = concat_designs(designs)
        t_rec = tau / kappa_e
        cfg = SdeConfig(kappa_E=kappa_e, dt=dt, t_end=t_rec, n_traj=n_traj,
                        seed=seed, record_times=(t_rec,))
        accs = runner.run_dynamic(cfg, plan, workers)
        stats, rows = [], []
        for f, ratio in zip(phis, ratios):
            s = ratio.evaluate(accs[t_rec],
                               params={"tau": tau, "phi_rel": f,
                                       "postselect": postselect},
                               lhv_bound=lhv)
            stats.append(s)
            rows.append(",".join([
                _fmt(f), _fmt(s.value), _fmt(s.stderr),
                _fmt(s.imag_residual), str(s.n_samples),
                _fmt(_dynamic_oracle(stat, tau, f, AngleSet.from_relative(f),
                                     postselect))]))
        sweep_axis = "phi_rel"
        sweep_values = list(phis)

    _write_csv(out, (sweep_axis, col, "stderr", "imag_residual", "n_traj",
                     "oracle"), rows)
    _write_manifest(out, {
        "command": f"dynamic-{stat}", "version": __version__, "seed": seed,
        "workers": workers, "n_traj": n_traj, "dt": dt, "kappa_e": kappa_e,
        "sweep": sweep_axis, "sweep_values": sweep_values,
        "postselect": postselect, "lhv_bound": lhv,
        "statistics": _stat_rows(stats),
        "wall_time_s": time.perf_counter() - t0,
    })
    _imag_gate(stats)
    return EXIT_OK


# ---------------------------------------------------------------------------
# waveguide


def _moment_stat(acc, index: int, name: str, params: dict):
    """Package one raw moment as a BellStatistic-shaped record."""
    import numpy as np

    m = acc.mean()[index]
    cov = acc.cov_of_mean()
    se = float(np.sqrt(cov[2 * index, 2 * index]))
    imag_se = float(np.sqrt(cov[2 * index + 1, 2 * index + 1]))
    return estimators.BellStatistic(
        name=name, value=float(m.real), stderr=se,
        imag_residual=float(m.imag), imag_stderr=imag_se,
        n_samples=acc.n_samples, params=params)


def cmd_waveguide(args, cp) -> int:
    seed, workers = _run_opts(args, cp)
    sec = "waveguide"
    stats_spec = _opt(args, cp, sec, "statistics", "str", "moments,ch")
    stat_names = tuple(s.strip() for s in stats_spec.split(",") if s.strip())
    for name in stat_names:
        if name not in WAVEGUIDE_STATS:
            raise ConfigError(
                f"unknown waveguide statistic {name!r}; "
                f"choose from {','.join(WAVEGUIDE_STATS)}")
    phi_rel = _opt(args, cp, sec, "phi_rel", "float", DEFAULT_PHI_REL)
    postselect = bool(_opt(args, cp, sec, "postselect", "bool", False))
    lhv = _opt(args, cp, sec, "lhv_bound", "float", 1.0)
    out = _opt(args, cp, "run", "out", "str", "waveguide.csv")
    record_z = _opt(args, cp, sec, "record_z", "floatlist", None)

    cfg = WaveguideConfig(
        kappa=_opt(args, cp, sec, "kappa", "complex", 1.0),
        k2=_opt(args, cp, sec, "k2", "float", 0.0),
        k2_p=_opt(args, cp, sec, "k2_p", "float", 0.0),
        gamma_loss=_opt(args, cp, sec, "gamma", "float", 0.0),
        gamma_p=_opt(args, cp, sec, "gamma_p", "float", 0.0),
        z_end=_opt(args, cp, sec, "z_end", "float", 0.1),
        dz=_opt(args, cp, sec, "dz", "float", 2e-4),
        n_t=_opt(args, cp, sec, "n_t", "int", 1),
        T=_opt(args, cp, sec, "window", "float", 1.0),
        seed=seed,
        n_traj=_opt(args, cp, sec, "traj", "int", 1 << 16),
        record_z=record_z if record_z is not None else (0.05, 0.1),
        pump_kind=_opt(args, cp, sec, "pump_kind", "str", "constant"),
        pump_peak=_opt(args, cp, sec, "pump_peak", "complex", 1.0),
        pump_t0=_opt(args, cp, sec, "pump_t0", "float", 0.0),
        pump_width=_opt(args, cp, sec, "pump_width", "float", 0.1),
        pump_frozen=not bool(_opt(args, cp, sec, "deplete_pump", "bool",
                                  False)),
        signal_kind=_opt(args, cp, sec, "signal_kind", "str", "none"),
        signal_peak=_opt(args, cp, sec, "signal_peak", "complex", 0.0),
        signal_t0=_opt(args, cp, sec, "signal_t0", "float", 0.0),
        signal_width=_opt(args, cp, sec, "signal_width", "float", 0.1),
        cell_index=_opt(args, cp, sec, "cell_index", "int", None),
    )

    angles = AngleSet.from_relative(phi_rel)
    probe_components = ()
    moment_rows = ()
    if "moments" in stat_names:
        probe_components = estimators.moments_design().components
        # report the two moments with closed-form reduction oracles
        moment_rows = ((0, "n_a1"), (4, "anom_11"))
    ratio_names = [n for n in stat_names if n != "moments"]
    ratio_designs = []
    for name in ratio_names:
        if name == "chd":
            ratio_designs.append(chd_design(1, phi_rel))
        elif name == "ch":
            ratio_designs.append(ch_design(angles, postselect=postselect))
        else:
            ratio_designs.append(chsh_design(angles, postselect=postselect))
    plan, ratios = _fuse(probe_components, ratio_designs)

    t0 = time.perf_counter()
    accs, dropped, n_failed, n_flips = runner.run_waveguide(cfg, plan, workers)

    ke = cfg.effective_kappa_E
    reduction = cfg.is_reduction
    rows = []
    all_stats = []
    gated = []
    checks = []
    for z in cfg.record_z:
        acc = accs[z]
        tau = ke * z
        per_row = []
        for idx, name in moment_rows:
            s = _moment_stat(acc, idx, name, {"z": z})
            if reduction:
                orc = (oracle.mean_photon_number(tau) if name == "n_a1"
                       else oracle.anomalous_moment(tau))
                # anomalous moments are real only in the reduction limit;
                # dispersion chirps both polarizations the same way, so a
                # complex residual there is physics, not a sampling defect
                gated.append(s)
            else:
                orc = float("nan")
            per_row.append((name, s, orc))
        for name, ratio in zip(ratio_names, ratios):
            s = ratio.evaluate(acc, params={"z": z, "phi_rel": phi_rel,
                                            "postselect": postselect},
                               lhv_bound=lhv)
            if reduction:
                orc = _dynamic_oracle(name, tau, phi_rel, angles, postselect)
            else:
                orc = float("nan")
            per_row.append((name, s, orc))
            gated.append(s)
        for name, s, orc in per_row:
            all_stats.append(s)
            if reduction and math.isfinite(orc):
                checks.append(abs(s.value - orc) <= 3 * s.stderr)
            rows.append(",".join([
                _fmt(z), name, _fmt(s.value), _fmt(s.stderr),
                _fmt(s.imag_residual), str(s.n_samples), _fmt(orc)]))

    if reduction:
        verdict = "PASS" if checks and all(checks) else "FAIL"
        trailer = (f"# reduction check: {verdict}",)
    else:
        trailer = ("# reduction check: N/A (not a reduction configuration)",)

    import dataclasses

    _write_csv(out, ("z", "statistic", "value", "stderr", "imag_residual",
                     "n_traj", "oracle"), rows, trailers=trailer)
    _write_manifest(out, {
        "command": "waveguide", "version": __version__, "seed": seed,
        "workers": workers, "config": dataclasses.asdict(cfg),
        "statistics_requested": list(stat_names),
        "reduction": reduction, "reduction_check": trailer[0][2:],
        "n_failed": n_failed, "n_branch_flips": n_flips,
        "dropped_samples": {str(z): int(v) for z, v in dropped.items()},
        "statistics": _stat_rows(all_stats),
        "wall_time_s": time.perf_counter() - t0,
    })
    _imag_gate(gated)
    return EXIT_OK


# ---------------------------------------------------------------------------
# selftest


def cmd_selftest(args, cp) -> int:
    import numpy as np

    seed, workers = _run_opts(args, cp)
    n_traj = _opt(args, cp, "dynamic", "traj", "int", 1 << 16)
    out = _opt(args, cp, "run", "out", "str", "selftest.csv")
    tau = DEFAULT_TAU
    angles = AngleSet()

    t0 = time.perf_counter()
    rows = []
    ok = True

    def add(check, value, reference, stderr, tol):
        nonlocal ok
        passed = abs(value - reference) <= tol
        ok = ok and passed
        rows.append(",".join([check, _fmt(value), _fmt(reference),
                              _fmt(stderr), str(int(passed))]))
        return passed

    # exact identities, no sampling involved
    params = oracle.SqueezeParams(r=tau)
    c = params.pair_amplitudes(oracle.N_MAX_DEFAULT)
    norm_ref = 1 - params.x ** (2 * (oracle.N_MAX_DEFAULT + 1))
    add("pair_norm_identity", float(np.sum(c * c)), norm_ref, 0.0, 1e-12)

    tiny = oracle.fock_pdc_state(1e-6)
    for f in (PI / 8, PI / 4):
        add(f"g_selfconsistency_{f:.4f}", oracle.fock_g(tiny, f),
            oracle.g_exact(1, f), 0.0, 1e-10)

    # truncated state vs the untruncated closed form: tail-level agreement
    state = oracle.fock_pdc_state_auto(tau)
    add("g_closed_form", oracle.fock_g(state, PI / 8),
        oracle.g_dynamic_n1(tau, PI / 8), 0.0, 1e-6)

    # Monte Carlo against the Fock oracle on one shared ensemble
    probes = estimators.MeasurementPlan(components=(
        estimators.Joint(theta=0.0, phi=PI / 8, pattern="++"),
        estimators.Marginal(side="A", angle=PI / 4),
        estimators.NormZ(),
    ))
    plan, ratios = _fuse(probes.components,
                         [ch_design(angles, postselect=False),
                          chsh_design(angles, postselect=True),
                          chd_design(1, PI / 8)])
    cfg = SdeConfig(t_end=tau, n_traj=n_traj, seed=seed, record_times=(tau,))
    acc = runner.run_dynamic(cfg, plan, workers)[tau]

    m = acc.mean()
    cov = acc.cov_of_mean()
    mc_probes = (
        ("prob_joint_pp", 0, oracle.fock_expect(state, probes.components[0])),
        ("prob_marginal_A", 1, oracle.fock_expect(state, probes.components[1])),
        ("postselection_norm", 2, oracle.fock_expect(state, probes.components[2])),
    )
    for check, i, ref in mc_probes:
        se = float(np.sqrt(cov[2 * i, 2 * i]))
        add(check, float(m[i].real), ref, se, 3 * se)

    mc_ratios = (
        ("s_ch", ratios[0], oracle.fock_s_ch(state, angles)),
        ("s_chsh_postselected", ratios[1],
         oracle.fock_s_chsh(state, angles, postselect=True)),
        ("s_chd_dynamic", ratios[2], oracle.fock_s_chd(state, PI / 8, 1)),
    )
    stats = []
    for check, ratio, ref in mc_ratios:
        s = ratio.evaluate(acc, params={"tau": tau})
        stats.append(s)
        add(check, s.value, ref, s.stderr, 3 * s.stderr)

    _write_csv(out, ("check", "value", "reference", "stderr", "pass"), rows)
    _write_manifest(out, {
        "command": "selftest", "version": __version__, "seed": seed,
        "workers": workers, "n_traj": n_traj, "tau": tau,
        "all_passed": ok,
        "statistics": _stat_rows(stats),
        "wall_time_s": time.perf_counter() - t0,
    })
    if not ok:
        raise ImagResidualError("selftest: one or more oracle-equivalence "
                                "checks failed; see " + out)
    _imag_gate(stats)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_run_flags(p):
    p.add_argument("--config", help="INI config file")
    p.add_argument("--seed", type=int, help="master seed (default 1)")
    p.add_argument("--workers", type=int,
                   help="worker processes (default $PPBELL_WORKERS or 1)")
    p.add_argument("--out", help="output CSV path")


def _add_dynamic_flags(p, with_postselect: bool):
    p.add_argument("--traj", type=int, help="trajectory count (default 2^18)")
    p.add_argument("--dt", type=float, help="time step (default 2e-4)")
    p.add_argument("--kappa-e", dest="kappa_e", type=float,
                   help="gain kappa E (default 1)")
    p.add_argument("--sweep", choices=("tau", "phi"),
                   help="sweep variable (default tau)")
    p.add_argument("--tau", type=float,
                   help="dimensionless time for phi sweeps (default 0.1)")
    p.add_argument("--tau-list", dest="tau_list", type=_float_list,
                   help="comma-separated tau grid")
    p.add_argument("--phi-rel", dest="phi_rel", type=float,
                   help="relative angle for tau sweeps (default pi/8)")
    p.add_argument("--phi-list", dest="phi_list", type=_float_list,
                   help="comma-separated relative-angle grid")
    p.add_argument("--lhv-bound", dest="lhv_bound", type=float,
                   help="classical bound used for violation flags (default 1)")
    if with_postselect:
        p.add_argument("--postselect", action="store_const", const=True,
                       default=None, help="divide by the vacuum-excluding norm")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppbell",
        description="Phase-space Monte Carlo tests of Bell inequalities")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("static-chd",
                       help="rejection-sampled Bell state, CHD statistic")
    _add_run_flags(p)
    p.add_argument("--n-pairs", dest="n_pairs", type=int,
                   help="photon pairs N (default 1)")
    p.add_argument("--samples", type=int,
                   help="sample count (default 2^18 for N=1, 2^24 for N=2)")
    p.add_argument("--phi-list", dest="phi_list", type=_float_list,
                   help="comma-separated angles (default 17 points to pi/4)")
    p.add_argument("--lhv-bound", dest="lhv_bound", type=float)

    for stat in ("chd", "ch", "chsh"):
        p = sub.add_parser(f"dynamic-{stat}",
                           help=f"stochastic evolution, {stat.upper()} statistic")
        _add_run_flags(p)
        _add_dynamic_flags(p, with_postselect=stat != "chd")

    p = sub.add_parser("waveguide", help="multi-mode waveguide propagation")
    _add_run_flags(p)
    p.add_argument("--statistics", help="comma list from moments,chd,ch,chsh")
    p.add_argument("--kappa", type=complex)
    p.add_argument("--k2", type=float, help="signal group velocity dispersion")
    p.add_argument("--k2-p", dest="k2_p", type=float)
    p.add_argument("--gamma", type=float, help="signal amplitude loss")
    p.add_argument("--gamma-p", dest="gamma_p", type=float)
    p.add_argument("--z-end", dest="z_end", type=float)
    p.add_argument("--dz", type=float)
    p.add_argument("--n-t", dest="n_t", type=int, help="grid points (power of two)")
    p.add_argument("--window", type=float, help="comoving time window T")
    p.add_argument("--traj", type=int, help="trajectory count (default 2^16)")
    p.add_argument("--record-z", dest="record_z", type=_float_list)
    p.add_argument("--pump-kind", dest="pump_kind", choices=("constant", "gaussian"))
    p.add_argument("--pump-peak", dest="pump_peak", type=complex)
    p.add_argument("--pump-t0", dest="pump_t0", type=float)
    p.add_argument("--pump-width", dest="pump_width", type=float)
    p.add_argument("--deplete-pump", dest="deplete_pump", action="store_const",
                   const=True, default=None,
                   help="evolve the pump (default: frozen)")
    p.add_argument("--signal-kind", dest="signal_kind",
                   choices=("none", "constant", "gaussian"))
    p.add_argument("--signal-peak", dest="signal_peak", type=complex)
    p.add_argument("--signal-t0", dest="signal_t0", type=float)
    p.add_argument("--signal-width", dest="signal_width", type=float)
    p.add_argument("--cell-index", dest="cell_index", type=int)
    p.add_argument("--phi-rel", dest="phi_rel", type=float)
    p.add_argument("--postselect", action="store_const", const=True, default=None)
    p.add_argument("--lhv-bound", dest="lhv_bound", type=float)

    p = sub.add_parser("selftest", help="oracle-equivalence checks")
    _add_run_flags(p)
    p.add_argument("--traj", type=int, help="trajectory count (default 2^16)")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cp = _load_config(getattr(args, "config", None))
        if args.command == "static-chd":
            return cmd_static_chd(args, cp)
        if args.command == "dynamic-chd":
            return cmd_dynamic(args, cp, "chd")
        if args.command == "dynamic-ch":
            return cmd_dynamic(args, cp, "ch")
        if args.command == "dynamic-chsh":
            return cmd_dynamic(args, cp, "chsh")
        if args.command == "waveguide":
            return cmd_waveguide(args, cp)
        return cmd_selftest(args, cp)
    except ConfigError as exc:
        print(f"ppbell: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PpbellError as exc:
        print(f"ppbell: {exc}", file=sys.stderr)
        return EXIT_QUALITY


if __name__ == "__main__":
    sys.exit(main())
