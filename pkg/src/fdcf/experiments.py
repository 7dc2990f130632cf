"""Scenario configuration, Monte Carlo driver, baselines and result files.

A scenario is a flat ``key = value`` text file whose keys are the field
names of :class:`ScenarioConfig`. Power keys may be given in dBm with a
``_dbm`` suffix (``noise_dbm = -104`` sets ``noise_w``) and ratios in dB with
a ``_db`` suffix (``rho_rsi_db = -110`` sets ``rho_rsi``); both are converted
once when the file is parsed.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .channel import (ChannelSet, FadingParams, Topology, assemble_channels, db_to_linear,
                      dbm_to_watt, generate_topology)
from .metrics import LN2, PowerModelParams, effective_se_with_training, total_power
from .optimizer import STRATEGIES, OptimizerConfig, SolveResult, solve_se_ee
from .pilot import (beta_tilde, estimation_error_variance, heap_pilot_assignment, lmmse_estimate,
                    training_signal)
from .precoding import PrecoderBasis, ReceiverSet, block_sq_norms

log = logging.getLogger(__name__)

DUPLEX_MODES = ("FD", "HD")
ARCHITECTURES = ("CF", "CO_MMIMO", "SC_MIMO")

CSV_COLUMNS = ("scenario_id", "trial", "strategy", "duplex", "arch", "status", "se_bits_hz",
               "ee_bits_joule", "p_total_w", "active_aps", "iters", "ms")
AGGREGATE_COLUMNS = ("sweep_key", "sweep_value", "strategy", "duplex", "arch", "n_trials",
                     "feasible_rate", "se_mean", "se_sem", "ee_mean", "ee_sem")


class ConfigError(ValueError):
    """Malformed or out-of-range scenario configuration."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Every simulation parameter of one scenario, in SI units.

    Defaults reproduce the reference setup: 64 two-antenna APs and 10 + 10
    UEs in a 1 km disc, 10 MHz, -104 dBm noise, -110 dB residual SI, 23 dBm
    per UL UE and 43 dBm shared equally by the APs.

    ``tau = 0`` means perfect CSI; ``tau > 0`` estimates every channel from
    heap-assigned pilots of that length and charges the training overhead.
    ``p_ap_max_w`` overrides the equal split of ``p_ap_total_w``.
    """

    M: int = 64
    K: int = 10
    L: int = 10
    antennas: int = 2
    radius_km: float = 1.0
    bandwidth: float = 10e6
    rho_rsi: float = 1e-11
    noise_w: float = float(dbm_to_watt(-104.0))
    d0_km: float = 0.01
    d1_km: float = 0.05
    sigma_sh_db: float = 8.0
    rician_factor_db: float = 5.0
    nu_ap: float = 0.39
    nu_ue: float = 0.3
    p_bh: float = 0.25e-9
    p_base_dl: float = 0.1
    p_base_ul: float = 0.1
    p_active: float = 10.0
    p_sleep: float = 2.0
    p_ap_cir: float = 1.0
    p_dlue_cir: float = 0.1
    p_ulue_cir: float = 0.1
    p_ue_max_w: float = float(dbm_to_watt(23.0))
    p_ap_total_w: float = float(dbm_to_watt(43.0))
    p_ap_max_w: float | None = None
    rate_bits: float = 0.5
    tau: int = 0
    tau_c: int = 200
    eta: int = 0
    varpi: float | None = None
    delta: float = 0.99
    max_iters: int = 50
    strategies: tuple = ("IZF",)
    duplex: tuple = ("FD",)
    arch: tuple = ("CF",)
    trials: int = 10
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        try:
            self._validate()
        except ConfigError:
            raise
        except (TypeError, ValueError) as err:
            raise ConfigError(str(err)) from err

    def _validate(self):
        if min(self.M, self.K, self.L, self.antennas) < 1:
            raise ConfigError("M, K, L and antennas must be positive")
        if self.M * self.antennas <= max(self.K, self.L):
            raise ConfigError("M * antennas must exceed max(K, L)")
        positive = ("radius_km", "bandwidth", "noise_w", "d0_km", "d1_km", "p_ue_max_w",
                    "p_ap_total_w", "nu_ap", "nu_ue")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.d0_km >= self.d1_km:
            raise ConfigError("require d0_km < d1_km")
        if self.rho_rsi < 0 or self.sigma_sh_db < 0 or self.rate_bits < 0:
            raise ConfigError("rho_rsi, sigma_sh_db and rate_bits must be nonnegative")
        if self.p_ap_max_w is not None and not self.p_ap_max_w > 0:
            raise ConfigError("p_ap_max_w must be positive")
        if not 0 <= self.tau <= min(self.K, self.L):
            raise ConfigError("tau must lie in [0, min(K, L)]")
        if not 2 * self.tau < self.tau_c:
            raise ConfigError("training (2 tau) must be shorter than tau_c")
        if self.eta not in (0, 1):
            raise ConfigError("eta must be 0 or 1")
        if self.varpi is not None and not 0 < self.varpi < 1:
            raise ConfigError("varpi must lie in (0, 1)")
        if not 0 < self.delta <= 1:
            raise ConfigError("delta must lie in (0, 1]")
        if self.trials < 1 or self.workers < 1 or self.max_iters < 1:
            raise ConfigError("trials, workers and max_iters must be positive")
        for name, allowed in (("strategies", STRATEGIES), ("duplex", DUPLEX_MODES),
                              ("arch", ARCHITECTURES)):
            vals = getattr(self, name)
            if not vals or any(v not in allowed for v in vals):
                raise ConfigError(f"{name} must be a non-empty subset of {allowed}")
        # power-model constants are checked by their own dataclass
        self.power_params()

    @property
    def per_ap_budget(self) -> float:
        return self.p_ap_max_w if self.p_ap_max_w is not None else self.p_ap_total_w / self.M

    def power_params(self) -> PowerModelParams:
        try:
            return PowerModelParams(
                nu_ap=self.nu_ap, nu_ue=self.nu_ue, p_bh=self.p_bh, p_base_dl=self.p_base_dl,
                p_base_ul=self.p_base_ul, p_active=self.p_active, p_sleep=self.p_sleep,
                p_ap_cir=self.p_ap_cir, p_dlue_cir=self.p_dlue_cir, p_ulue_cir=self.p_ulue_cir,
                bandwidth=self.bandwidth)
        except ValueError as err:
            raise ConfigError(str(err)) from err

    def fading_params(self) -> FadingParams:
        return FadingParams(d0=self.d0_km, d1=self.d1_km, sigma_sh=self.sigma_sh_db,
                            rician_factor_db=self.rician_factor_db, rho_rsi=self.rho_rsi)

    def optimizer_config(self, p_ap_max: float | None = None, **kw) -> OptimizerConfig:
        rate = self.rate_bits * LN2
        return OptimizerConfig(
            eta=self.eta, varpi=self.varpi, max_iters=self.max_iters, delta_pca=self.delta,
            p_ap_max=self.per_ap_budget if p_ap_max is None else p_ap_max,
            p_ue_max=self.p_ue_max_w, rate_dl=rate, rate_ul=rate, power=self.power_params(), **kw)


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one (trial, strategy, duplex, architecture) combination.

    ``se_bits_hz``, ``ee_bits_joule`` and ``p_total_w`` are None unless the
    status is ``"optimal"``.
    """

    scenario_id: str
    trial: int
    seed: int
    strategy: str
    duplex: str
    arch: str
    status: str
    se_bits_hz: float | None
    ee_bits_joule: float | None
    p_total_w: float | None
    active_aps: int | None
    iters: int
    ms: float

    def row(self) -> dict:
        return {c: getattr(self, c) for c in CSV_COLUMNS}


# --------------------------------------------------------------------------
# configuration files

_FIELDS = {f.name: f for f in fields(ScenarioConfig)}
_TUPLE_FIELDS = ("strategies", "duplex", "arch")
_INT_FIELDS = ("M", "K", "L", "antennas", "tau", "tau_c", "eta", "max_iters", "trials", "seed",
               "workers")
_OPTIONAL_FIELDS = ("p_ap_max_w", "varpi")


def _convert(key: str, raw: str):
    """Map one ``key = value`` pair to ``(field_name, value)``."""
    raw = raw.strip()
    if key.endswith("_dbm"):
        name = key[:-4] + "_w"
        if name not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}")
        return name, float(dbm_to_watt(float(raw)))
    if key.endswith("_db") and key not in _FIELDS and key[:-3] in _FIELDS:
        return key[:-3], float(db_to_linear(float(raw)))
    if key not in _FIELDS:
        raise ConfigError(f"unknown key {key!r}")
    if key in _TUPLE_FIELDS:
        return key, tuple(v.strip().upper() for v in raw.split(",") if v.strip())
    if key in _OPTIONAL_FIELDS and raw.lower() in ("none", "auto", ""):
        return key, None
    if key in _INT_FIELDS:
        val = float(raw)
        if val != int(val):
            raise ConfigError(f"{key} must be an integer")
        return key, int(val)
    return key, float(raw)


def parse_assignments(pairs) -> dict:
    """Convert ``(key, value)`` string pairs into ScenarioConfig keyword arguments."""
    out = {}
    for key, raw in pairs:
        key = key.strip()
        try:
            if key == "K=L":
                _, v = _convert("K", raw)
                out["K"] = out["L"] = v
                continue
            name, val = _convert(key, raw)
        except ConfigError:
            raise
        except ValueError as err:
            raise ConfigError(f"bad value for {key!r}: {raw!r}") from err
        out[name] = val
    return out


def parse_config_text(text: str) -> dict:
    pairs = []
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        key, raw = line.rsplit("=", 1)
        pairs.append((key, raw))
    return parse_assignments(pairs)


def load_config(path, **overrides) -> ScenarioConfig:
    """Read a scenario file; keyword overrides win over file values."""
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from err
    kw = parse_config_text(text)
    kw.update(overrides)
    return ScenarioConfig(**kw)


def config_to_text(config: ScenarioConfig) -> str:
    lines = []
    for f in fields(config):
        v = getattr(config, f.name)
        if isinstance(v, tuple):
            v = ",".join(v)
        elif v is None:
            v = "none"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def expand_sweep(config: ScenarioConfig, key: str | None, values) -> list:
    """List of ``(scenario_id, config)`` for each swept value (or the base case)."""
    if not key:
        return [("base", config)]
    out = []
    for raw in values:
        kw = parse_assignments([(key, raw)])
        out.append((f"{key}={raw}", dataclasses.replace(config, **kw)))
    return out


# --------------------------------------------------------------------------
# trial construction

def trial_seeds(master_seed: int, trials: int) -> list:
    """Independent per-trial integer seeds derived from the master seed."""
    children = np.random.SeedSequence(master_seed).spawn(trials)
    return [int(c.generate_state(1)[0]) for c in children]


def _centered_topology(top: Topology) -> Topology:
    """One co-located AP at the disc centre holding every antenna."""
    return Topology(np.zeros((1, 2)), top.dl_positions, top.ul_positions, top.radius,
                    (top.n_antennas,))


def strongest_ap_association(beta, capacity) -> np.ndarray:
    """Serve each UE from its strongest AP that still has a free antenna.

    UEs are placed in decreasing order of their best gain.

    Parameters
    ----------
    beta : ndarray, shape (U, M)
    capacity : sequence of int, length M

    Returns
    -------
    ndarray of int, shape (U,)
    """
    beta = np.asarray(beta, dtype=float)
    free = np.array(capacity, dtype=int)
    serving = np.full(beta.shape[0], -1)
    for u in np.argsort(-beta.max(axis=1), kind="stable"):
        for m in np.argsort(-beta[u], kind="stable"):
            if free[m] > 0:
                serving[u] = m
                free[m] -= 1
                break
        else:
            raise ValueError("not enough AP antennas for single-AP association")
    return serving


def small_cell_strategy(strategy: str):
    """Builder of local single-AP precoders and receivers.

    Each DL (UL) UE is served by one AP only; within an AP the UEs are
    separated by local ZF, or by MRT/MRC for the ``MRT_MRC`` strategy.
    """
    def build(ch: ChannelSet):
        Nm = ch.antennas_per_ap
        sl = ch.ap_slices()
        dl_ap = strongest_ap_association(ch.beta_d, Nm)
        ul_ap = strongest_ap_association(ch.beta_u.T, Nm)
        B = np.zeros((ch.n_antennas, ch.n_dl), dtype=complex)
        A = np.zeros((ch.n_ul, ch.n_antennas), dtype=complex)
        for m, s in enumerate(sl):
            ks = np.flatnonzero(dl_ap == m)
            if ks.size:
                Hm = ch.H_d[np.ix_(ks, np.arange(s.start, s.stop))]
                B[s, ks] = Hm.conj().T if strategy == "MRT_MRC" else np.linalg.pinv(Hm)
            ls = np.flatnonzero(ul_ap == m)
            if ls.size:
                Hm = ch.H_u[s, ls]
                A[ls, s] = Hm.conj().T if strategy == "MRT_MRC" else np.linalg.pinv(Hm)
        label = "MRC" if strategy == "MRT_MRC" else "ZF"
        return PrecoderBasis(B, "SC_" + label), ReceiverSet(A, label)
    return build


@dataclass
class CsiErrors:
    """Estimation-error variances per antenna entry."""

    dl: np.ndarray   # (K, M)
    ul: np.ndarray   # (M, L)
    cci: np.ndarray  # (K, L)


def estimate_channels(ch: ChannelSet, tau: int, p_tr: float, rng):
    """LMMSE estimates of the DL, UL and CCI channels from heap-assigned pilots.

    DL and UL UEs train in separate phases; DL UEs estimate their CCI links
    from the UL training phase. AP-to-AP channels are taken as known.
    Requires the same antenna count at every AP.

    Returns
    -------
    ChannelSet
        Copy of ``ch`` with estimated ``H_d``, ``H_u`` and ``G_cci``.
    CsiErrors
    """
    Nm = ch.antennas_per_ap
    if len(set(Nm)) != 1:
        raise ValueError("channel estimation needs equal antennas per AP")
    M, K, L, Na = ch.n_aps, ch.n_dl, ch.n_ul, Nm[0]
    bd, bu = ch.beta_d.T, ch.beta_u            # (M, K), (M, L)
    asg_u = heap_pilot_assignment(beta_tilde(bu, Nm, tau, p_tr), tau)
    asg_d = heap_pilot_assignment(beta_tilde(bd, Nm, tau, p_tr), tau)
    h_d = ch.H_d.reshape(K, M, Na).transpose(1, 0, 2)
    h_u = ch.H_u.reshape(M, Na, L).transpose(0, 2, 1)
    h_c = ch.G_cci[:, :, None]
    noise = ch.noise_ap
    est_d = lmmse_estimate(training_signal(h_d, asg_d.upsilon, p_tr, tau, noise, rng),
                           asg_d.upsilon, bd, p_tr, tau, noise)
    est_u = lmmse_estimate(training_signal(h_u, asg_u.upsilon, p_tr, tau, noise, rng),
                           asg_u.upsilon, bu, p_tr, tau, noise)
    nd = float(np.max(ch.noise_dl))
    est_c = lmmse_estimate(training_signal(h_c, asg_u.upsilon, p_tr, tau, nd, rng),
                           asg_u.upsilon, ch.beta_cci, p_tr, tau, nd)
    errs = CsiErrors(
        dl=estimation_error_variance(asg_d.upsilon, bd, p_tr, tau, noise).T,
        ul=estimation_error_variance(asg_u.upsilon, bu, p_tr, tau, noise),
        cci=estimation_error_variance(asg_u.upsilon, ch.beta_cci, p_tr, tau, nd))
    hat = dataclasses.replace(
        ch, H_d=est_d.transpose(1, 0, 2).reshape(K, M * Na),
        H_u=est_u.transpose(0, 2, 1).reshape(M * Na, L), G_cci=est_c[:, :, 0])
    return hat, errs


def robust_sinrs(W, p, receivers: ReceiverSet, ch_hat: ChannelSet, errs: CsiErrors):
    """SINRs on estimated channels with estimation errors counted as noise."""
    W = np.asarray(W)
    p = np.asarray(p, dtype=float)
    A = receivers.rows
    Nm = ch_hat.antennas_per_ap
    C = np.abs(ch_hat.H_d @ W) ** 2
    sig_d = np.diag(C).copy()
    ipn_d = C.sum(axis=1) - sig_d + np.abs(ch_hat.G_cci) ** 2 @ p + ch_hat.noise_dl
    w_ap = block_sq_norms(W, Nm, axis=0).sum(axis=1)          # (M,)
    ext_d = errs.dl @ w_ap + errs.cci @ p
    L = ch_hat.n_ul
    D = np.abs(A @ ch_hat.H_u) ** 2 * p[None, :]
    sig_u = np.diag(D).copy()
    mask = np.triu(np.ones((L, L)), 1) if receivers.label == "ZF_SIC" else 1.0 - np.eye(L)
    ipn_u = ((D * mask).sum(axis=1) + (np.abs(A @ ch_hat.G_aa @ W) ** 2).sum(axis=1)
             + ch_hat.noise_ap * np.sum(np.abs(A) ** 2, axis=1))
    a_ap = block_sq_norms(A, Nm, axis=1)                      # (L, M)
    ext_u = (a_ap @ errs.ul) @ p
    return sig_d / (ipn_d + ext_d), sig_u / (ipn_u + ext_u)


def _evaluate(res: SolveResult, ch_eval: ChannelSet, cfg: ScenarioConfig, duplex: str,
              errs: CsiErrors | None, ch_hat: ChannelSet | None):
    """Reported (se, ee, p_total) in nats, after CSI errors, training and HD halving."""
    se = res.se
    if errs is not None:
        recv = ReceiverSet(res.receivers, res.receiver_label)
        dl, ul = robust_sinrs(res.W, res.p, recv, ch_hat, errs)
        se = float(np.sum(np.log1p(dl)) + np.sum(np.log1p(ul)))
    tau_t = 0 if cfg.tau == 0 else (2 * cfg.tau if duplex == "FD" else cfg.tau)
    se = effective_se_with_training(se, cfg.tau_c, tau_t)
    pt = total_power(res.W, res.p, res.binary.alpha, res.binary.mu, se, cfg.power_params(),
                     ch_eval.antennas_per_ap)
    ee = cfg.bandwidth * se / pt
    if duplex == "HD":
        se, ee = se / 2, ee / 2
    return se, ee, pt


def _solve_one(ch: ChannelSet, strategy: str, arch: str, cfg: ScenarioConfig) -> SolveResult:
    if arch == "SC_MIMO":
        oc = cfg.optimizer_config(fixed_mu=tuple([1] * ch.n_aps))
        return solve_se_ee(ch, small_cell_strategy(strategy), oc)
    if arch == "CO_MMIMO":
        return solve_se_ee(ch, strategy, cfg.optimizer_config(p_ap_max=cfg.p_ap_total_w))
    return solve_se_ee(ch, strategy, cfg.optimizer_config())


def _normalize_status(status: str) -> str:
    if status in ("optimal", "infeasible"):
        return status
    return "failure"


def run_trial(scenario_id: str, cfg: ScenarioConfig, trial: int, seed: int) -> list:
    """All strategy/duplex/architecture records of one channel realization.

    Every combination sees the same UE drop and, within an architecture, the
    same channel draw, so differences between them are paired.
    """
    ss = np.random.SeedSequence(seed)
    s_top, s_cf, s_co, s_est = ss.spawn(4)
    top = generate_topology(s_top, cfg.M, cfg.K, cfg.L, cfg.radius_km, cfg.antennas)
    fp = cfg.fading_params()
    records = []
    for arch in cfg.arch:
        if arch == "CO_MMIMO":
            ch_true = assemble_channels(_centered_topology(top), fp, s_co, cfg.noise_w)
        else:
            ch_true = assemble_channels(top, fp, s_cf, cfg.noise_w)
        for duplex in cfg.duplex:
            ch = ch_true if duplex == "FD" else ch_true.without_duplex_interference()
            errs = ch_hat = None
            if cfg.tau > 0:
                rng = np.random.default_rng(s_est.spawn(1)[0])
                ch_hat, errs = estimate_channels(ch, cfg.tau, cfg.p_ue_max_w, rng)
            ch_opt = ch if ch_hat is None else ch_hat
            for strategy in cfg.strategies:
                t0 = time.perf_counter()
                try:
                    res = _solve_one(ch_opt, strategy, arch, cfg)
                    status = _normalize_status(res.status)
                    if status == "optimal":
                        se, ee, pt = _evaluate(res, ch, cfg, duplex, errs, ch_hat)
                    iters = res.iterations
                except Exception:  # a failed trial is recorded, never fatal to the batch
                    log.warning("trial %d %s/%s/%s failed", trial, strategy, duplex, arch,
                                exc_info=True)
                    status, iters = "failure", 0
                ms = 1e3 * (time.perf_counter() - t0)
                if status == "optimal":
                    records.append(TrialRecord(
                        scenario_id, trial, seed, strategy, duplex, arch, status,
                        float(se / LN2), float(ee / LN2), float(pt), int(np.sum(res.binary.mu)),
                        int(iters), ms))
                else:
                    records.append(TrialRecord(scenario_id, trial, seed, strategy, duplex, arch,
                                               status, None, None, None, None, iters, ms))
    return records


def _run_trial_args(args):
    return run_trial(*args)


def run_scenario(config: ScenarioConfig, scenario_id: str = "base") -> list:
    """Run every trial of a scenario and return the records in trial order.

    Trials are independent; with ``workers > 1`` they run in a process pool
    and are merged back by trial index, so the output does not depend on
    completion order.
    """
    seeds = trial_seeds(config.seed, config.trials)
    jobs = [(scenario_id, config, i, s) for i, s in enumerate(seeds)]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            chunks = list(pool.map(_run_trial_args, jobs))
    else:
        chunks = [_run_trial_args(j) for j in jobs]
    return [r for chunk in chunks for r in chunk]


# --------------------------------------------------------------------------
# result files

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _mean_sem(vals):
    vals = [v for v in vals if v is not None]
    n = len(vals)
    if n == 0:
        return None, None
    mean = math.fsum(vals) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in vals) / (n - 1)
    return mean, math.sqrt(var / n)


def summarize(records) -> dict:
    """Means, standard errors and feasibility rate per scenario/strategy/duplex/arch."""
    groups = {}
    for r in records:
        groups.setdefault((r.scenario_id, r.strategy, r.duplex, r.arch), []).append(r)
    out = []
    for (sid, strat, dup, arch), rs in groups.items():
        ok = [r for r in rs if r.status == "optimal"]
        se_m, se_s = _mean_sem([r.se_bits_hz for r in ok])
        ee_m, ee_s = _mean_sem([r.ee_bits_joule for r in ok])
        out.append({"scenario_id": sid, "strategy": strat, "duplex": dup, "arch": arch,
                    "n_trials": len(rs), "n_optimal": len(ok),
                    "feasible_rate": len(ok) / len(rs), "se_mean": se_m, "se_sem": se_s,
                    "ee_mean": ee_m, "ee_sem": ee_s})
    return {"groups": out, "n_records": len(records)}


def emit_results(records, path, sweep_key: str | None = None) -> dict:
    """Write ``records.csv``, ``summary.json`` and ``aggregate.csv`` under ``path``.

    ``records.csv`` has one row per record with the columns in ``CSV_COLUMNS``
    (empty cells for missing values). ``aggregate.csv`` has one row per
    scenario/strategy/duplex/arch group with the swept key and value split
    out of the scenario id, ready for plotting.

    Returns
    -------
    dict
        Paths of the written files.
    """
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    rec_path = out / "records.csv"
    with rec_path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for r in records:
            w.writerow({k: _fmt(v) for k, v in r.row().items()})
    summary = summarize(records)
    sum_path = out / "summary.json"
    sum_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    agg_path = out / "aggregate.csv"
    with agg_path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=AGGREGATE_COLUMNS)
        w.writeheader()
        for g in summary["groups"]:
            sid = g["scenario_id"]
            key, val = sid.rsplit("=", 1) if "=" in sid else (sweep_key or "", "")
            row = {"sweep_key": key, "sweep_value": val}
            row.update({c: g[c] for c in AGGREGATE_COLUMNS[2:]})
            w.writerow({k: _fmt(v) for k, v in row.items()})
    return {"records": rec_path, "summary": sum_path, "aggregate": agg_path}


def read_records(path) -> list:
    """Parse a ``records.csv`` back into TrialRecords (seed is not stored; set to -1)."""
    out = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            def num(key, cast=float):
                return cast(row[key]) if row[key] != "" else None
            out.append(TrialRecord(
                scenario_id=row["scenario_id"], trial=int(row["trial"]), seed=-1,
                strategy=row["strategy"], duplex=row["duplex"], arch=row["arch"],
                status=row["status"], se_bits_hz=num("se_bits_hz"),
                ee_bits_joule=num("ee_bits_joule"), p_total_w=num("p_total_w"),
                active_aps=num("active_aps", int), iters=int(row["iters"]), ms=float(row["ms"])))
    return out
