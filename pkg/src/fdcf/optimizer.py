"""Joint power control, AP-UE association and AP selection for SE/EE maximization.

The nonconvex problem is handled by inner convex approximation (ICA): the
fractional SINR terms and the quadratic power split are replaced by concave
minorants that are tight at the current point, and the EE ratio is handled by
a Dinkelbach parameter updated once per conic solve. Binary association and
activity are recovered from per-AP signal-power ratios after convergence, then
the continuous problem is solved again on the active APs only.

Internally the DL weights and UL powers are normalized by their
interference-free SNR scale, ``x_k = omega_k g_k / sigma_k^2`` and
``y_l = p_l |a_l h_l|^2 / (sigma_AP^2 ||a_l||^2)``, which keeps the conic
programs well scaled.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import conic_adapter as conic
from .channel import ChannelSet
from .metrics import (LN2, PowerModelParams, QosThresholds, circuit_power, dl_sinr_general,
                      sinr_coefficients, spectral_efficiency, total_power, ul_sinr_general)
from .precoding import (PrecoderBasis, ReceiverSet, SingularChannelError, block_sq_norms,
                        mrc_receiver, mrt_basis, onb_zf_basis, onb_zf_pca_basis, zf_precoder,
                        zf_receiver, zf_sic_receivers)

STRATEGIES = ("ZF", "ONB_ZF", "IZF", "MRT_MRC")


class InfeasibleProblem(RuntimeError):
    """No point meets the QoS constraints for this channel draw."""


def h_fr_bound(x, y, x0, y0):
    """Concave minorant of ``x**2 / y`` tight at ``(x0, y0)``."""
    y0 = np.asarray(y0, dtype=float)
    if np.any(y0 <= 0):
        raise ValueError("y0 must be positive")
    return 2 * x0 / y0 * x - (x0 / y0) ** 2 * y


def h_qu_bound(z, z0):
    """Affine minorant of ``z**2`` tight at ``z0``."""
    return 2 * z0 * z - z0 ** 2


def signal_power_ratio(w_km, h_km, w_k, h_k, epsilon: float) -> float:
    """Share of the received signal power contributed by one AP block."""
    num = abs(np.vdot(np.conj(h_km), w_km)) ** 2
    den = abs(np.vdot(np.conj(h_k), w_k)) ** 2
    return float(num / (den + epsilon))


def _ap_index(antennas_per_ap) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(antennas_per_ap)]).astype(int)


def signal_power_ratios(W, channels: ChannelSet, epsilon: float) -> np.ndarray:
    """Matrix of DL ratios ``r_sp[k, m]`` for precoder ``W`` (N x K)."""
    W = np.asarray(W)
    prod = channels.H_d.T * W  # (N, K): h_k[n] w_k[n]
    per_ap = np.add.reduceat(prod, _ap_index(channels.antennas_per_ap)[:-1], axis=0)  # (M, K)
    tot = prod.sum(axis=0)
    return (np.abs(per_ap) ** 2 / (np.abs(tot) ** 2 + epsilon)[None, :]).T


def ul_signal_power_ratios(p, receivers, channels: ChannelSet, epsilon: float) -> np.ndarray:
    """Matrix of UL ratios ``r_sp[m, l]`` (share of AP m in UE l's combined signal)."""
    A = receivers.rows if isinstance(receivers, ReceiverSet) else np.asarray(receivers)
    p = np.asarray(p, dtype=float)
    prod = A.T * channels.H_u  # (N, L): a_l[n] h_l[n]
    per_ap = np.add.reduceat(prod, _ap_index(channels.antennas_per_ap)[:-1], axis=0)
    tot = prod.sum(axis=0)
    return p[None, :] * np.abs(per_ap) ** 2 / (p * np.abs(tot) ** 2 + epsilon)[None, :]


def recover_alpha(W, channels: ChannelSet, varpi: float, epsilon: float = 0.0) -> np.ndarray:
    """Binary association ``alpha[k, m] = 1`` iff ``r_sp > varpi``."""
    return (signal_power_ratios(W, channels, epsilon) > varpi).astype(int)


def update_mu(W, p, receivers, channels: ChannelSet, varpi: float,
              epsilon: float = 0.0, epsilon_ul: float | None = None) -> np.ndarray:
    """AP activity: an AP stays on if it carries a non-negligible DL or UL share."""
    dl = recover_alpha(W, channels, varpi, epsilon).max(axis=0)
    eu = epsilon if epsilon_ul is None else epsilon_ul
    ul = (ul_signal_power_ratios(p, receivers, channels, eu) > varpi).max(axis=1)
    return np.maximum(dl, ul).astype(int)


@dataclass(frozen=True)
class OptimizerConfig:
    """Optimizer settings.

    Attributes
    ----------
    eta : {0, 1}
        1 maximizes SE, 0 maximizes EE.
    varpi : float, optional
        Association threshold; defaults to ``0.001 / M``.
    epsilon_rsp : float, optional
        Regularizer of the signal-power ratio; defaults to
        ``1e-12 * p_ap_max * max_k ||h_k||^2``.
    p_ap_max, p_ue_max : float
        Per-AP and per-UL-UE power budgets in Watts.
    rate_dl, rate_ul : float
        Minimum rates in nats/s/Hz.
    dinkelbach_tol : float
        Required ``|F - t phi| / max(1, t)`` at termination (EE only).
    ap_selection : bool
        When False all APs are kept active in the second phase.
    fixed_mu : ndarray, optional
        Skip AP selection and use this activity vector.
    """

    eta: int = 0
    varpi: float | None = None
    epsilon_rsp: float | None = None
    max_iters: int = 50
    rel_tol: float = 1e-4
    dinkelbach_tol: float = 1e-5
    delta_pca: float = 0.99
    p_ap_max: float = 0.3125
    p_ue_max: float = 0.19952623149688797
    rate_dl: float = 0.5 * LN2
    rate_ul: float = 0.5 * LN2
    power: PowerModelParams = field(default_factory=PowerModelParams)
    init_tol: float = 1e-5
    init_max_iters: int = 100
    ap_selection: bool = True
    fixed_mu: tuple | None = None
    tolerances: conic.Tolerances = field(default_factory=conic.Tolerances)

    def __post_init__(self):
        if self.eta not in (0, 1):
            raise ValueError("eta must be 0 or 1")
        if self.varpi is not None and not 0 < self.varpi < 1:
            raise ValueError("varpi must lie in (0, 1)")
        if self.epsilon_rsp is not None and self.epsilon_rsp <= 0:
            raise ValueError("epsilon_rsp must be positive")


@dataclass
class AllocationIterate:
    """One ICA/Dinkelbach iterate.

    ``psi_d`` and ``psi_u`` are normalized by the interference-free SNR scale,
    so the soft SINRs satisfy ``lambda <= x / psi`` with ``x`` the normalized
    weight.
    """

    omega: np.ndarray
    p: np.ndarray
    lambda_d: np.ndarray
    lambda_u: np.ndarray
    psi_d: np.ndarray
    psi_u: np.ndarray
    xi: float = 1.0
    phi: float = 1.0
    t: float = 0.0


@dataclass
class BinaryState:
    alpha: np.ndarray
    mu: np.ndarray


@dataclass
class SolveResult:
    """Outcome of :func:`solve_se_ee`.

    ``se`` is in nats/s/Hz, ``ee`` in nats/Joule, ``p_total`` in Watts.
    ``trace`` maps each phase name to the per-iteration objective (the
    Dinkelbach ratio for EE, the soft sum rate for SE).
    """

    status: str
    omega: np.ndarray | None = None
    p: np.ndarray | None = None
    W: np.ndarray | None = None
    receivers: np.ndarray | None = None
    receiver_label: str = ""
    binary: BinaryState | None = None
    se: float = 0.0
    ee: float = 0.0
    p_total: float = 0.0
    objective: float = 0.0
    sinr_dl: np.ndarray | None = None
    sinr_ul: np.ndarray | None = None
    trace: dict = field(default_factory=dict)
    iterations: int = 0
    converged: bool = False
    dinkelbach_gap: dict = field(default_factory=dict)
    phase1: dict = field(default_factory=dict)
    varpi: float = 0.0
    epsilon: float = 0.0
    wall_time: float = 0.0


def build_strategy(channels: ChannelSet, strategy: str, delta: float = 0.99):
    """Precoder basis and receivers for a named linear strategy."""
    if strategy == "ZF":
        return zf_precoder(channels.H_d), zf_receiver(channels.H_u)
    if strategy == "ONB_ZF":
        return onb_zf_basis(channels.H_d), zf_sic_receivers(channels.H_u)
    if strategy == "IZF":
        return onb_zf_pca_basis(channels.H_d, channels.G_aa, delta), zf_sic_receivers(channels.H_u)
    if strategy == "MRT_MRC":
        return mrt_basis(channels.H_d), mrc_receiver(channels.H_u)
    raise ValueError(f"unknown strategy {strategy!r}")


@dataclass
class SubproblemData:
    """Constants of the convexified subproblem for one basis/receiver pair."""

    channels: ChannelSet
    basis: PrecoderBasis
    receivers: ReceiverSet
    power: PowerModelParams
    p_ap_max: np.ndarray
    p_ue_max: np.ndarray
    lambda_min_d: np.ndarray
    lambda_min_u: np.ndarray
    mu: np.ndarray
    alpha: np.ndarray | None
    epsilon: float
    # derived
    s_omega: np.ndarray = None
    s_p: np.ndarray = None
    dl_int: np.ndarray = None      # (K, K + L): normalized interference on psi_d
    ul_int: np.ndarray = None      # (L, L + K): normalized interference on psi_u
    bn2: np.ndarray = None         # (M, K): ||b_km||^2
    share: np.ndarray = None       # (M, K): |h_km b_km|^2
    gain: np.ndarray = None        # (K,): |h_k b_k|^2
    p_ref: float = 1.0             # power normalization of xi and phi

    def __post_init__(self):
        c = sinr_coefficients(self.basis, self.receivers, self.channels)
        if np.any(c.dl_gain <= 0) or np.any(c.ul_gain <= 0):
            raise SingularChannelError("a basis column or receiver has zero effective gain")
        self.gain = c.dl_gain
        self.s_omega = c.dl_noise / c.dl_gain
        self.s_p = c.ul_noise / c.ul_gain
        self.dl_int = np.hstack([c.dl_mui * self.s_omega[None, :], c.dl_cci * self.s_p[None, :]]) \
            / c.dl_noise[:, None]
        self.ul_int = np.hstack([c.ul_mui * self.s_p[None, :], c.ul_iai * self.s_omega[None, :]]) \
            / c.ul_noise[:, None]
        B = self.basis.basis
        Nm = self.channels.antennas_per_ap
        self.bn2 = block_sq_norms(B, Nm, axis=0)
        prod = self.channels.H_d.T * B
        self.share = np.abs(np.add.reduceat(prod, _ap_index(Nm)[:-1], axis=0)) ** 2

    @property
    def K(self) -> int:
        return self.channels.n_dl

    @property
    def L(self) -> int:
        return self.channels.n_ul

    def psi_tight(self, x, y):
        z = np.concatenate([x, y])
        zu = np.concatenate([y, x])
        return 1.0 + self.dl_int @ z, 1.0 + self.ul_int @ zu

    def power_affine(self, x0, lam0):
        """Linear upper model of the total power around ``(x0, lam0)``.

        Returns coefficients on (x, y, lambda), a constant (Watts), and the
        baseband pieces ``(slope_lin, slope_tan, const_tan)``: the soft
        association cost of UE k is ``max(slope_lin x, slope_tan x + const_tan)``.
        The first piece freezes the ratio denominator at ``x0``; the second is
        the tangent of the exact ratio, which keeps the model above it.
        """
        pw = self.power
        mu = self.mu
        K, L = self.K, self.L
        cx = self.s_omega * (mu @ self.bn2) / pw.nu_ap
        const = 0.0
        if self.alpha is None:
            c = pw.p_base_dl * self.s_omega * (mu @ self.share)
            den = x0 * self.s_omega * self.gain + self.epsilon
            slope_tan = c * self.epsilon / den ** 2
            bb = (c / den, slope_tan, c * x0 / den - slope_tan * x0)
        else:
            const += pw.p_base_dl * float(np.sum(mu[None, :] * self.alpha))
            bb = None
        cy = self.s_p / pw.nu_ue
        c_bh = pw.bandwidth * pw.p_bh / LN2
        cl = c_bh / (1.0 + lam0)
        const += c_bh * float(np.sum(np.log1p(lam0) - lam0 / (1.0 + lam0)))
        const += L * pw.p_base_ul * float(np.sum(mu))
        const += circuit_power(mu, K, L, pw)
        return cx, cy, cl, const, bb

    def power_value(self, x, y, lam, x0, lam0) -> float:
        cx, cy, cl, const, bb = self.power_affine(x0, lam0)
        val = float(cx @ x + cy @ y + cl @ lam + const)
        if bb is not None:
            val += float(np.sum(np.maximum(bb[0] * x, bb[1] * x + bb[2])))
        return val


def _to_internal(it: AllocationIterate, d: SubproblemData):
    return it.omega / d.s_omega, it.p / d.s_p


def _iterate_from(d: SubproblemData, x, y, lam_d, lam_u, psi_d, psi_u, xi=1.0, phi=1.0, t=0.0):
    return AllocationIterate(omega=x * d.s_omega, p=y * d.s_p, lambda_d=lam_d, lambda_u=lam_u,
                             psi_d=psi_d, psi_u=psi_u, xi=xi, phi=phi, t=t)


class _Vars:
    """Variable index arrays plus the scale of each group.

    Every group is expressed relative to its value at the expansion point so
    that all rows of the conic program are O(1) regardless of the SNR spread.
    """


def _scales(it: AllocationIterate, d: SubproblemData):
    x0, y0 = _to_internal(it, d)
    tiny = 1e-9
    sx = np.maximum(x0, tiny * max(float(np.max(x0, initial=0.0)), 1.0))
    sy = np.maximum(y0, tiny * max(float(np.max(y0, initial=0.0)), 1.0))
    lam0 = np.concatenate([it.lambda_d, it.lambda_u])
    lmin = np.concatenate([d.lambda_min_d, d.lambda_min_u])
    sl = np.maximum(np.maximum(lam0, lmin), 1e-3)
    return sx, sy, sl, x0, y0


def _core_program(it: AllocationIterate, d: SubproblemData):
    """Variables and constraints shared by the main and initialization subproblems."""
    K, L = d.K, d.L
    sx, sy, sl, x0, y0 = _scales(it, d)
    prog = conic.ConicProgram()
    v = _Vars()
    v.sx, v.sy, v.sld, v.slu = sx, sy, sl[:K], sl[K:]
    v.spd, v.spu = np.asarray(it.psi_d, float), np.asarray(it.psi_u, float)
    v.x = prog.add_variables(K, lb=0.0, name="x")
    v.y = prog.add_variables(L, lb=0.0, ub=d.p_ue_max / d.s_p / sy, name="y")
    v.rd = prog.add_variables(K, lb=0.0, name="rd")
    v.ru = prog.add_variables(L, lb=0.0, name="ru")
    v.psd = prog.add_variables(K, lb=1.0 / v.spd, name="psi_d")
    v.psu = prog.add_variables(L, lb=1.0 / v.spu, name="psi_u")
    v.ld = prog.add_variables(K, lb=0.0, name="lambda_d")
    v.lu = prog.add_variables(L, lb=0.0, name="lambda_u")

    # per-AP power budgets
    for m in range(len(d.mu)):
        coef = d.s_omega * d.bn2[m] * sx
        prog.add_le(conic.affine((v.x, coef / d.p_ap_max[m])), 1.0)
    # r <= sqrt(x) in scaled units:  ||[2r, x - 1]|| <= x + 1
    for r, xx in zip(np.concatenate([v.rd, v.ru]), np.concatenate([v.x, v.y])):
        prog.add_soc(conic.affine({xx: 1.0}, 1.0),
                     [conic.affine({r: 2.0}), conic.affine({xx: 1.0}, -1.0)])
    # psi >= 1 + normalized interference, each row divided by psi0
    zd = np.concatenate([v.x, v.y])
    zu = np.concatenate([v.y, v.x])
    scd = np.concatenate([sx, sy])
    scu = np.concatenate([sy, sx])
    for k in range(K):
        prog.add_le(conic.affine((np.append(zd, v.psd[k]),
                                  np.append(d.dl_int[k] * scd, -v.spd[k]) / v.spd[k]),
                                 1.0 / v.spd[k]), 0.0)
    for l in range(L):
        prog.add_le(conic.affine((np.append(zu, v.psu[l]),
                                  np.append(d.ul_int[l] * scu, -v.spu[l]) / v.spu[l]),
                                 1.0 / v.spu[l]), 0.0)
    # soft SINR below the fractional minorant at (sqrt(x0), psi0); divided by x0/psi0
    for lam, r, psi, xs, x_0, p0, sl_ in ((v.ld, v.rd, v.psd, sx, x0, v.spd, v.sld),
                                           (v.lu, v.ru, v.psu, sy, y0, v.spu, v.slu)):
        for j in range(lam.size):
            g0 = x_0[j] / p0[j]
            c_r = 2 * np.sqrt(x_0[j] * xs[j]) / p0[j]
            c_p = x_0[j] / p0[j]
            prog.add_le(conic.affine(([lam[j], r[j], psi[j]],
                                      np.array([sl_[j], -c_r, c_p]) / max(g0, 1e-300))), 0.0)
    return prog, v, x0


def build_subproblem(it: AllocationIterate, t: float, eta: int, d: SubproblemData):
    """Convex subproblem around ``it`` with Dinkelbach parameter ``t``.

    Returns
    -------
    prog : ConicProgram
    v : object holding the variable index arrays and their scales
    """
    prog, v, x0 = _core_program(it, d)
    K, L = d.K, d.L
    for j in range(K):
        prog.lb[v.ld[j]] = max(prog.lb[v.ld[j]], float(d.lambda_min_d[j] / v.sld[j]))
    for j in range(L):
        prog.lb[v.lu[j]] = max(prog.lb[v.lu[j]], float(d.lambda_min_u[j] / v.slu[j]))
    v.s = prog.add_variables(K + L, name="s")
    lam = np.concatenate([v.ld, v.lu])
    sl = np.concatenate([v.sld, v.slu])
    for s, l, c in zip(v.s, lam, sl):
        # log(1 + c l) = log(c) + log(l + 1/c) keeps the cone entries O(1)
        prog.add_log_hypograph(conic.affine({s: 1.0}, -np.log(c)), conic.affine({l: 1.0}, 1.0 / c))
    obj_idx, obj_coef = list(v.s), [1.0] * (K + L)
    if eta == 0:
        v.xi = prog.add_variables(1, lb=0.0, name="xi")[0]
        v.phi = prog.add_variables(1, lb=0.0, name="phi")[0]
        lam0 = np.concatenate([it.lambda_d, it.lambda_u])
        cx, cy, cl, const, bb = d.power_affine(x0, lam0)
        pref = d.p_ref
        xi0 = it.xi
        idx = [v.x, v.y, lam, [v.xi]]
        coef = [cx * v.sx, cy * v.sy, cl * sl, [-2 * xi0 * pref]]
        if bb is not None:
            v.z = prog.add_variables(K, name="baseband")
            zs = np.maximum(bb[0] * x0, 1e-300)
            for k in range(K):
                prog.add_le(conic.affine(([v.x[k], v.z[k]], [bb[0][k] * v.sx[k] / zs[k], -1.0])), 0.0)
                prog.add_le(conic.affine(([v.x[k], v.z[k]], [bb[1][k] * v.sx[k] / zs[k], -1.0]),
                                         bb[2][k] / zs[k]), 0.0)
            idx.append(v.z)
            coef.append(zs)
        # P / pref <= 2 xi0 xi - xi0^2
        prog.add_le(conic.affine((np.concatenate(idx), np.concatenate(coef) / pref),
                                 const / pref + xi0 ** 2), 0.0)
        # xi^2 <= phi  <=>  ||[2 xi, phi - 1]|| <= phi + 1
        prog.add_soc(conic.affine({v.phi: 1.0}, 1.0),
                     [conic.affine({v.xi: 2.0}), conic.affine({v.phi: 1.0}, -1.0)])
        obj_idx.append(v.phi)
        obj_coef.append(-t)
    prog.set_objective(conic.affine((obj_idx, obj_coef)))
    return prog, v


def _extract(sol, v, d: SubproblemData, eta: int) -> AllocationIterate:
    X = sol.x
    x = np.maximum(X[v.x], 0.0) * v.sx
    y = np.minimum(np.maximum(X[v.y], 0.0) * v.sy, d.p_ue_max / d.s_p)
    it = _iterate_from(d, x, y, np.maximum(X[v.ld], 0.0) * v.sld,
                       np.maximum(X[v.lu], 0.0) * v.slu,
                       np.maximum(X[v.psd] * v.spd, 1.0), np.maximum(X[v.psu] * v.spu, 1.0))
    if eta == 0:
        it.xi = float(X[v.xi])
        it.phi = float(X[v.phi])
    return it


def _soft_se(it: AllocationIterate) -> float:
    return float(np.sum(np.log1p(it.lambda_d)) + np.sum(np.log1p(it.lambda_u)))


def _starting_point(d: SubproblemData) -> AllocationIterate:
    """Uniform DL split that respects every per-AP budget and half UL power."""
    load = d.bn2.sum(axis=1)
    active = load > 0
    omega = np.min(d.p_ap_max[active] / (2 * load[active])) if np.any(active) else 0.0
    x = np.full(d.K, omega) / d.s_omega
    y = 0.5 * d.p_ue_max / d.s_p
    psi_d, psi_u = d.psi_tight(x, y)
    return _iterate_from(d, x, y, x / psi_d, y / psi_u, psi_d, psi_u)


def find_initial_point(d: SubproblemData, config: OptimizerConfig):
    """Drive the QoS slacks to zero by successive convex programs.

    The slack of each soft SINR is measured relative to its threshold,
    ``min(lambda_j - lambda_min_j, 0) / max(lambda_min_j, 1e-3)``, so the
    programs stay well scaled even for very demanding rate targets.

    Returns
    -------
    iterate : AllocationIterate
    theta_trace : list of float

    Raises
    ------
    InfeasibleProblem
        When the total slack stagnates below ``-init_tol``.
    """
    # psi >= 1, so no soft SINR can beat the interference-free SNR at full budget
    with np.errstate(divide="ignore"):
        x_cap = np.min(d.p_ap_max[:, None] / (d.s_omega[None, :] * d.bn2), axis=0)
    y_cap = d.p_ue_max / d.s_p
    if np.any(d.lambda_min_d > x_cap) or np.any(d.lambda_min_u > y_cap):
        raise InfeasibleProblem("a QoS threshold exceeds the interference-free SNR cap")
    it = _starting_point(d)
    lmin = np.concatenate([d.lambda_min_d, d.lambda_min_u])
    wt = 1.0 / np.maximum(lmin, 1e-3)
    theta = float(np.sum(wt * np.minimum(np.concatenate([it.lambda_d, it.lambda_u]) - lmin, 0.0)))
    trace = [theta]
    K, L = d.K, d.L
    for _ in range(config.init_max_iters):
        if theta >= -config.init_tol:
            break
        prog, v, _ = _core_program(it, d)
        th = prog.add_variables(K + L, ub=0.0, name="theta")
        lam = np.concatenate([v.ld, v.lu])
        sl = np.concatenate([v.sld, v.slu])
        for j in range(K + L):
            prog.add_le(conic.affine(([th[j], lam[j]], [1.0, -wt[j] * sl[j]]), wt[j] * lmin[j]), 0.0)
        prog.set_objective(conic.affine((th, np.ones(K + L))))
        sol = conic.solve(prog, config.tolerances).raise_for_status()
        it = _extract(sol, v, d, eta=1)
        new = float(np.sum(sol.x[th]))
        trace.append(new)
        if new - theta <= 1e-6 * max(1.0, abs(theta)) and new < -config.init_tol:
            raise InfeasibleProblem(f"QoS slack stalled at {new:.3g}")
        theta = new
    if theta < -config.init_tol:
        raise InfeasibleProblem(f"QoS slack {theta:.3g} after {config.init_max_iters} iterations")
    # tighten psi and lambda at the found point
    x, y = _to_internal(it, d)
    it.psi_d, it.psi_u = d.psi_tight(x, y)
    it.lambda_d, it.lambda_u = x / it.psi_d, y / it.psi_u
    return it, trace


def _run_phase(d: SubproblemData, config: OptimizerConfig):
    """ICA/Dinkelbach loop from a fresh feasible point."""
    it, theta_trace = find_initial_point(d, config)
    eta = config.eta
    x0, _ = _to_internal(it, d)
    lam0 = np.concatenate([it.lambda_d, it.lambda_u])
    p0 = d.power_value(x0, _to_internal(it, d)[1], lam0, x0, lam0)
    d.p_ref = p0
    if eta == 0:
        it.xi, it.phi = 1.0, 1.0
    f = _soft_se(it)
    t = f / it.phi if eta == 0 else 0.0
    trace = [f / it.phi]
    gaps = []
    converged, status = False, "optimal"
    n_iter = 0
    for n_iter in range(1, config.max_iters + 1):
        prog, v = build_subproblem(it, t, eta, d)
        sol = conic.solve(prog, config.tolerances)
        if sol.status != conic.OPTIMAL:
            status = sol.status
            n_iter -= 1
            break
        new = _extract(sol, v, d, eta)
        f_new = _soft_se(new)
        gap = f_new - t * new.phi if eta == 0 else 0.0
        val = f_new / new.phi if eta == 0 else f_new
        gaps.append(gap)
        prev = trace[-1]
        trace.append(val)
        new.t = val
        it = new
        t = val if eta == 0 else 0.0
        small_step = abs(val - prev) <= config.rel_tol * max(abs(prev), 1e-12)
        small_gap = abs(gap) <= config.dinkelbach_tol * max(1.0, abs(val))
        if small_step and small_gap:
            converged = True
            break
    return it, {"trace": trace, "theta": theta_trace, "gaps": gaps, "iterations": n_iter,
                "converged": converged, "status": status, "p_ref": d.p_ref}


def _embed_rows(X, keep_ant, N, axis):
    if axis == 0:
        out = np.zeros((N,) + X.shape[1:], dtype=complex)
        out[keep_ant] = X
    else:
        out = np.zeros(X.shape[:1] + (N,), dtype=complex)
        out[:, keep_ant] = X
    return out


def _default_epsilon(channels: ChannelSet, p_ap_max) -> float:
    return 1e-12 * float(np.max(p_ap_max)) * float(np.max(np.sum(np.abs(channels.H_d) ** 2, axis=1)))


def _zero_result(channels: ChannelSet, config: OptimizerConfig, mu) -> SolveResult:
    K, L, M, N = channels.n_dl, channels.n_ul, channels.n_aps, channels.n_antennas
    alpha = np.zeros((K, M), dtype=int)
    pt = total_power(np.zeros((N, K)), np.zeros(L), alpha, mu, 0.0, config.power,
                     channels.antennas_per_ap)
    return SolveResult(status="optimal", omega=np.zeros(K), p=np.zeros(L), W=np.zeros((N, K)),
                       binary=BinaryState(alpha, np.asarray(mu, dtype=int)), se=0.0, ee=0.0,
                       p_total=pt, objective=0.0, converged=True,
                       sinr_dl=np.zeros(K), sinr_ul=np.zeros(L))


def solve_se_ee(channels: ChannelSet, strategy: str | Callable = "IZF",
                config: OptimizerConfig | None = None) -> SolveResult:
    """Two-phase SE/EE maximization.

    Phase 1 optimizes the weights with every AP on, then recovers the
    association and AP activity from per-AP signal-power ratios. Phase 2
    rebuilds the basis on the active APs with association fixed and
    re-optimizes. The returned SE/EE are evaluated with the general SINR
    expressions on the final precoder.

    Parameters
    ----------
    channels : ChannelSet
    strategy : str or callable
        One of ``STRATEGIES``, or ``f(channels) -> (PrecoderBasis, ReceiverSet)``.
    config : OptimizerConfig, optional

    Returns
    -------
    SolveResult
        ``status`` is ``"optimal"``, ``"infeasible"`` or a solver failure code.
    """
    config = config or OptimizerConfig()
    start = time.perf_counter()
    M, K, L, N = channels.n_aps, channels.n_dl, channels.n_ul, channels.n_antennas
    builder = strategy if callable(strategy) else (
        lambda ch: build_strategy(ch, strategy, config.delta_pca))
    varpi = config.varpi if config.varpi is not None else 1e-3 / M
    p_ap = np.broadcast_to(np.asarray(config.p_ap_max, dtype=float), (M,)).copy()
    p_ue = np.broadcast_to(np.asarray(config.p_ue_max, dtype=float), (L,)).copy()
    eps = config.epsilon_rsp if config.epsilon_rsp is not None else _default_epsilon(channels, p_ap)
    lmin_d = np.full(K, np.expm1(config.rate_dl))
    lmin_u = np.full(L, np.expm1(config.rate_ul))

    def finish(res: SolveResult) -> SolveResult:
        res.varpi, res.epsilon = varpi, eps
        res.wall_time = time.perf_counter() - start
        return res

    def phase(ch, mu, alpha):
        basis, recv = builder(ch)
        keep = np.asarray(mu, dtype=bool)
        d = SubproblemData(ch, basis, recv, config.power, p_ap[keep], p_ue, lmin_d, lmin_u,
                           np.ones(int(keep.sum())), alpha if alpha is None else alpha[:, keep],
                           eps)
        it, info = _run_phase(d, config)
        return d, it, info

    if config.fixed_mu is not None:
        mu_star = np.asarray(config.fixed_mu, dtype=int)
        if not np.any(mu_star):
            return finish(_zero_result(channels, config, mu_star))
        alpha_fixed = None
        info1 = {}
    else:
        try:
            d1, it1, info1 = phase(channels, np.ones(M, dtype=int), None)
        except InfeasibleProblem as err:
            return finish(SolveResult(status="infeasible", phase1={"reason": str(err)}))
        except (SingularChannelError, conic.ConicSolveError) as err:
            return finish(SolveResult(status="numerical_failure", phase1={"reason": str(err)}))
        W1 = d1.basis.weights_to_precoder(it1.omega)
        alpha_star = recover_alpha(W1, channels, varpi, eps)
        eps_ul = 1e-12 * float(np.max(p_ue)) * float(np.max(
            np.sum(np.abs(d1.receivers.rows) ** 2, axis=1) * np.sum(np.abs(channels.H_u) ** 2, axis=0)))
        mu_star = update_mu(W1, it1.p, d1.receivers, channels, varpi, eps, eps_ul)
        if not config.ap_selection:
            mu_star = np.ones(M, dtype=int)
        alpha_fixed = alpha_star * mu_star[None, :]
        info1["alpha"], info1["mu"] = alpha_star, mu_star
        if not np.any(mu_star):
            return finish(_zero_result(channels, config, mu_star))

    keep = mu_star.astype(bool)
    ch2 = channels.restrict_aps(keep)
    fallback = False
    try:
        d2, it2, info2 = phase(ch2, mu_star, alpha_fixed)
    except (InfeasibleProblem, SingularChannelError, conic.ConicSolveError) as err:
        if config.fixed_mu is not None:
            status = "infeasible" if isinstance(err, InfeasibleProblem) else "numerical_failure"
            return finish(SolveResult(status=status, phase1={"reason": str(err)}))
        # keep every AP on and reuse the phase-1 allocation
        fallback = True
        mu_star = np.ones(M, dtype=int)
        keep = mu_star.astype(bool)
        ch2, d2, it2, info2 = channels, d1, it1, dict(info1, status=info1["status"])

    ant_keep = np.concatenate([np.arange(s.start, s.stop)
                               for s, k in zip(channels.ap_slices(), keep) if k]).astype(int)
    W = _embed_rows(d2.basis.weights_to_precoder(it2.omega), ant_keep, N, axis=0)
    A = _embed_rows(d2.receivers.rows, ant_keep, N, axis=1)
    alpha = recover_alpha(W, channels, varpi, eps)
    recv = ReceiverSet(A, d2.receivers.label)
    # SINRs use the optimized precoder as is: zeroing the sub-threshold blocks
    # would undo the ZF nulling; alpha only drives the association cost
    full = np.ones((K, M))
    sinr_dl = dl_sinr_general(W, it2.p, full, channels)
    sinr_ul = ul_sinr_general(W, it2.p, full, recv, channels, sic=recv.label == "ZF_SIC")
    se = spectral_efficiency(sinr_dl, sinr_ul)
    pt = total_power(W, it2.p, alpha, mu_star, se, config.power, channels.antennas_per_ap)
    ee = config.power.bandwidth * se / pt
    objective = config.eta * se + (1 - config.eta) * se / pt
    trace = {"phase1": info1.get("trace", []), "phase2": info2["trace"]}
    gaps = {"phase1": info1.get("gaps", []), "phase2": info2["gaps"]}
    status = info2["status"] if info2["status"] != "optimal" else "optimal"
    return finish(SolveResult(
        status=status, omega=it2.omega, p=it2.p, W=W, receivers=A, receiver_label=recv.label,
        binary=BinaryState(alpha, mu_star), se=se, ee=ee, p_total=pt, objective=objective,
        sinr_dl=sinr_dl, sinr_ul=sinr_ul, trace=trace,
        iterations=info1.get("iterations", 0) + info2["iterations"],
        converged=bool(info2["converged"] and info1.get("converged", True)),
        dinkelbach_gap=gaps,
        phase1={k: v for k, v in info1.items() if k not in ("trace", "gaps")} | {"fallback": fallback}))
