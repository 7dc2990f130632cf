"""SINR, spectral-efficiency, power-consumption and energy-efficiency evaluation.

SE is in nats/s/Hz throughout; conversion to bits happens only when results
are reported.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet
from .precoding import PrecoderBasis, ReceiverSet, block_sq_norms

LN2 = np.log(2.0)


@dataclass(frozen=True)
class PowerModelParams:
    """Power-consumption model constants (Watts unless noted).

    ``p_bh`` is the backhaul power per bit/s of traffic.
    """

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
    bandwidth: float = 10e6

    def __post_init__(self):
        vals = [self.nu_ap, self.nu_ue, self.bandwidth]
        if min(vals) <= 0 or self.nu_ap > 1 or self.nu_ue > 1:
            raise ValueError("efficiencies must lie in (0, 1] and bandwidth be positive")
        rest = [self.p_bh, self.p_base_dl, self.p_base_ul, self.p_active, self.p_sleep,
                self.p_ap_cir, self.p_dlue_cir, self.p_ulue_cir]
        if min(rest) < 0:
            raise ValueError("power constants must be nonnegative")
        if self.p_sleep > self.p_active:
            raise ValueError("sleep power cannot exceed active power")


@dataclass(frozen=True)
class QosThresholds:
    """Per-UE minimum rates in nats/s/Hz and training lengths in symbols."""

    r_dl: np.ndarray
    r_ul: np.ndarray
    tau_c: int = 200
    tau_t: int = 0

    def __post_init__(self):
        if np.any(np.asarray(self.r_dl) < 0) or np.any(np.asarray(self.r_ul) < 0):
            raise ValueError("rate thresholds must be nonnegative")
        if not 0 <= self.tau_t < self.tau_c:
            raise ValueError("require 0 <= tau_t < tau_c")

    @classmethod
    def uniform(cls, K: int, L: int, rate_nats: float, **kw) -> "QosThresholds":
        return cls(np.full(K, float(rate_nats)), np.full(L, float(rate_nats)), **kw)


def _masked(W: np.ndarray, alpha, antennas_per_ap) -> np.ndarray:
    ant_ap = np.repeat(np.arange(len(antennas_per_ap)), antennas_per_ap)
    return W * np.asarray(alpha, dtype=float).T[ant_ap, :]


def dl_sinr_general(W, p, alpha, channels: ChannelSet, coherent: bool = True) -> np.ndarray:
    """DL SINRs for an arbitrary precoder ``W`` (N x K) and association ``alpha``.

    With ``coherent=True`` the per-AP contributions to each UE add as complex
    amplitudes, as in the received-signal model. ``coherent=False`` sums the
    per-AP powers instead.
    """
    Nm = channels.antennas_per_ap
    We = _masked(np.asarray(W), alpha, Nm)
    p = np.asarray(p, dtype=float)
    cci = (np.abs(channels.G_cci) ** 2) @ p
    if coherent:
        C = np.abs(channels.H_d @ We) ** 2
    else:
        off = channels.antenna_offsets
        C = np.zeros((channels.n_dl, We.shape[1]))
        for m in range(channels.n_aps):
            s = slice(off[m], off[m + 1])
            C += np.abs(channels.H_d[:, s] @ We[s, :]) ** 2
    sig = np.diag(C).copy()
    mui = C.sum(axis=1) - sig
    return sig / (mui + cci + channels.noise_dl)


def ul_sinr_general(W, p, alpha, receivers, channels: ChannelSet, coherent: bool = True,
                    sic: bool = False) -> np.ndarray:
    """UL SINRs with the receive rows ``a_l`` (L x N).

    The IAI+RSI term collects the DL signals leaking into the AP receivers via
    ``G_aa``. ``sic=True`` drops the MUI of UEs decoded earlier.
    """
    A = receivers.rows if isinstance(receivers, ReceiverSet) else np.asarray(receivers)
    Nm = channels.antennas_per_ap
    We = _masked(np.asarray(W), alpha, Nm)
    p = np.asarray(p, dtype=float)
    L = channels.n_ul
    D = np.abs(A @ channels.H_u) ** 2 * p[None, :]
    sig = np.diag(D).copy()
    mask = np.triu(np.ones((L, L)), 1) if sic else 1.0 - np.eye(L)
    mui = (D * mask).sum(axis=1)
    if coherent:
        iai = (np.abs(A @ channels.G_aa @ We) ** 2).sum(axis=1)
    else:
        off = channels.antenna_offsets
        iai = np.zeros(L)
        for m in range(channels.n_aps):
            s = slice(off[m], off[m + 1])
            iai += (np.abs(A @ channels.G_aa[:, s] @ We[s, :]) ** 2).sum(axis=1)
    noise = channels.noise_ap * np.sum(np.abs(A) ** 2, axis=1)
    return sig / (mui + iai + noise)


@dataclass(frozen=True)
class SinrCoefficients:
    """Affine structure of the weight-reduced SINRs.

    DL: ``gamma_k = omega_k dl_gain_k / (dl_mui[k] @ omega + dl_cci[k] @ p + dl_noise_k)``.
    UL: ``gamma_l = p_l ul_gain_l / (ul_mui[l] @ p + ul_iai[l] @ omega + ul_noise_l)``.
    """

    dl_gain: np.ndarray
    dl_mui: np.ndarray
    dl_cci: np.ndarray
    dl_noise: np.ndarray
    ul_gain: np.ndarray
    ul_mui: np.ndarray
    ul_iai: np.ndarray
    ul_noise: np.ndarray


def sinr_coefficients(basis: PrecoderBasis | np.ndarray, receivers: ReceiverSet,
                      channels: ChannelSet) -> SinrCoefficients:
    B = basis.basis if isinstance(basis, PrecoderBasis) else np.asarray(basis)
    A = receivers.rows
    L = A.shape[0]
    C = np.abs(channels.H_d @ B) ** 2
    dl_gain = np.diag(C).copy()
    dl_mui = C - np.diag(dl_gain)
    D = np.abs(A @ channels.H_u) ** 2
    ul_gain = np.diag(D).copy()
    if receivers.label == "ZF_SIC":
        mask = np.triu(np.ones((L, L)), 1)
    else:
        mask = 1.0 - np.eye(L)
    return SinrCoefficients(
        dl_gain=dl_gain, dl_mui=dl_mui, dl_cci=np.abs(channels.G_cci) ** 2,
        dl_noise=np.asarray(channels.noise_dl, dtype=float),
        ul_gain=ul_gain, ul_mui=D * mask, ul_iai=np.abs(A @ channels.G_aa @ B) ** 2,
        ul_noise=channels.noise_ap * np.sum(np.abs(A) ** 2, axis=1))


def weighted_sinrs(basis, receivers: ReceiverSet, omega, p, channels: ChannelSet):
    """DL and UL SINRs when ``W = basis diag(sqrt(omega))``.

    Returns
    -------
    dl, ul : ndarray
    """
    c = sinr_coefficients(basis, receivers, channels)
    omega = np.asarray(omega, dtype=float)
    p = np.asarray(p, dtype=float)
    dl = omega * c.dl_gain / (c.dl_mui @ omega + c.dl_cci @ p + c.dl_noise)
    ul = p * c.ul_gain / (c.ul_mui @ p + c.ul_iai @ omega + c.ul_noise)
    return dl, ul


def spectral_efficiency(*sinrs) -> float:
    """Sum rate ``sum(log(1 + gamma))`` in nats/s/Hz."""
    return float(sum(np.sum(np.log1p(np.asarray(s, dtype=float))) for s in sinrs))


def _check_binary(x, name):
    x = np.asarray(x)
    if not np.all((x == 0) | (x == 1)):
        raise ValueError(f"{name} must be binary")
    return x.astype(float)


def total_power(W, p, alpha, mu, se: float, params: PowerModelParams,
                antennas_per_ap) -> float:
    """Total network power consumption in Watts.

    Parameters
    ----------
    W : ndarray, shape (N, K)
    p : ndarray, shape (L,)
    alpha : ndarray, shape (K, M), binary
    mu : ndarray, shape (M,), binary
    se : float
        Sum SE in nats/s/Hz feeding the load-dependent backhaul term.
    """
    alpha = _check_binary(alpha, "alpha")
    mu = _check_binary(mu, "mu")
    p = np.asarray(p, dtype=float)
    K, M = alpha.shape
    L = p.size
    w2 = block_sq_norms(np.asarray(W), antennas_per_ap, axis=0)  # (M, K)
    radiated = np.sum(mu * w2.sum(axis=1)) / params.nu_ap + np.sum(p) / params.nu_ue
    load = params.bandwidth * se / LN2 * params.p_bh
    baseband = np.sum(mu[None, :] * alpha) * params.p_base_dl + L * np.sum(mu) * params.p_base_ul
    return float(radiated + load + baseband + circuit_power(mu, K, L, params))


def circuit_power(mu, K: int, L: int, params: PowerModelParams) -> float:
    """Activity-dependent AP power plus fixed circuit power."""
    mu = np.asarray(mu, dtype=float)
    M = mu.size
    return float(np.sum(mu) * params.p_active + np.sum(1 - mu) * params.p_sleep
                 + M * params.p_ap_cir + K * params.p_dlue_cir + L * params.p_ulue_cir)


def energy_efficiency(se: float, p_total: float, bandwidth: float) -> float:
    """Throughput per Watt, ``B se / P_T`` (nats/Joule)."""
    if p_total <= 0:
        raise ValueError("total power must be positive")
    return float(bandwidth * se / p_total)


def effective_se_with_training(se: float, tau_c: int, tau_t: int) -> float:
    if not 0 <= tau_t < tau_c:
        raise ValueError("require 0 <= tau_t < tau_c")
    return (tau_c - tau_t) / tau_c * se


def robust_denominator_inflation(signal, interference_plus_noise, powers, error_variances):
    """SINRs with channel-estimation errors treated as extra noise.

    Parameters
    ----------
    signal, interference_plus_noise : ndarray, shape (U,)
    powers : ndarray, shape (J,)
        Transmit powers of the interfering/serving streams.
    error_variances : ndarray, shape (U, J)
        Estimation-error variance seen by receiver ``u`` for stream ``j``.
    """
    extra = np.asarray(error_variances, dtype=float) @ np.asarray(powers, dtype=float)
    return np.asarray(signal, dtype=float) / (np.asarray(interference_plus_noise, dtype=float) + extra)
