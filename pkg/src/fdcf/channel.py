"""Network topology and channel generation for full-duplex cell-free MIMO.

Distances are in km, powers in Watts. Every random quantity is drawn from a
``numpy.random.Generator`` seeded explicitly, so a (seed, config) pair always
reproduces the same realization.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MIN_DISTANCE_KM = 1e-3


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbm_to_watt(x_dbm):
    """Convert dBm to Watts."""
    return 10.0 ** ((np.asarray(x_dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(x_w):
    return 10.0 * np.log10(np.asarray(x_w, dtype=float)) + 30.0


@dataclass(frozen=True)
class Topology:
    """Positions of APs and UEs inside a disc.

    Attributes
    ----------
    ap_positions : ndarray, shape (M, 2)
    dl_positions : ndarray, shape (K, 2)
    ul_positions : ndarray, shape (L, 2)
    radius : float
        Disc radius in km.
    antennas_per_ap : tuple of int
        Number of antennas ``N_m`` at each AP.
    """

    ap_positions: np.ndarray
    dl_positions: np.ndarray
    ul_positions: np.ndarray
    radius: float
    antennas_per_ap: tuple

    def __post_init__(self):
        M, K, L = self.n_aps, self.n_dl, self.n_ul
        if min(M, K, L) < 1:
            raise ValueError("M, K and L must all be at least 1")
        if len(self.antennas_per_ap) != M or min(self.antennas_per_ap) < 1:
            raise ValueError("antennas_per_ap must hold one positive integer per AP")
        if self.n_antennas <= max(K, L):
            raise ValueError(
                f"total antennas N={self.n_antennas} must exceed max(K, L)={max(K, L)}")
        tol = 1e-12 * max(self.radius, 1.0)
        for pts in (self.ap_positions, self.dl_positions, self.ul_positions):
            if np.any(np.hypot(pts[:, 0], pts[:, 1]) > self.radius + tol):
                raise ValueError("all points must lie inside the disc")

    @property
    def n_aps(self) -> int:
        return len(self.ap_positions)

    @property
    def n_dl(self) -> int:
        return len(self.dl_positions)

    @property
    def n_ul(self) -> int:
        return len(self.ul_positions)

    @property
    def n_antennas(self) -> int:
        return int(sum(self.antennas_per_ap))

    @property
    def antenna_offsets(self) -> np.ndarray:
        """Start index of each AP's antenna block (length M + 1)."""
        return np.concatenate([[0], np.cumsum(self.antennas_per_ap)]).astype(int)


@dataclass(frozen=True)
class FadingParams:
    """Large- and small-scale fading parameters.

    ``rho_rsi`` is linear; the default corresponds to -110 dB.
    """

    d0: float = 0.01
    d1: float = 0.05
    sigma_sh: float = 8.0
    rician_factor_db: float = 5.0
    rho_rsi: float = 1e-11
    si_gain: float = 1.0

    def __post_init__(self):
        if not 0 < self.d0 < self.d1:
            raise ValueError("require 0 < d0 < d1")
        if not 0 <= self.rho_rsi < 1:
            raise ValueError("rho_rsi must lie in [0, 1)")


@dataclass(frozen=True)
class ChannelSet:
    """All channel matrices of one network realization.

    Attributes
    ----------
    H_d : complex ndarray, shape (K, N)
        Row k is the DL channel of UE k to all antennas.
    H_u : complex ndarray, shape (N, L)
        Column l is the UL channel of UE l.
    G_aa : complex ndarray, shape (N, N)
        Block (m, m') is the AP m' -> AP m channel; diagonal blocks hold the
        residual SI channels already scaled by ``sqrt(rho_rsi)``.
    G_cci : complex ndarray, shape (K, L)
        UL-UE to DL-UE interference channels.
    beta_d, beta_u, beta_cci, beta_aa : ndarray
        Large-scale gains of shape (K, M), (M, L), (K, L), (M, M).
    noise_dl : ndarray, shape (K,)
        DL UE noise powers in Watts.
    noise_ap : float
        AP noise power in Watts.
    antennas_per_ap : tuple of int
    """

    H_d: np.ndarray
    H_u: np.ndarray
    G_aa: np.ndarray
    G_cci: np.ndarray
    beta_d: np.ndarray
    beta_u: np.ndarray
    beta_cci: np.ndarray
    beta_aa: np.ndarray
    noise_dl: np.ndarray
    noise_ap: float
    antennas_per_ap: tuple = field(default=())

    @property
    def n_dl(self) -> int:
        return self.H_d.shape[0]

    @property
    def n_ul(self) -> int:
        return self.H_u.shape[1]

    @property
    def n_antennas(self) -> int:
        return self.H_d.shape[1]

    @property
    def n_aps(self) -> int:
        return len(self.antennas_per_ap)

    @property
    def antenna_offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.antennas_per_ap)]).astype(int)

    def ap_slices(self) -> list:
        off = self.antenna_offsets
        return [slice(off[m], off[m + 1]) for m in range(self.n_aps)]

    def restrict_aps(self, keep) -> "ChannelSet":
        """Return the channels seen by the APs flagged in ``keep``."""
        keep = np.asarray(keep, dtype=bool)
        sl = self.ap_slices()
        idx = np.concatenate([np.arange(sl[m].start, sl[m].stop)
                              for m in range(self.n_aps) if keep[m]]).astype(int)
        return ChannelSet(
            H_d=self.H_d[:, idx], H_u=self.H_u[idx, :],
            G_aa=self.G_aa[np.ix_(idx, idx)], G_cci=self.G_cci,
            beta_d=self.beta_d[:, keep], beta_u=self.beta_u[keep, :],
            beta_cci=self.beta_cci, beta_aa=self.beta_aa[np.ix_(keep, keep)],
            noise_dl=self.noise_dl, noise_ap=self.noise_ap,
            antennas_per_ap=tuple(n for n, k in zip(self.antennas_per_ap, keep) if k))

    def without_duplex_interference(self) -> "ChannelSet":
        """Copy with CCI, RSI and IAI removed (half-duplex operation)."""
        return ChannelSet(
            H_d=self.H_d, H_u=self.H_u, G_aa=np.zeros_like(self.G_aa),
            G_cci=np.zeros_like(self.G_cci), beta_d=self.beta_d, beta_u=self.beta_u,
            beta_cci=self.beta_cci, beta_aa=self.beta_aa, noise_dl=self.noise_dl,
            noise_ap=self.noise_ap, antennas_per_ap=self.antennas_per_ap)


def _uniform_disc(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    r = radius * np.sqrt(rng.uniform(size=n))
    theta = rng.uniform(0.0, 2 * np.pi, size=n)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def generate_topology(seed, M: int, K: int, L: int, radius: float = 1.0,
                      antennas: int | Sequence[int] = 2) -> Topology:
    """Drop M APs, K DL UEs and L UL UEs uniformly in a disc.

    Parameters
    ----------
    seed : int or numpy.random.SeedSequence
    M, K, L : int
        Numbers of APs, DL UEs and UL UEs.
    radius : float
        Disc radius in km.
    antennas : int or sequence of int
        Antennas per AP; a scalar applies to every AP.
    """
    if min(M, K, L) < 1:
        raise ValueError("M, K and L must all be at least 1")
    if radius <= 0:
        raise ValueError("radius must be positive")
    if np.isscalar(antennas):
        antennas = [int(antennas)] * M
    rng = np.random.default_rng(seed)
    aps = _uniform_disc(rng, M, radius)
    dl = _uniform_disc(rng, K, radius)
    ul = _uniform_disc(rng, L, radius)
    return Topology(aps, dl, ul, float(radius), tuple(int(n) for n in antennas))


def path_loss_db(d, d0: float = 0.01, d1: float = 0.05):
    """Three-slope path loss in dB for distance ``d`` in km.

    The slope indicator for breakpoint ``d_i`` is 1 for ``d < d_i`` and 0
    otherwise, so the function is continuous at both breakpoints.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    c0 = (d < d0).astype(float)
    c1 = (d < d1).astype(float)
    pl = (-140.7 - 35.0 * np.log10(d) + 20.0 * c0 * np.log10(d / d0)
          + 15.0 * c1 * np.log10(d / d1))
    return pl if pl.ndim else float(pl)


def large_scale_fading(pl_db, z, sigma_sh: float = 8.0):
    """Linear large-scale gain with log-normal shadowing."""
    return 10.0 ** ((np.asarray(pl_db, dtype=float) + sigma_sh * np.asarray(z, dtype=float)) / 10.0)


def crandn(rng: np.random.Generator, *shape) -> np.ndarray:
    """Unit-variance circularly-symmetric complex normal samples."""
    return rng.normal(0.0, np.sqrt(0.5), shape) + 1j * rng.normal(0.0, np.sqrt(0.5), shape)


def _distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    return np.maximum(d, MIN_DISTANCE_KM)


def _rician(rng: np.random.Generator, n_rows: int, n_cols: int, k_factor: float) -> np.ndarray:
    los = np.sqrt(k_factor / (k_factor + 1.0)) * np.ones((n_rows, n_cols))
    return los + np.sqrt(1.0 / (k_factor + 1.0)) * crandn(rng, n_rows, n_cols)


def assemble_channels(topology: Topology, params: FadingParams | None = None, seed=0,
                      noise_w: float = dbm_to_watt(-104.0)) -> ChannelSet:
    """Draw every channel of one realization.

    Parameters
    ----------
    topology : Topology
    params : FadingParams, optional
    seed : int or numpy.random.SeedSequence
    noise_w : float
        Noise power at APs and DL UEs in Watts.

    Returns
    -------
    ChannelSet
    """
    params = params or FadingParams()
    rng = np.random.default_rng(seed)
    M, K, L = topology.n_aps, topology.n_dl, topology.n_ul
    Nm = np.asarray(topology.antennas_per_ap)
    off = topology.antenna_offsets
    N = int(off[-1])

    def beta(a, b, symmetric=False):
        pl = path_loss_db(_distances(a, b), params.d0, params.d1)
        z = rng.standard_normal(pl.shape)
        if symmetric:
            z = np.triu(z, 1)
            z = z + z.T
        return large_scale_fading(pl, z, params.sigma_sh)

    beta_d = beta(topology.dl_positions, topology.ap_positions)
    beta_u = beta(topology.ap_positions, topology.ul_positions)
    beta_cci = beta(topology.dl_positions, topology.ul_positions)
    beta_aa = beta(topology.ap_positions, topology.ap_positions, symmetric=True)
    np.fill_diagonal(beta_aa, params.si_gain)

    ant_ap = np.repeat(np.arange(M), Nm)
    H_d = np.sqrt(beta_d[:, ant_ap]) * crandn(rng, K, N)
    H_u = np.sqrt(beta_u[ant_ap, :]) * crandn(rng, N, L)
    G_cci = np.sqrt(beta_cci) * crandn(rng, K, L)
    G_aa = np.sqrt(beta_aa[np.ix_(ant_ap, ant_ap)]) * crandn(rng, N, N)
    kf = float(db_to_linear(params.rician_factor_db))
    for m in range(M):
        blk = slice(off[m], off[m + 1])
        G_aa[blk, blk] = (np.sqrt(params.rho_rsi * beta_aa[m, m])
                          * _rician(rng, Nm[m], Nm[m], kf))

    return ChannelSet(
        H_d=H_d, H_u=H_u, G_aa=G_aa, G_cci=G_cci, beta_d=beta_d, beta_u=beta_u,
        beta_cci=beta_cci, beta_aa=beta_aa, noise_dl=np.full(K, float(noise_w)),
        noise_ap=float(noise_w), antennas_per_ap=tuple(int(n) for n in Nm))
