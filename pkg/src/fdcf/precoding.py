"""Precoder bases and receiver sets that reduce beamforming to scalar weights.

A basis is an ``N x K`` matrix whose column ``k`` fixes the beam direction of
DL UE ``k``; the actual precoder is ``W = basis @ diag(sqrt(omega))``. A
receiver set stacks one ``1 x N`` combiner per UL UE.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

COND_LIMIT = 1e8


class SingularChannelError(np.linalg.LinAlgError):
    """Raised when a channel matrix is too ill-conditioned to invert."""


@dataclass(frozen=True)
class PrecoderBasis:
    basis: np.ndarray
    label: str
    pca_rank: int = 0

    def weights_to_precoder(self, omega) -> np.ndarray:
        """Map DL weights to the precoder ``W = basis diag(sqrt(omega))``."""
        return self.basis * np.sqrt(np.asarray(omega, dtype=float))[None, :]


@dataclass(frozen=True)
class ReceiverSet:
    rows: np.ndarray
    label: str


def _check_cond(gram: np.ndarray, what: str) -> None:
    c = np.linalg.cond(gram)
    # cond of the Gram matrix is the square of the channel's
    if not np.isfinite(c) or c > COND_LIMIT ** 2:
        raise SingularChannelError(f"{what} is rank deficient (condition number {np.sqrt(c):.3g})")


def zf_precoder(H_d: np.ndarray) -> PrecoderBasis:
    """Zero-forcing basis ``H^H (H H^H)^{-1}``."""
    K, N = H_d.shape
    if K > N:
        raise ValueError("ZF needs K <= N")
    gram = H_d @ H_d.conj().T
    _check_cond(gram, "H_d")
    return PrecoderBasis(np.linalg.solve(gram, H_d).conj().T, "ZF")


def zf_receiver(H_u: np.ndarray) -> ReceiverSet:
    """Zero-forcing combiners ``(H^H H)^{-1} H^H``."""
    N, L = H_u.shape
    if L > N:
        raise ValueError("ZF needs L <= N")
    gram = H_u.conj().T @ H_u
    _check_cond(gram, "H_u")
    return ReceiverSet(np.linalg.solve(gram, H_u.conj().T), "ZF")


def mrt_basis(H_d: np.ndarray) -> PrecoderBasis:
    return PrecoderBasis(H_d.conj().T.copy(), "MRT")


def mrc_receiver(H_u: np.ndarray) -> ReceiverSet:
    return ReceiverSet(H_u.conj().T.copy(), "MRC")


def lq(H: np.ndarray):
    """Economy LQ factorization ``H = T Q`` with a positive real diagonal of T.

    Returns
    -------
    T : ndarray, shape (K, K), lower triangular
    Q : ndarray, shape (K, N), orthonormal rows
    """
    q, r = np.linalg.qr(H.conj().T, mode="reduced")
    d = np.diag(r)
    ph = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1.0), 1.0)
    q = q * ph[None, :]
    r = ph.conj()[:, None] * r
    return r.conj().T, q.conj().T


def ttilde_inverse(T: np.ndarray) -> np.ndarray:
    """Unit lower-triangular ``T~`` such that ``T @ T~`` is diagonal.

    Built column by column with the forward recursion
    ``T~[i, j] = -(1 / T[i, i]) * sum_{j'=j}^{i-1} T[i, j'] T~[j', j]``.
    """
    T = np.asarray(T)
    K = T.shape[0]
    diag = np.diag(T)
    if np.any(diag == 0):
        raise SingularChannelError("T has a zero diagonal entry")
    Tt = np.eye(K, dtype=np.result_type(T, float))
    for j in range(K):
        for i in range(j + 1, K):
            Tt[i, j] = -(T[i, j:i] @ Tt[j:i, j]) / T[i, i]
    return Tt


def _onb_from_lq(T: np.ndarray, Q: np.ndarray, tol: float) -> np.ndarray:
    d = np.abs(np.diag(T))
    bad = np.flatnonzero(d <= tol * max(d.max(initial=0.0), np.finfo(float).tiny))
    if bad.size:
        raise SingularChannelError(f"DL channel row {int(bad[0])} is (nearly) linearly dependent")
    return Q.conj().T @ ttilde_inverse(T)


def onb_zf_basis(H_d: np.ndarray) -> PrecoderBasis:
    """ZF basis built on the orthonormal rows of the LQ factor, ``Q^H T~``."""
    K, N = H_d.shape
    if K > N:
        raise ValueError("ONB-ZF needs K <= N")
    T, Q = lq(H_d)
    return PrecoderBasis(_onb_from_lq(T, Q, 1.0 / COND_LIMIT), "ONB_ZF")


def pca_rank(eigvals, delta: float) -> int:
    """Smallest n whose leading-eigenvalue energy share reaches ``delta``.

    ``eigvals`` must be sorted in decreasing order. The result is capped at
    ``N - 1``; an all-zero spectrum gives 0.
    """
    e = np.clip(np.asarray(eigvals, dtype=float), 0.0, None)
    N = e.size
    total = e.sum()
    if total <= 0:
        return 0
    frac = np.cumsum(e) / total
    hits = np.flatnonzero(frac[: max(N - 2, 0)] >= delta)
    return int(hits[0] + 1) if hits.size else max(N - 1, 0)


def onb_zf_pca_basis(H_d: np.ndarray, G_aa: np.ndarray, delta: float = 0.99) -> PrecoderBasis:
    """ONB-ZF basis restricted to the complement of the dominant IAI/RSI subspace.

    The right singular vectors of ``G_aa`` give the eigenvectors of
    ``G_aa^H G_aa``; the leading ``N_bar`` of them are projected out before the
    LQ-based ZF construction.
    """
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    K, N = H_d.shape
    _, s, vh = np.linalg.svd(G_aa)
    n_bar = pca_rank(s ** 2, delta)
    if K > N - n_bar:
        raise SingularChannelError(
            f"K={K} DL UEs do not fit in the {N - n_bar}-dimensional interference-free subspace")
    U = vh[:n_bar].conj().T
    P = np.eye(N) - U @ U.conj().T
    T, Q = lq(H_d @ P)
    basis = P @ _onb_from_lq(T, Q, 1.0 / COND_LIMIT)
    return PrecoderBasis(basis, "ONB_ZF_PCA", pca_rank=n_bar)


def zf_sic_receivers(H_u: np.ndarray) -> ReceiverSet:
    """ZF-SIC combiners for decoding in UE index order.

    ``a_l`` is the first row of the pseudo-inverse of ``[h_l, ..., h_L]``; it
    nulls the UEs not yet decoded and leaves earlier ones to SIC.
    """
    N, L = H_u.shape
    if L > N:
        raise ValueError("ZF-SIC needs L <= N")
    rows = np.empty((L, N), dtype=complex)
    for l in range(L):
        Hb = H_u[:, l:]
        gram = Hb.conj().T @ Hb
        _check_cond(gram, f"trailing UL channels from UE {l}")
        rows[l] = np.linalg.solve(gram, Hb.conj().T)[0]
    return ReceiverSet(rows, "ZF_SIC")


def per_ap_selector(antennas_per_ap) -> list:
    """Diagonal 0/1 selector matrices ``B_m``, one per AP."""
    off = np.concatenate([[0], np.cumsum(antennas_per_ap)]).astype(int)
    N = off[-1]
    sel = []
    for m in range(len(antennas_per_ap)):
        b = np.zeros(N)
        b[off[m]:off[m + 1]] = 1.0
        sel.append(np.diag(b))
    return sel


def block_sq_norms(X: np.ndarray, antennas_per_ap, axis: int = 0) -> np.ndarray:
    """Per-AP squared norms of the antenna blocks of ``X``.

    With ``axis=0`` the result has shape (M, X.shape[1]); with ``axis=1`` it
    has shape (X.shape[0], M).
    """
    off = np.concatenate([[0], np.cumsum(antennas_per_ap)]).astype(int)
    a2 = np.abs(X) ** 2
    if axis == 0:
        return np.add.reduceat(a2, off[:-1], axis=0)
    return np.add.reduceat(a2, off[:-1], axis=1)
