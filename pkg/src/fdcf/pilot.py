"""Heap-based pilot assignment, LMMSE channel estimation and an exhaustive oracle."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np


class Heap:
    """Array-backed binary heap of ``(key, payload)`` nodes.

    Ties on ``key`` are broken by ``payload`` in ascending order for both
    kinds, so equal keys always surface the smallest payload first.

    Parameters
    ----------
    keys : sequence of float
    payloads : sequence, optional
        Defaults to ``range(len(keys))``.
    kind : {"min", "max"}
    """

    def __init__(self, keys=(), payloads=None, kind: str = "min"):
        if kind not in ("min", "max"):
            raise ValueError("kind must be 'min' or 'max'")
        self.kind = kind
        keys = list(keys)
        payloads = list(range(len(keys))) if payloads is None else list(payloads)
        if len(payloads) != len(keys):
            raise ValueError("keys and payloads differ in length")
        self.nodes = list(zip(keys, payloads))
        for i in range(len(self.nodes) // 2 - 1, -1, -1):
            self._sift_down(i)

    def __len__(self) -> int:
        return len(self.nodes)

    def _above(self, a, b) -> bool:
        """True if node ``a`` belongs above node ``b``."""
        if a[0] != b[0]:
            return a[0] < b[0] if self.kind == "min" else a[0] > b[0]
        return a[1] < b[1]

    def _sift_down(self, i: int) -> None:
        nodes, n = self.nodes, len(self.nodes)
        while True:
            best, left = i, 2 * i + 1
            for c in (left, left + 1):
                if c < n and self._above(nodes[c], nodes[best]):
                    best = c
            if best == i:
                return
            nodes[i], nodes[best] = nodes[best], nodes[i]
            i = best

    def _sift_up(self, i: int) -> None:
        nodes = self.nodes
        while i > 0:
            parent = (i - 1) // 2
            if not self._above(nodes[i], nodes[parent]):
                return
            nodes[i], nodes[parent] = nodes[parent], nodes[i]
            i = parent

    def push(self, key, payload) -> None:
        self.nodes.append((key, payload))
        self._sift_up(len(self.nodes) - 1)

    def peek(self):
        if not self.nodes:
            raise IndexError("peek on empty heap")
        return self.nodes[0]

    def extract(self):
        if not self.nodes:
            raise IndexError("extract on empty heap")
        root = self.nodes[0]
        last = self.nodes.pop()
        if self.nodes:
            self.nodes[0] = last
            self._sift_down(0)
        return root

    def replace_siftdown(self, key, payload) -> None:
        """Overwrite the root with a new node and restore heap order."""
        if not self.nodes:
            raise IndexError("replace on empty heap")
        self.nodes[0] = (key, payload)
        self._sift_down(0)

    def is_valid(self) -> bool:
        n = len(self.nodes)
        return all(not self._above(self.nodes[c], self.nodes[(c - 1) // 2]) for c in range(1, n))


def heap_generate(keys, payloads=None, kind: str = "min") -> Heap:
    return Heap(keys, payloads, kind)


def heap_peek(h: Heap):
    return h.peek()


def heap_extract(h: Heap):
    return h.extract()


def heap_replace_siftdown(h: Heap, key, payload) -> None:
    h.replace_siftdown(key, payload)


def beta_tilde(betas_per_ap, antennas, tau: int, p_tr) -> np.ndarray:
    """Aggregate per-UE load ``sum_m N_m tau p_j beta_mj``.

    Parameters
    ----------
    betas_per_ap : ndarray, shape (M, U)
    antennas : sequence of int, length M
    p_tr : float or ndarray, shape (U,)
    """
    betas = np.asarray(betas_per_ap, dtype=float)
    Nm = np.asarray(antennas, dtype=float)
    return tau * np.asarray(p_tr, dtype=float) * (Nm @ betas)


@dataclass
class PilotAssignment:
    """Pilot-to-UE map.

    Attributes
    ----------
    upsilon : ndarray, shape (tau, U), 0/1
    prc : ndarray, shape (tau,)
        Pilot-reuse coefficient of each pilot.
    beta_tilde : ndarray, shape (U,)
    trace : list of (ue, pilot, new_prc)
        Greedy steps after the initial seeding.
    """

    upsilon: np.ndarray
    prc: np.ndarray
    beta_tilde: np.ndarray
    trace: list = field(default_factory=list)

    @property
    def pilot_of(self) -> np.ndarray:
        """Pilot index assigned to each UE."""
        return np.argmax(self.upsilon, axis=0)

    @property
    def max_prc(self) -> float:
        return float(np.max(self.prc))

    def groups(self) -> list:
        return [np.flatnonzero(row).tolist() for row in self.upsilon]


def heap_pilot_assignment(beta_tilde_vals, tau: int, seed=None) -> PilotAssignment:
    """Greedy pilot assignment with a min-heap of PRCs and a max-heap of loads.

    The first ``tau`` UEs seed pilots ``0..tau-1`` in order (or a seeded random
    permutation of UEs when ``seed`` is given). Each remaining UE, taken in
    decreasing load, joins the pilot with the smallest PRC.
    """
    bt = np.asarray(beta_tilde_vals, dtype=float)
    U = bt.size
    if not 1 <= tau <= U:
        raise ValueError("require 1 <= tau <= U")
    order = np.arange(U) if seed is None else np.random.default_rng(seed).permutation(U)
    seeded, rest = order[:tau], order[tau:]
    ups = np.zeros((tau, U), dtype=int)
    ups[np.arange(tau), seeded] = 1
    prc_heap = Heap(bt[seeded].tolist(), list(range(tau)), "min")
    ue_heap = Heap(bt[rest].tolist(), rest.tolist(), "max")
    trace = []
    while len(ue_heap):
        load, ue = ue_heap.extract()
        prc, pilot = prc_heap.peek()
        prc_heap.replace_siftdown(prc + load, pilot)
        ups[pilot, ue] = 1
        trace.append((int(ue), int(pilot), prc + load))
    prc = np.zeros(tau)
    for key, pilot in prc_heap.nodes:
        prc[pilot] = key
    return PilotAssignment(ups, prc, bt, trace)


def two_phase_assignment(bt_dl, bt_ul, tau: int):
    """Separate FD training runs for UL UEs then DL UEs."""
    return heap_pilot_assignment(bt_ul, tau), heap_pilot_assignment(bt_dl, tau)


def _digits(tau: int, U: int) -> np.ndarray:
    n = tau ** U
    powers = tau ** np.arange(U - 1, -1, -1)
    return (np.arange(n)[:, None] // powers[None, :]) % tau


def brute_force_max_prc(beta_tilde_vals, tau: int) -> np.ndarray:
    """Optimal min-max PRC for one or many load vectors by full enumeration.

    Parameters
    ----------
    beta_tilde_vals : ndarray, shape (U,) or (D, U)

    Returns
    -------
    ndarray, shape () or (D,)
    """
    bt = np.asarray(beta_tilde_vals, dtype=float)
    single = bt.ndim == 1
    bt = np.atleast_2d(bt)
    U = bt.shape[1]
    if tau ** U > 10 ** 6:
        raise ValueError("instance too large for exhaustive search")
    dig = _digits(tau, U)
    worst = np.zeros((dig.shape[0], bt.shape[0]))
    for i in range(tau):
        np.maximum(worst, (dig == i).astype(float) @ bt.T, out=worst)
    best = worst.min(axis=0)
    return best[0] if single else best


def brute_force_assignment(beta_tilde_vals, tau: int):
    """Exhaustive min-max PRC assignment.

    Returns
    -------
    upsilon : ndarray, shape (tau, U)
    value : float
    """
    bt = np.asarray(beta_tilde_vals, dtype=float)
    U = bt.size
    if tau ** U > 10 ** 6:
        raise ValueError("instance too large for exhaustive search")
    best, best_assign = np.inf, None
    for assign in itertools.product(range(tau), repeat=U):
        a = np.asarray(assign)
        v = max(bt[a == i].sum() for i in range(tau))
        if v < best:
            best, best_assign = v, a
    ups = np.zeros((tau, U), dtype=int)
    ups[best_assign, np.arange(U)] = 1
    return ups, float(best)


def pilot_book(tau: int) -> np.ndarray:
    """Orthonormal pilot set (columns of a unitary DFT matrix)."""
    n = np.arange(tau)
    return np.exp(-2j * np.pi * np.outer(n, n) / tau) / np.sqrt(tau)


def _contamination(upsilon, betas, p_tr, tau, noise):
    """Denominator ``sum_j' tau p_j' beta_j' |phi_j^H phi_j'|^2 + sigma^2`` per (row, j)."""
    ups = np.asarray(upsilon)
    if np.any(ups.sum(axis=0) != 1):
        raise ValueError("every UE must hold exactly one pilot")
    share = (ups.T @ ups).astype(float)  # |phi_j^H phi_j'|^2 for orthonormal pilots
    load = tau * np.asarray(p_tr, dtype=float) * np.asarray(betas, dtype=float)
    return load @ share + noise


def estimation_error_variance(upsilon, betas, p_tr, tau: int, noise: float) -> np.ndarray:
    """LMMSE error variance for each (AP, UE) link.

    Parameters
    ----------
    upsilon : ndarray, shape (tau, U)
    betas : ndarray, shape (M, U)
        For CCI links pass the ``(K, L)`` matrix and the DL UE noise.
    """
    betas = np.asarray(betas, dtype=float)
    den = _contamination(upsilon, betas, p_tr, tau, noise)
    return betas * (1.0 - tau * np.asarray(p_tr, dtype=float) * betas / den)


def lmmse_estimate(Y_tr, upsilon, betas, p_tr, tau: int, noise: float,
                   pilots: np.ndarray | None = None) -> np.ndarray:
    """LMMSE estimates from received training blocks.

    Parameters
    ----------
    Y_tr : ndarray, shape (M, tau, N_ant)
        Training signal at each receiver (one antenna block per row ``m``).
    upsilon : ndarray, shape (tau, U)
    betas : ndarray, shape (M, U)

    Returns
    -------
    ndarray, shape (M, U, N_ant)
    """
    pilots = pilot_book(tau) if pilots is None else pilots
    ups = np.asarray(upsilon)
    phi_bar = pilots @ ups  # (tau, U)
    betas = np.asarray(betas, dtype=float)
    p_tr = np.broadcast_to(np.asarray(p_tr, dtype=float), (betas.shape[1],))
    den = _contamination(ups, betas, p_tr, tau, noise)
    coef = np.sqrt(tau * p_tr)[None, :] * betas / den  # (M, U)
    proj = np.einsum("tu,mtn->mun", phi_bar.conj(), np.asarray(Y_tr))
    return coef[:, :, None] * proj


def training_signal(h, upsilon, p_tr, tau: int, noise: float, rng,
                    pilots: np.ndarray | None = None) -> np.ndarray:
    """Received training block ``sum_j sqrt(tau p_j) phi_j h_j + Z``.

    ``h`` has shape (M, U, N_ant); the result has shape (M, tau, N_ant).
    """
    pilots = pilot_book(tau) if pilots is None else pilots
    phi_bar = pilots @ np.asarray(upsilon)
    M, U, Na = h.shape
    amp = np.sqrt(tau * np.broadcast_to(np.asarray(p_tr, dtype=float), (U,)))
    y = np.einsum("tu,mun->mtn", phi_bar * amp[None, :], h)
    z = np.sqrt(noise / 2) * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
    return y + z
