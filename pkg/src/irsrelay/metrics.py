"""Relay power, end-to-end SNRs and rates for a given (A, theta1, theta2).

Phase vectors are plain complex arrays of length ``N + 1`` whose last entry is
the fixed direct-path coefficient 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, NetworkConfig


def phase_vector(phases) -> np.ndarray:
    """Augmented vector ``[exp(j phases); 1]``."""
    return np.append(np.exp(1j * np.asarray(phases, dtype=float)), 1.0 + 0j)


def project_unit_modulus(v: np.ndarray) -> np.ndarray:
    """Normalize by the last entry, then keep only the phases of the first N entries.

    Entries with zero magnitude get phase 0.
    """
    v = np.asarray(v, dtype=complex)
    last = v[-1]
    w = v[:-1] / last if abs(last) > 0 else v[:-1]
    out = np.ones(v.size, dtype=complex)
    out[:-1] = np.exp(1j * np.angle(w))
    return out


def is_feasible_phase(v: np.ndarray, tol: float = 1e-9) -> bool:
    v = np.asarray(v)
    return bool(v[-1] == 1 and np.all(np.abs(np.abs(v[:-1]) - 1.0) <= tol))


@dataclass(frozen=True, eq=False)
class Beamformer:
    A: np.ndarray
    scale: float
    method: str = "custom"

    def scaled(self, k: float) -> "Beamformer":
        return Beamformer(self.A * k, self.scale * k, self.method)


def _mat(A) -> np.ndarray:
    return A.A if isinstance(A, Beamformer) else np.asarray(A)


@dataclass(frozen=True)
class RatePair:
    r12: float
    r21: float
    snr12: float
    snr21: float

    @classmethod
    def from_snr(cls, snr12: float, snr21: float) -> "RatePair":
        return cls(rate(snr12), rate(snr21), float(snr12), float(snr21))

    @property
    def min_rate(self) -> float:
        return min(self.r12, self.r21)


def rate(snr: float) -> float:
    return 0.5 * float(np.log2(1.0 + snr))


def relay_tx_power(A, theta1: np.ndarray, ch: ChannelSet, cfg: NetworkConfig) -> float:
    A = _mat(A)
    g1 = A @ (ch.H1 @ theta1)
    g2 = A @ (ch.H2 @ theta1)
    return float(cfg.p1 * np.vdot(g1, g1).real + cfg.p2 * np.vdot(g2, g2).real
                 + cfg.sigmar_sq * np.sum(np.abs(A) ** 2))


def _snr(A, Hs, Hd, theta1, theta2, p_src, sigma_dst_sq, sigmar_sq):
    row = (Hd @ theta2).conj() @ A  # theta2^H Hd^H A
    sig = row @ (Hs @ theta1)
    return p_src * abs(sig) ** 2 / (sigmar_sq * np.vdot(row, row).real + sigma_dst_sq)


def snr_pair(A, theta1, theta2, ch: ChannelSet, cfg: NetworkConfig) -> RatePair:
    A = _mat(A)
    s12 = _snr(A, ch.H1, ch.H2, theta1, theta2, cfg.p1, cfg.sigma2_sq, cfg.sigmar_sq)
    s21 = _snr(A, ch.H2, ch.H1, theta1, theta2, cfg.p2, cfg.sigma1_sq, cfg.sigmar_sq)
    return RatePair.from_snr(s12, s21)


def min_rate(pair: RatePair) -> float:
    return pair.min_rate


def evaluate(A, theta1, theta2, ch: ChannelSet, cfg: NetworkConfig) -> float:
    """Shorthand for the min-rate objective."""
    return snr_pair(A, theta1, theta2, ch, cfg).min_rate


def effective_channel(A, theta1, theta2, ch: ChannelSet) -> np.ndarray:
    """2x2 two-way channel; diagonal entries carry the exchanged signals."""
    A = _mat(A)
    left = np.vstack([(ch.H2 @ theta2).conj(), (ch.H1 @ theta2).conj()])
    right = np.column_stack([ch.H1 @ theta1, ch.H2 @ theta1])
    return left @ A @ right


def fit_power(A, theta1, ch: ChannelSet, cfg: NetworkConfig) -> float:
    """Factor ``c`` such that ``c * A`` uses exactly the relay budget."""
    p = relay_tx_power(A, theta1, ch, cfg)
    return float(np.sqrt(cfg.pr / p))
