"""Network geometry, path loss and Rayleigh channel generation."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import ConfigError

LINKS = ("1i", "1r", "2i", "2r", "ir")


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(w: float) -> float:
    return 10.0 * np.log10(w) + 30.0


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


@dataclass(frozen=True)
class NetworkConfig:
    """Geometry, antenna counts, path-loss exponents, powers and noise levels.

    Powers and noise variances are in watts, positions in meters.  Defaults
    place U1 at the origin, U2 120 m away, the UAV-mounted IRS at
    (-10, 60, 20) and the relay at (10, 60, 10); total power 30 dBm split
    equally, all noise at -90 dBm.
    """

    m: int = 2
    n: int = 64
    u1: tuple = (0.0, 0.0, 0.0)
    u2: tuple = (0.0, 120.0, 0.0)
    irs: tuple = (-10.0, 60.0, 20.0)
    relay: tuple = (10.0, 60.0, 10.0)
    alpha: dict = field(default_factory=lambda: {"1i": 2.0, "1r": 3.6, "2i": 2.0, "2r": 3.6, "ir": 2.0})
    pl0_db: float = -30.0
    d0: float = 1.0
    p_total: float = 1.0
    p1: float = 1.0 / 3.0
    p2: float = 1.0 / 3.0
    pr: float = 1.0 / 3.0
    sigma1_sq: float = 1e-12
    sigma2_sq: float = 1e-12
    sigmar_sq: float = 1e-12

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ConfigError(f"m must be a positive integer, got {self.m}")
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError(f"n must be a positive integer, got {self.n}")
        for name in ("p_total", "p1", "p2", "pr", "sigma1_sq", "sigma2_sq", "sigmar_sq", "d0"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ConfigError(f"{name} must be strictly positive, got {v}")
        if abs(self.p1 + self.p2 + self.pr - self.p_total) > 1e-12 * self.p_total:
            raise ConfigError("p1 + p2 + pr must equal p_total")
        if set(self.alpha) != set(LINKS):
            raise ConfigError(f"alpha needs exactly the keys {LINKS}")
        pos = {k: np.asarray(getattr(self, k), dtype=float) for k in ("u1", "u2", "irs", "relay")}
        for k, v in pos.items():
            if v.shape != (3,):
                raise ConfigError(f"position {k} must have three coordinates")
        names = list(pos)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                if np.linalg.norm(pos[a] - pos[b]) <= 0:
                    raise ConfigError(f"nodes {a} and {b} coincide")

    @classmethod
    def from_dbm(cls, p_total_dbm: float = 30.0, noise_dbm: float = -90.0,
                 split=(1.0, 1.0, 1.0), **kw) -> "NetworkConfig":
        p = dbm_to_watt(p_total_dbm)
        w = np.asarray(split, dtype=float)
        if w.shape != (3,) or np.any(w <= 0):
            raise ConfigError("power split needs three positive weights")
        w = w / w.sum()
        s2 = dbm_to_watt(noise_dbm)
        kw.setdefault("sigma1_sq", s2)
        kw.setdefault("sigma2_sq", s2)
        kw.setdefault("sigmar_sq", s2)
        p1, p2 = p * w[0], p * w[1]
        return cls(p_total=p, p1=p1, p2=p2, pr=p - p1 - p2, **kw)

    def with_power_dbm(self, p_total_dbm: float) -> "NetworkConfig":
        """Same config with the total power changed and the split ratios kept."""
        p = dbm_to_watt(p_total_dbm)
        k = p / self.p_total
        p1, p2 = self.p1 * k, self.p2 * k
        return replace(self, p_total=p, p1=p1, p2=p2, pr=p - p1 - p2)

    def with_sizes(self, m: int | None = None, n: int | None = None) -> "NetworkConfig":
        return replace(self, m=self.m if m is None else int(m), n=self.n if n is None else int(n))

    def distance(self, link: str) -> float:
        ends = {"1i": ("u1", "irs"), "1r": ("u1", "relay"), "2i": ("u2", "irs"),
                "2r": ("u2", "relay"), "ir": ("irs", "relay")}[link]
        a, b = (np.asarray(getattr(self, e), dtype=float) for e in ends)
        return float(np.linalg.norm(a - b))

    def link_gain(self, link: str) -> float:
        """Linear power gain of a link."""
        return float(db_to_linear(path_loss_db(self.distance(link), self.alpha[link], self)))


def path_loss_db(d: float, alpha: float, config: NetworkConfig | None = None) -> float:
    """``PL(d) = PL0 - 10 alpha log10(d / d0)`` in dB."""
    if not d > 0:
        raise ValueError(f"distance must be positive, got {d}")
    pl0, d0 = (-30.0, 1.0) if config is None else (config.pl0_db, config.d0)
    return pl0 - 10.0 * alpha * np.log10(d / d0)


def assemble_composite(h_ur: np.ndarray, H_ir: np.ndarray, h_ui: np.ndarray) -> np.ndarray:
    """Return ``[H_ir diag(h_ui), h_ur]`` of shape ``M x (N+1)``."""
    h_ur = np.asarray(h_ur)
    H_ir = np.atleast_2d(np.asarray(H_ir))
    h_ui = np.asarray(h_ui)
    M, N = H_ir.shape
    if h_ur.shape != (M,) or h_ui.shape != (N,):
        raise ValueError(f"dimension mismatch: H_ir {H_ir.shape}, h_ur {h_ur.shape}, h_ui {h_ui.shape}")
    return np.hstack([H_ir * h_ui[None, :], h_ur[:, None]])


@dataclass(frozen=True, eq=False)
class ChannelSet:
    h1r: np.ndarray
    h2r: np.ndarray
    h1i: np.ndarray
    h2i: np.ndarray
    H_ir: np.ndarray

    @cached_property
    def H1(self) -> np.ndarray:
        return assemble_composite(self.h1r, self.H_ir, self.h1i)

    @cached_property
    def H2(self) -> np.ndarray:
        return assemble_composite(self.h2r, self.H_ir, self.h2i)

    @property
    def m(self) -> int:
        return self.H_ir.shape[0]

    @property
    def n(self) -> int:
        return self.H_ir.shape[1]

    def without_irs(self) -> "ChannelSet":
        z = np.zeros_like
        return ChannelSet(self.h1r, self.h2r, z(self.h1i), z(self.h2i), z(self.H_ir))

    def swapped(self) -> "ChannelSet":
        """Relabel U1 and U2."""
        return ChannelSet(self.h2r, self.h1r, self.h2i, self.h1i, self.H_ir)

    def checksum(self) -> str:
        h = hashlib.sha256()
        for a in (self.h1r, self.h2r, self.h1i, self.h2i, self.H_ir):
            h.update(np.ascontiguousarray(a, dtype=complex).tobytes())
        return h.hexdigest()[:16]


def _cn(rng: np.random.Generator, gain: float, shape) -> np.ndarray:
    # CN(0, gain) entries
    return np.sqrt(gain / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_channels(config: NetworkConfig, rng: np.random.Generator) -> ChannelSet:
    """Draw one Rayleigh realization with per-entry variance set by path loss."""
    M, N = config.m, config.n
    g = {k: config.link_gain(k) for k in LINKS}
    return ChannelSet(
        h1r=_cn(rng, g["1r"], M),
        h2r=_cn(rng, g["2r"], M),
        h1i=_cn(rng, g["1i"], N),
        h2i=_cn(rng, g["2i"], N),
        H_ir=_cn(rng, g["ir"], (M, N)),
    )
