"""Reference schemes: random IRS phases, and the relay without any IRS."""

from __future__ import annotations

import numpy as np

from .channel import ChannelSet, NetworkConfig
from .errors import DegenerateChannelError
from .metrics import Beamformer, evaluate, phase_vector
from .ons_sdp_psca import ons_beamformer
from .zf_sca import zf_beamformer

BEAMFORMERS = {"ons": lambda t1, t2, ch, cfg: ons_beamformer(t1, t2, ch, cfg)[0], "zf": zf_beamformer}


def random_phase_baseline(ch: ChannelSet, cfg: NetworkConfig, rng: np.random.Generator,
                          beamformer: str = "ons", shared: bool = True, max_draws: int = 10):
    """Uniform random phases, relay matrix from ``beamformer``.

    With ``shared`` the surface keeps one random configuration for both time
    slots; otherwise each slot gets its own draw.  Returns
    ``(Beamformer, theta1, theta2, min_rate)``.  Draws that make the stacked
    channels degenerate are redrawn up to ``max_draws`` times.
    """
    make = BEAMFORMERS[beamformer]
    for _ in range(max_draws):
        th1 = phase_vector(rng.uniform(0.0, 2.0 * np.pi, ch.n))
        th2 = th1 if shared else phase_vector(rng.uniform(0.0, 2.0 * np.pi, ch.n))
        try:
            bf = make(th1, th2, ch, cfg)
        except DegenerateChannelError:
            continue
        return bf, th1, th2, evaluate(bf, th1, th2, ch, cfg)
    raise DegenerateChannelError("random phases kept producing degenerate stacked channels")


def relay_only_baseline(ch: ChannelSet, cfg: NetworkConfig):
    """Relay without the IRS; the one-step beamformer on the direct channels.

    Returns ``(Beamformer, min_rate)``.
    """
    bare = ch.without_irs()
    ones = phase_vector(np.zeros(ch.n))
    bf, _ = ons_beamformer(ones, ones, bare, cfg)
    return bf, evaluate(bf, ones, ones, bare, cfg)
