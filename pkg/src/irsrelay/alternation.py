"""Pieces shared by both alternating optimizers.

An outer iteration is a *sweep*: fresh relay matrix, then the first-slot and
second-slot phase subproblems.  With the safeguard on, a sweep that starts
from the fresh relay matrix is kept only if it ends no lower than the previous
iterate; otherwise the sweep is redone with the previous matrix, whose phase
updates are individually guarded and therefore cannot lose rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet
from .metrics import Beamformer, phase_vector, project_unit_modulus

INITS = ("aligned", "ones", "random")


def aligned_phases(ch: ChannelSet) -> np.ndarray:
    """Phases that best line up the reflected paths with both users' composite channels.

    Top eigenvector of ``G1 / ||h1r||^2 + G2 / ||h2r||^2`` with ``Gk = Hk^H Hk``,
    projected to unit modulus.
    """
    G = (ch.H1.conj().T @ ch.H1) / np.vdot(ch.h1r, ch.h1r).real
    G = G + (ch.H2.conj().T @ ch.H2) / np.vdot(ch.h2r, ch.h2r).real
    return project_unit_modulus(np.linalg.eigh(G)[1][:, -1])


def initial_phases(ch: ChannelSet, init: str = "aligned", seed=None):
    """Starting ``(theta1, theta2)``."""
    if init == "aligned":
        th = aligned_phases(ch)
        return th, th.copy()
    if init == "ones":
        return phase_vector(np.zeros(ch.n)), phase_vector(np.zeros(ch.n))
    if init == "random":
        rng = np.random.default_rng(seed)
        return phase_vector(rng.uniform(0, 2 * np.pi, ch.n)), phase_vector(rng.uniform(0, 2 * np.pi, ch.n))
    raise ValueError(f"unknown initialization {init!r}; expected one of {INITS}")


@dataclass
class Iterate:
    bf: Beamformer
    theta1: np.ndarray
    theta2: np.ndarray
    rate: float


@dataclass
class Refinement:
    """Outcome of repeating one block update."""

    steps: int = 0
    accepted: int = 0
    rejected: int = 0
    info: object = None


def refine(step, state: Iterate, inner_max: int, inner_tol: float, safeguard: bool):
    """Repeat ``step(state) -> (candidate Iterate | None, info)`` until it stops paying.

    A candidate is kept if it does not lower the rate (or unconditionally with
    the safeguard off).  Stops after ``inner_max`` calls, on a rejected or
    failed candidate, or once the gain drops to ``inner_tol``.
    """
    out = Refinement()
    while out.steps < inner_max:
        cand, out.info = step(state)
        out.steps += 1
        if cand is None or (safeguard and cand.rate < state.rate):
            out.rejected += 1
            break
        gain = cand.rate - state.rate
        state = cand
        out.accepted += 1
        if abs(gain) <= inner_tol:
            break
    return state, out


def guarded_sweep(sweep, current: Iterate, fresh: Iterate | None, safeguard: bool):
    """Run ``sweep(Iterate) -> (Iterate, details)`` from ``fresh``, falling back to ``current``.

    ``fresh`` carries the recomputed relay matrix at the current phases, or is
    None when that matrix could not be formed.  Returns
    ``(Iterate, details, fresh_kept)``.
    """
    if fresh is not None:
        out, details = sweep(fresh)
        if not safeguard or out.rate >= current.rate:
            return out, details, True
    out, details = sweep(current)
    return out, details, False
