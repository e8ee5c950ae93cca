"""Monte Carlo unraveling of open quantum walks.

A trajectory carries a pure lattice position plus a conditioned internal
density; at each step one Kraus branch (direction, effect) is drawn with
probability Tr(K rho K*), the state is renormalized, and substochastic
columns kill the trajectory with the missing mass.  The ensemble is a
statistically independent oracle for the site-occupation numbers computed
by direct evolution.

Randomness comes from the counter-based Philox generator keyed by
(seed, trajectory index), so trajectory t consumes its own stream and the
ensemble is independent of evaluation order and worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .chain_model import QmcModel
from .quantum_core import Array

DEAD = np.iinfo(np.int64).min
NEG_TOL = 1e-12

THREADS_ENV = "QMC_SPECTRA_THREADS"


@dataclass(frozen=True)
class TrajectoryConfig:
    model: QmcModel
    site: int
    rho: Array
    steps: int
    n_traj: int
    seed: int = 0

    def __post_init__(self):
        if self.model.mode != "full":
            raise ValueError("trajectory sampling needs a full-mode model")
        if not self.model.topology.contains(self.site):
            raise ValueError(f"site {self.site} outside topology")
        if self.steps < 0 or self.n_traj < 1:
            raise ValueError("need steps >= 0 and n_traj >= 1")
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (self.model.dim, self.model.dim):
            raise ValueError("density has wrong shape for the model")
        object.__setattr__(self, "rho", rho)


@dataclass(frozen=True)
class OccupationEstimate:
    """Monte Carlo site-occupation table with standard errors."""

    site_lo: int
    means: Array  # (steps + 1, num_sites)
    stderrs: Array
    n_traj: int
    seed: int

    def mean(self, step: int, site: int) -> float:
        k = site - self.site_lo
        if 0 <= k < self.means.shape[1]:
            return float(self.means[step, k])
        return 0.0

    def stderr(self, step: int, site: int) -> float:
        k = site - self.site_lo
        if 0 <= k < self.means.shape[1]:
            return float(self.stderrs[step, k])
        return 0.0

    def sites(self) -> range:
        return range(self.site_lo, self.site_lo + self.means.shape[1])


def _branches(model: QmcModel, site: int):
    """(shift, effect) branches leaving a site; every present block must
    expose Kraus effects."""
    out = []
    for role, shift in (("C", -1), ("B", 0), ("A", 1)):
        blk = model.block_object(site, role)
        if blk is None:
            continue
        if blk.effects is None:
            raise ValueError(
                f"block {role} at site {site} has no Kraus effects; "
                f"trajectory unraveling needs an OQW-form model"
            )
        for k in blk.effects:
            out.append((shift, k))
    return out


def _stream_uniforms(seed: int, index: int, steps: int) -> Array:
    gen = np.random.Generator(np.random.Philox(key=np.array([seed, index], dtype=np.uint64)))
    return gen.random(steps)


def sample_trajectory(config: TrajectoryConfig, index: int = 0):
    """One sampled path: a list of (site, conditioned density) per step,
    with (None, None) entries after a kill event."""
    u = _stream_uniforms(config.seed, index, config.steps)
    site = config.site
    rho = config.rho.copy()
    path = [(site, rho.copy())]
    for step in range(config.steps):
        if site is None:
            path.append((None, None))
            continue
        branches = _branches(config.model, site)
        probs = []
        for _, k in branches:
            p = float(np.trace(k @ rho @ k.conj().T).real)
            if p < -NEG_TOL:
                raise ArithmeticError(f"negative branch probability {p}")
            probs.append(max(p, 0.0))
        total = sum(probs)
        r = u[step]
        acc = 0.0
        chosen = None
        for b, p in enumerate(probs):
            acc += p
            if r < acc:
                chosen = b
                break
        if chosen is None:
            if total > 1.0 + 1e-9:
                raise ArithmeticError(f"branch probabilities sum to {total} > 1")
            site, rho = None, None
            path.append((None, None))
            continue
        shift, k = branches[chosen]
        rho = (k @ rho @ k.conj().T) / probs[chosen]
        site += shift
        path.append((site, rho.copy()))
    return path


def _run_block(config: TrajectoryConfig, t0: int, t1: int) -> Array:
    """Occupation counts (steps + 1, window) for trajectories [t0, t1)."""
    model = config.model
    steps = config.steps
    n = t1 - t0
    dim = model.dim
    lo = config.site - steps
    if model.topology.lo is not None:
        lo = max(lo, model.topology.lo)
    hi = config.site + steps
    if model.topology.hi is not None:
        hi = min(hi, model.topology.hi)
    width = hi - lo + 1

    uniforms = np.empty((n, steps), dtype=float)
    for t in range(n):
        uniforms[t] = _stream_uniforms(config.seed, t0 + t, steps)

    sites = np.full(n, config.site, dtype=np.int64)
    states = np.broadcast_to(config.rho, (n, dim, dim)).copy()
    counts = np.zeros((steps + 1, width))
    counts[0, config.site - lo] = n

    for step in range(steps):
        # group by the pre-step site table; writes go into `sites` so a
        # trajectory cannot be stepped twice
        orig_sites = sites.copy()
        alive = orig_sites != DEAD
        for s in np.unique(orig_sites[alive]):
            idx = np.where(orig_sites == s)[0]
            branches = _branches(model, int(s))
            kmats = np.stack([k for _, k in branches])
            shifts = np.array([sh for sh, _ in branches])
            probs = np.einsum(
                "bij,tjk,bik->tb", kmats, states[idx], kmats.conj()
            ).real
            if probs.min() < -NEG_TOL:
                raise ArithmeticError(
                    f"negative branch probability {probs.min()} at site {s}"
                )
            np.clip(probs, 0.0, None, out=probs)
            cum = np.cumsum(probs, axis=1)
            r = uniforms[idx, step]
            choice = (r[:, None] >= cum).sum(axis=1)  # == len(branches): kill
            for b in range(len(branches)):
                loc = np.where(choice == b)[0]
                if len(loc) == 0:
                    continue
                sel = idx[loc]
                k = kmats[b]
                new = np.einsum("ij,tjk,lk->til", k, states[sel], k.conj())
                states[sel] = new / probs[loc, b][:, None, None]
                sites[sel] = s + shifts[b]
            killed = idx[choice == len(branches)]
            if len(killed):
                sites[killed] = DEAD
        landed = sites[sites != DEAD]
        if len(landed):
            counts[step + 1] += np.bincount(landed - lo, minlength=width)
    return counts


def estimate_site_prob(config: TrajectoryConfig) -> OccupationEstimate:
    """Ensemble occupation estimate; bit-identical for a given seed."""
    workers = max(1, int(os.environ.get(THREADS_ENV, "1")))
    chunk = max(1, min(config.n_traj, 20_000))
    bounds = list(range(0, config.n_traj, chunk)) + [config.n_traj]
    blocks = list(zip(bounds[:-1], bounds[1:]))
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(
                pool.map(lambda b: _run_block(config, b[0], b[1]), blocks)
            )
    else:
        parts = [_run_block(config, t0, t1) for t0, t1 in blocks]
    counts = parts[0]
    for p in parts[1:]:
        counts = counts + p
    means = counts / config.n_traj
    stderrs = np.sqrt(np.clip(means * (1.0 - means), 0.0, None) / config.n_traj)
    steps = config.steps
    lo = config.site - steps
    if config.model.topology.lo is not None:
        lo = max(lo, config.model.topology.lo)
    return OccupationEstimate(lo, means, stderrs, config.n_traj, config.seed)
