"""Concrete CMDP instances, the adversarial reward schedule, and rollouts.

The benchmark instance is a survival chain: from state s < H the agent
either advances to s+1 or falls into the absorbing state H+1. Rewards
alternate between favoring +1 actions and -1 actions in blocks of
episodes, while the constraint signal always favors +1 actions.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .core import (CmdpInstance, EpisodeRecord, FeatureMap, PolicyTable,
                   validate_instance)

# Feature construction for the benchmark: theta*_h = THETA_SCALE * (p0, -slope 1).
# The scale keeps ||phi_V||_2 <= 1 for every V in [0,1]^S while ||theta*|| stays
# well under PARAM_BOUND.
THETA_SCALE = 2.3
PARAM_BOUND = 3.0


class InstanceConstructionError(ValueError):
    """Raised when a constructed instance fails its own validation."""


@dataclass(frozen=True)
class BenchmarkParams:
    horizon: int = 10
    dim: int = 5
    b: float = 6.0
    block_length: int = 10
    p0: float = 0.95
    slope: float = 0.01
    reward_scale: float = 0.4

    def validate(self) -> None:
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.block_length < 1:
            raise ValueError("block_length must be >= 1")
        lo = self.p0 - self.slope * (self.dim - 1)
        hi = self.p0 + self.slope * (self.dim - 1)
        if not (0.0 < lo and hi < 1.0):
            raise ValueError(f"survival probabilities [{lo}, {hi}] leave (0, 1)")


@dataclass(frozen=True)
class RngStream:
    """Seeded stream of per-episode generators; identical seeds give
    bit-identical trajectories regardless of thread schedule."""

    seed: int

    def for_episode(self, k: int) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(entropy=self.seed, spawn_key=(k,)))

    def root(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(entropy=self.seed))


def sign_actions(dim: int) -> np.ndarray:
    """The 2^(dim-1) sign vectors in lexicographic order, shape (A, dim-1)."""
    return np.array(list(itertools.product([-1, 1], repeat=dim - 1)), dtype=float)


def build_benchmark_instance(p: BenchmarkParams = BenchmarkParams()) -> CmdpInstance:
    p.validate()
    H, d = p.horizon, p.dim
    S = H + 2
    acts = sign_actions(d)               # (A, d-1)
    A = acts.shape[0]
    frac = (acts + 1.0).sum(axis=1) / (2.0 * (d - 1))   # (A,) in [0, 1]
    p_surv = p.p0 - p.slope * acts.sum(axis=1)          # P(s+1 | s, a) for s < H

    c = THETA_SCALE
    theta = c * np.concatenate(([p.p0], -p.slope * np.ones(d - 1)))
    theta_star = np.tile(theta, (H, 1))

    support = np.zeros((S, A, 2), dtype=np.intp)
    phi = np.zeros((S, A, 2, d))
    for s in range(H):
        support[s, :, 0] = s + 1
        support[s, :, 1] = H + 1
        phi[s, :, 0, 0] = 1.0 / c
        phi[s, :, 0, 1:] = acts / c
        phi[s, :, 1, 0] = (1.0 - p.p0) / (p.p0 * c)
        phi[s, :, 1, 1:] = -acts / c
    for s in (H, H + 1):
        support[s, :, :] = s
        phi[s, :, 0, :] = theta / (theta @ theta)
    fm = FeatureMap(dim=d, num_states=S, num_actions=A, support=support, phi=phi)

    r_even = np.zeros((H, S, A))
    r_odd = np.zeros((H, S, A))
    r_even[:, :H, :] = p.reward_scale * frac
    r_odd[:, :H, :] = p.reward_scale * (1.0 - frac)
    r_even[:, H + 1, :] = 1.0
    r_odd[:, H + 1, :] = 1.0
    r_even.flags.writeable = False
    r_odd.flags.writeable = False

    def reward_table_fn(k: int) -> np.ndarray:
        # Episodes are 1-based; block parity is floor(k / block_length) mod 2.
        return r_even if (k // p.block_length) % 2 == 0 else r_odd

    g_table = np.zeros((H, S, A))
    g_table[:, :H, :] = frac
    g_table.flags.writeable = False

    inst = CmdpInstance(
        num_states=S, num_actions=A, horizon=H, feature_map=fm,
        theta_star=theta_star, B=PARAM_BOUND, b=p.b, s1=0,
        reward_table_fn=reward_table_fn, g_table=g_table,
    )
    report = validate_instance(inst)
    if not report.passed:
        raise InstanceConstructionError(f"benchmark instance invalid:\n{report}")
    assert np.allclose(inst.support_probs[0, 0, :, 0], p_surv)
    return inst


def build_tiny_instance() -> CmdpInstance:
    """Fixed H=3, |S|=4, |A|=2, d=2 instance with a binding constraint.

    Transitions go to (s+1) mod 4 with probability q(s,a) = 0.3 + 0.25a +
    0.05s, else to (s+3) mod 4. Action 1 pays more reward, action 0 more
    constraint signal, so the constraint b = 2.2 binds.
    """
    H, S, A, d = 3, 4, 2, 2
    theta = np.array([1.5, 1.0])
    theta_star = np.tile(theta, (H, 1))

    support = np.zeros((S, A, 2), dtype=np.intp)
    phi = np.zeros((S, A, 2, d))
    r = np.zeros((H, S, A))
    g = np.zeros((H, S, A))
    for s in range(S):
        for a in range(A):
            q = 0.3 + 0.25 * a + 0.05 * s
            support[s, a] = [(s + 1) % S, (s + 3) % S]
            phi[s, a, 0] = [q / theta[0], 0.0]
            phi[s, a, 1] = [0.0, (1.0 - q) / theta[1]]
            r[:, s, a] = 0.15 + 0.6 * a + 0.05 * (s % 2)
            g[:, s, a] = 0.9 - 0.55 * a + 0.025 * s
    fm = FeatureMap(dim=d, num_states=S, num_actions=A, support=support, phi=phi)
    r.flags.writeable = False
    g.flags.writeable = False

    inst = CmdpInstance(
        num_states=S, num_actions=A, horizon=H, feature_map=fm,
        theta_star=theta_star, B=2.0, b=2.2, s1=0,
        reward_table_fn=lambda k: r, g_table=g,
    )
    report = validate_instance(inst)
    if not report.passed:
        raise InstanceConstructionError(f"tiny instance invalid:\n{report}")
    return inst


def rollout(inst: CmdpInstance, policy: PolicyTable, k: int,
            rng: RngStream) -> EpisodeRecord:
    """Sample one episode under `policy`; deterministic in (policy, k, seed)."""
    H = inst.horizon
    gen = rng.for_episode(k)
    u = gen.random((H, 2))
    pol_cdf = np.cumsum(policy.probs, axis=-1)
    sp = inst.support_probs
    support = inst.feature_map.support

    states = np.empty(H + 1, dtype=np.intp)
    actions = np.empty(H, dtype=np.intp)
    states[0] = inst.s1
    for h in range(H):
        s = states[h]
        a = int(np.searchsorted(pol_cdf[h, s], u[h, 0], side="right"))
        a = min(a, inst.num_actions - 1)
        actions[h] = a
        pr = sp[h, s, a]
        mass = float(pr.sum())
        if abs(mass - 1.0) > 1e-9:
            raise ValueError(
                f"transition mass {mass} at (h={h}, s={s}, a={a}) deviates from 1")
        c = 0.0
        j = len(pr) - 1
        for jj in range(len(pr)):
            c += pr[jj]
            if u[h, 1] <= c:
                j = jj
                break
        states[h + 1] = support[s, a, j]
    return EpisodeRecord(k=k, states=states, actions=actions,
                         revealed_rewards=inst.reward_table(k))
