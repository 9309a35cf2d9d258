"""Domain types for finite-horizon linear mixture CMDPs.

States, actions, and steps are dense integer indices. Steps are 0-based
internally (h = 0..H-1), so the remaining-return range at step h is
[0, H-h]. Episode indices k are 1-based throughout.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np


@dataclass(frozen=True)
class FeatureMap:
    """Known feature mapping of a linear mixture CMDP.

    `support[s, a]` lists the next states with nonzero feature vectors;
    `phi[s, a, j]` is the feature vector of support entry j. Entries
    beyond the true support are padded with zero feature vectors (the
    padded support index just repeats a valid state).
    """

    dim: int
    num_states: int
    num_actions: int
    support: np.ndarray  # (S, A, m) int
    phi: np.ndarray      # (S, A, m, dim) float

    def __post_init__(self):
        S, A, m = self.support.shape
        assert self.phi.shape == (S, A, m, self.dim)
        self.support.flags.writeable = False
        self.phi.flags.writeable = False


def phi_v(fm: FeatureMap, V: np.ndarray, s: int, a: int) -> np.ndarray:
    """Integrated feature sum_{s'} phi(s'|s,a) V(s') over the declared support."""
    if not (0 <= s < fm.num_states and 0 <= a < fm.num_actions):
        raise IndexError(f"state/action ({s}, {a}) out of range")
    V = np.asarray(V, dtype=float)
    if V.shape != (fm.num_states,):
        raise ValueError(f"V must have one entry per state, got shape {V.shape}")
    return fm.phi[s, a].T @ V[fm.support[s, a]]


def phi_v_all(fm: FeatureMap, V: np.ndarray) -> np.ndarray:
    """phi_v for every (s, a) at once; returns an (S, A, dim) array."""
    V = np.asarray(V, dtype=float)
    return np.einsum("samd,sam->sad", fm.phi, V[fm.support])


@dataclass(frozen=True)
class CmdpInstance:
    """Full environment description, including the hidden true parameters.

    `reward_table_fn(k)` returns the (H, S, A) reward table of episode k
    (1-based); `g_table` is the fixed known constraint table. The learner
    only ever sees rewards through end-of-episode revelation.
    """

    num_states: int
    num_actions: int
    horizon: int
    feature_map: FeatureMap
    theta_star: np.ndarray            # (H, dim), hidden from the learner
    B: float
    b: float
    s1: int
    reward_table_fn: Callable[[int], np.ndarray]
    g_table: np.ndarray               # (H, S, A)
    _support_probs: Optional[np.ndarray] = field(default=None, repr=False,
                                                 compare=False, init=False)

    def reward_table(self, k: int) -> np.ndarray:
        if k < 1:
            raise IndexError(f"episode index k={k} must be >= 1")
        return self.reward_table_fn(k)

    @property
    def support_probs(self) -> np.ndarray:
        """True transition probabilities over the support, shape (H, S, A, m)."""
        if self._support_probs is None:
            p = np.einsum("samd,hd->hsam", self.feature_map.phi, self.theta_star)
            p.flags.writeable = False
            object.__setattr__(self, "_support_probs", p)
        return self._support_probs


def reward_at(inst: CmdpInstance, k: int, h: int, s: int, a: int) -> float:
    """Adversarial reward r_h^k(s, a); deterministic in (k, h, s, a)."""
    if not (0 <= h < inst.horizon and 0 <= s < inst.num_states
            and 0 <= a < inst.num_actions):
        raise IndexError(f"(h={h}, s={s}, a={a}) out of range")
    return float(inst.reward_table(k)[h, s, a])


def transition_prob(inst: CmdpInstance, h: int, s: int, a: int, s2: int) -> float:
    """P_h(s2 | s, a) = <phi(s2|s,a), theta*_h>; 0 off the declared support."""
    fm = inst.feature_map
    if not (0 <= h < inst.horizon and 0 <= s < fm.num_states
            and 0 <= a < fm.num_actions and 0 <= s2 < fm.num_states):
        raise IndexError(f"(h={h}, s={s}, a={a}, s2={s2}) out of range")
    total = 0.0
    for j, nxt in enumerate(fm.support[s, a]):
        if nxt == s2:
            total += float(fm.phi[s, a, j] @ inst.theta_star[h])
    return total


@dataclass
class PolicyTable:
    """Per-(step, state) action distribution; the learner's primal iterate."""

    probs: np.ndarray  # (H, S, A)

    def validate(self, atol: float = 1e-12) -> None:
        if np.any(self.probs < 0):
            raise ValueError("policy has negative entries")
        sums = self.probs.sum(axis=-1)
        if np.max(np.abs(sums - 1.0)) > atol:
            raise ValueError("policy rows do not sum to 1")

    @staticmethod
    def uniform(H: int, S: int, A: int) -> "PolicyTable":
        return PolicyTable(np.full((H, S, A), 1.0 / A))


@dataclass
class ValueTables:
    """Optimistic Q/V tables for one signal. V has H+1 layers; V[H] = 0."""

    Q: np.ndarray  # (H, S, A)
    V: np.ndarray  # (H+1, S), terminal layer fixed to zero

    @staticmethod
    def zeros(H: int, S: int, A: int) -> "ValueTables":
        return ValueTables(np.zeros((H, S, A)), np.zeros((H + 1, S)))


@dataclass(frozen=True)
class EpisodeRecord:
    """One episode's trajectory plus the reward table revealed at its end."""

    k: int
    states: np.ndarray            # (H+1,) visited states, states[0] = s1
    actions: np.ndarray           # (H,)
    revealed_rewards: np.ndarray  # (H, S, A)


@dataclass
class ValidationReport:
    """Diagnostics from validate_instance; passes iff all invariants hold."""

    prob_sum_err_max: float
    prob_min: float
    prob_max: float
    phi_v_norm_max: float
    theta_norm_max: float
    B: float
    b: float
    horizon: int
    problems: List[str]

    @property
    def passed(self) -> bool:
        return not self.problems

    def __str__(self) -> str:
        lines = [
            f"probability-sum max error : {self.prob_sum_err_max:.3e}",
            f"probability range         : [{self.prob_min:.6f}, {self.prob_max:.6f}]",
            f"max ||phi_V||_2 (sampled) : {self.phi_v_norm_max:.6f}",
            f"max ||theta*_h||_2        : {self.theta_norm_max:.6f} (bound B = {self.B})",
            f"threshold b               : {self.b} (must lie in [0, {self.horizon}])",
            "status                    : " + ("PASS" if self.passed else "FAIL"),
        ]
        lines += [f"  problem: {p}" for p in self.problems]
        return "\n".join(lines)


def validate_instance(inst: CmdpInstance, num_value_samples: int = 1000,
                      rng: Optional[np.random.Generator] = None) -> ValidationReport:
    """Check the linear-mixture invariants; returns a failing report, never raises."""
    if rng is None:
        rng = np.random.default_rng(0)
    problems = []
    fm = inst.feature_map
    probs = inst.support_probs  # (H, S, A, m)

    sums = probs.sum(axis=-1)
    prob_sum_err = float(np.max(np.abs(sums - 1.0)))
    if prob_sum_err > 1e-12:
        problems.append(f"transition probabilities sum to 1 off by {prob_sum_err:.3e}")
    pmin, pmax = float(probs.min()), float(probs.max())
    if pmin < -1e-12 or pmax > 1.0 + 1e-12:
        problems.append(f"transition probability outside [0,1]: range [{pmin}, {pmax}]")

    theta_norms = np.linalg.norm(inst.theta_star, axis=1)
    theta_norm_max = float(theta_norms.max())
    if theta_norm_max > inst.B + 1e-12:
        problems.append(f"||theta*_h||_2 = {theta_norm_max} exceeds B = {inst.B}")

    norm_max = 0.0
    for _ in range(num_value_samples):
        V = rng.random(inst.num_states)
        norms = np.linalg.norm(phi_v_all(fm, V), axis=-1)
        norm_max = max(norm_max, float(norms.max()))
    if norm_max > 1.0 + 1e-12:
        problems.append(f"sampled ||phi_V||_2 = {norm_max} exceeds 1")

    if not (0.0 <= inst.b <= inst.horizon):
        problems.append(f"threshold b = {inst.b} outside [0, H] = [0, {inst.horizon}]")

    supp_sizes = (np.linalg.norm(fm.phi, axis=-1) > 0).sum(axis=-1)
    if np.any(supp_sizes == 0):
        problems.append("some (s, a) has an empty feature support")

    return ValidationReport(
        prob_sum_err_max=prob_sum_err, prob_min=pmin, prob_max=pmax,
        phi_v_norm_max=norm_max, theta_norm_max=theta_norm_max,
        B=inst.B, b=inst.b, horizon=inst.horizon, problems=problems,
    )
