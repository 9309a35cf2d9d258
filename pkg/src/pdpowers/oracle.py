"""Exact ground-truth computations: DP policy evaluation, the constrained
comparator, Slater margins, and brute-force verifiers for tiny instances.

All operations here use the hidden true parameters and are pure; they are
simulator-side and never visible to the learner.
"""

from dataclasses import dataclass

import numpy as np

from .core import CmdpInstance, PolicyTable


class InfeasibleInstanceError(ValueError):
    """No policy satisfies the constraint threshold."""


@dataclass(frozen=True)
class DpResult:
    V: np.ndarray  # (H+1, S), terminal layer zero
    Q: np.ndarray  # (H, S, A)


def dp_evaluate(inst: CmdpInstance, policy: PolicyTable,
                signal: np.ndarray) -> DpResult:
    """Exact backward policy evaluation of an (H, S, A) signal table."""
    H, S, A = inst.horizon, inst.num_states, inst.num_actions
    sp = inst.support_probs
    support = inst.feature_map.support
    V = np.zeros((H + 1, S))
    Q = np.zeros((H, S, A))
    for h in range(H - 1, -1, -1):
        pv = np.einsum("sam,sam->sa", sp[h], V[h + 1][support])
        Q[h] = signal[h] + pv
        V[h] = np.einsum("sa,sa->s", policy.probs[h], Q[h])
    return DpResult(V=V, Q=Q)


def state_occupancy(inst: CmdpInstance, policy: PolicyTable) -> np.ndarray:
    """Exact state-visitation distribution d_h(s) under `policy`, (H, S)."""
    H, S = inst.horizon, inst.num_states
    sp = inst.support_probs
    support = inst.feature_map.support
    d = np.zeros((H, S))
    d[0, inst.s1] = 1.0
    for h in range(H - 1):
        flow = d[h][:, None, None] * policy.probs[h][:, :, None] * sp[h]  # (S, A, m)
        nxt = np.zeros(S)
        np.add.at(nxt, support.reshape(-1), flow.reshape(-1))
        d[h + 1] = nxt
    return d


def lagrangian_greedy(inst: CmdpInstance, signal_r: np.ndarray,
                      lam: float) -> PolicyTable:
    """Deterministic DP maximizer of signal_r + lam * g; ties go to the
    lowest action index."""
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    H, S, A = inst.horizon, inst.num_states, inst.num_actions
    sp = inst.support_probs
    support = inst.feature_map.support
    combined = signal_r + lam * inst.g_table
    V = np.zeros(S)
    probs = np.zeros((H, S, A))
    for h in range(H - 1, -1, -1):
        q = combined[h] + np.einsum("sam,sam->sa", sp[h], V[support])
        best = np.argmax(q, axis=-1)
        probs[h, np.arange(S), best] = 1.0
        V = q[np.arange(S), best]
    return PolicyTable(probs)


@dataclass(frozen=True)
class ComparatorResult:
    """Optimal mixture of at most two Lagrangian-greedy policies."""

    policy_lo: PolicyTable
    policy_hi: PolicyTable
    mix_weight: float   # probability of playing policy_hi
    value_r: float
    value_g: float
    lambda_star: float
    gamma: float        # Slater margin max_pi V^g(s1) - b

    def episode_value(self, inst: CmdpInstance, signal: np.ndarray) -> float:
        """Value of the mixture under an arbitrary signal table."""
        hi = dp_evaluate(inst, self.policy_hi, signal).V[0][inst.s1]
        lo = dp_evaluate(inst, self.policy_lo, signal).V[0][inst.s1]
        return self.mix_weight * hi + (1.0 - self.mix_weight) * lo


def _values(inst, policy, signal_r):
    vr = dp_evaluate(inst, policy, signal_r).V[0][inst.s1]
    vg = dp_evaluate(inst, policy, inst.g_table).V[0][inst.s1]
    return float(vr), float(vg)


def constrained_comparator(inst: CmdpInstance, signal_r: np.ndarray,
                           tol: float = 1e-8) -> ComparatorResult:
    """Best fixed feasible policy for `signal_r` via bisection on the
    Lagrange multiplier. Values are piecewise-linear in lam, so an optimal
    policy mixes the two greedy policies bracketing the binding constraint."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    g_greedy = lagrangian_greedy(inst, np.zeros_like(signal_r), 1.0)
    g_max = dp_evaluate(inst, g_greedy, inst.g_table).V[0][inst.s1]
    gamma = float(g_max - inst.b)
    if gamma < 0:
        raise InfeasibleInstanceError(
            f"max_pi V^g(s1) = {g_max} < b = {inst.b}")

    pol_lo = lagrangian_greedy(inst, signal_r, 0.0)
    vr_lo, vg_lo = _values(inst, pol_lo, signal_r)
    if vg_lo >= inst.b - 1e-12:
        return ComparatorResult(policy_lo=pol_lo, policy_hi=pol_lo,
                                mix_weight=1.0, value_r=vr_lo, value_g=vg_lo,
                                lambda_star=0.0, gamma=gamma)

    lam_max = 2.0 * inst.horizon / tol
    lam_hi = 1.0
    while lam_hi <= lam_max:
        pol_hi = lagrangian_greedy(inst, signal_r, lam_hi)
        vr_hi, vg_hi = _values(inst, pol_hi, signal_r)
        if vg_hi >= inst.b:
            break
        lam_hi *= 2.0
    else:
        raise InfeasibleInstanceError("no multiplier below 2H/tol is feasible")

    lam_lo = 0.0
    while lam_hi - lam_lo > tol * max(1.0, lam_hi):
        mid = 0.5 * (lam_lo + lam_hi)
        pol = lagrangian_greedy(inst, signal_r, mid)
        vr, vg = _values(inst, pol, signal_r)
        if vg >= inst.b:
            lam_hi, pol_hi, vr_hi, vg_hi = mid, pol, vr, vg
        else:
            lam_lo, pol_lo, vr_lo, vg_lo = mid, pol, vr, vg

    if vg_hi - vg_lo <= 1e-15:
        w = 1.0
    else:
        w = (inst.b - vg_lo) / (vg_hi - vg_lo)
    w = float(np.clip(w, 0.0, 1.0))
    return ComparatorResult(
        policy_lo=pol_lo, policy_hi=pol_hi, mix_weight=w,
        value_r=w * vr_hi + (1.0 - w) * vr_lo,
        value_g=w * vg_hi + (1.0 - w) * vg_lo,
        lambda_star=0.5 * (lam_lo + lam_hi), gamma=gamma,
    )


def _dp_deterministic_batch(inst: CmdpInstance, assignments: np.ndarray,
                            signal: np.ndarray) -> np.ndarray:
    """Initial-state values of many deterministic policies at once.

    `assignments` has shape (n, H, S) of action indices; returns (n,).
    """
    n = assignments.shape[0]
    H, S = inst.horizon, inst.num_states
    sp = inst.support_probs
    support = inst.feature_map.support
    V = np.zeros((n, S))
    for h in range(H - 1, -1, -1):
        pv = np.einsum("sam,nsam->nsa", sp[h], V[:, support])
        q = signal[h][None] + pv
        a = assignments[:, h, :]
        V = np.take_along_axis(q, a[:, :, None], axis=2)[:, :, 0]
    return V[:, inst.s1]


def brute_force_comparator(inst: CmdpInstance, signal_r: np.ndarray) -> float:
    """Independent comparator oracle: enumerate every deterministic Markov
    policy, then every feasible two-policy mixture. Values are affine in
    the mixing weight, so only constraint-binding weights matter."""
    H, S, A = inst.horizon, inst.num_states, inst.num_actions
    n = A ** (H * S)
    if n > 10**5:
        raise ValueError(f"{n} deterministic policies exceed the 1e5 cap")

    digits = np.arange(n)
    assignments = np.zeros((n, H * S), dtype=np.intp)
    for pos in range(H * S):
        assignments[:, pos] = digits % A
        digits = digits // A
    assignments = assignments.reshape(n, H, S)

    rv = _dp_deterministic_batch(inst, assignments, signal_r)
    gv = _dp_deterministic_batch(inst, assignments, inst.g_table)

    feasible = gv >= inst.b - 1e-12
    if not np.any(feasible):
        raise InfeasibleInstanceError("no feasible deterministic policy")
    best = float(rv[feasible].max())

    rf, gf = rv[feasible], gv[feasible]
    ri, gi = rv[~feasible], gv[~feasible]
    for j in range(len(ri)):
        w = (inst.b - gi[j]) / (gf - gi[j])   # weight on the feasible side
        vals = w * rf + (1.0 - w) * ri[j]
        best = max(best, float(vals.max()))
    return best


def metrics(v_true_r: np.ndarray, v_true_g: np.ndarray,
            comparator_values: np.ndarray, b: float):
    """Cumulative regret and violation curves from exact per-episode values."""
    regret = np.cumsum(comparator_values - v_true_r)
    violation = np.maximum(np.cumsum(b - v_true_g), 0.0)
    return regret, violation


def comparator_episode_values(inst: CmdpInstance, comp: ComparatorResult,
                              K: int) -> np.ndarray:
    """Comparator mixture value under each episode's reward table."""
    cache = {}
    vals = np.empty(K)
    for k in range(1, K + 1):
        table = inst.reward_table(k)
        key = table.tobytes()
        if key not in cache:
            cache[key] = comp.episode_value(inst, table)
        vals[k - 1] = cache[key]
    return vals


def average_reward_table(inst: CmdpInstance, K: int) -> np.ndarray:
    """Episode-averaged reward table (1/K) sum_k r^k."""
    counts = {}
    tables = {}
    for k in range(1, K + 1):
        table = inst.reward_table(k)
        key = table.tobytes()
        counts[key] = counts.get(key, 0) + 1
        tables[key] = table
    out = np.zeros_like(inst.g_table)
    for key, cnt in counts.items():
        out += (cnt / K) * tables[key]
    return out
