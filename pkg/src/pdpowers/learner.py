"""The primal-dual episode loop: optimistic backward pass for both
signals, perturbed mirror-descent policy update, regularized dual update,
and estimator ingestion.

Episode order follows the algorithm exactly: for k > 1 the policy update
uses the previous episode's Q tables and dual variable, then the dual
update uses the previous constraint value estimate; only then is the
episode played and the backward pass run on the revealed rewards.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from . import oracle
from .core import (CmdpInstance, EpisodeRecord, PolicyTable, ValueTables,
                   phi_v, phi_v_all)
from .environment import RngStream, rollout
from .estimation import (ConfidenceRadii, SpdState, bonus_norm, offset_e,
                         proposition1_check, radii, rank1_update,
                         sigma_bar_sq, variance_estimate)

SIGNALS = ("r", "g")


class InvariantViolationError(RuntimeError):
    """An inline runtime assertion failed; the run is aborted."""


@dataclass(frozen=True)
class LearnerConfig:
    K: int
    alpha: float
    eta: float
    theta_mix: float
    lam: float
    delta: float = 0.01
    B: float = 3.0
    use_clipped_dual: bool = False
    gamma_for_clipped: float = 0.0
    diagnostics: bool = True

    def validate(self) -> None:
        if self.K < 1:
            raise ValueError("K must be >= 1")
        for name in ("alpha", "eta", "theta_mix", "lam"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.theta_mix > 1:
            raise ValueError("theta_mix must be <= 1")
        if not (0 < self.delta < 1):
            raise ValueError("delta must lie in (0, 1)")
        if self.use_clipped_dual and self.gamma_for_clipped <= 0:
            raise ValueError("clipped dual update needs gamma > 0")

    @staticmethod
    def defaults(H: int, K: int, B: float, delta: float = 0.01,
                 **overrides) -> "LearnerConfig":
        """Step sizes alpha = 1/(H^2 sqrt(K)), eta = 1/(H sqrt(K)),
        mixing 1/K, and ridge regularizer lam = 1/B^2."""
        if K < 1:
            raise ValueError("K must be >= 1")
        params = dict(
            K=K,
            alpha=1.0 / (H * H * math.sqrt(K)),
            eta=1.0 / (H * math.sqrt(K)),
            theta_mix=1.0 / K,
            lam=1.0 / (B * B),
            delta=delta,
            B=B,
        )
        params.update(overrides)
        cfg = LearnerConfig(**params)
        cfg.validate()
        return cfg


@dataclass
class DualState:
    y: float = 0.0


@dataclass
class LearnerState:
    policy: PolicyTable
    dual: DualState
    hat: Dict[Tuple[int, str], SpdState]    # weighted family, keyed (h, signal)
    tilde: Dict[Tuple[int, str], SpdState]  # unit-weight family
    values: Dict[str, ValueTables]
    k: int = 0

    @staticmethod
    def initial(inst: CmdpInstance, cfg: LearnerConfig) -> "LearnerState":
        H, S, A = inst.horizon, inst.num_states, inst.num_actions
        d = inst.feature_map.dim
        return LearnerState(
            policy=PolicyTable.uniform(H, S, A),
            dual=DualState(0.0),
            hat={(h, l): SpdState(d, cfg.lam) for h in range(H) for l in SIGNALS},
            tilde={(h, l): SpdState(d, cfg.lam) for h in range(H) for l in SIGNALS},
            values={l: ValueTables.zeros(H, S, A) for l in SIGNALS},
        )


@dataclass
class DiagnosticsLog:
    """Counter of inline runtime assertions; any failure aborts the run,
    so `failed` stays 0 on a completed run."""

    checked: int = 0
    failed: int = 0

    def require(self, ok: bool, message: str) -> None:
        self.checked += 1
        if not ok:
            self.failed += 1
            raise InvariantViolationError(message)


def policy_update(state: LearnerState, cfg: LearnerConfig,
                  diag: Optional[DiagnosticsLog] = None) -> PolicyTable:
    """Mix toward uniform, then exponentiated-gradient step on the
    Lagrangian Q. The exponent is max-shifted before exponentiation."""
    A = state.policy.probs.shape[-1]
    mixed = (1.0 - cfg.theta_mix) * state.policy.probs + cfg.theta_mix / A
    expo = cfg.alpha * (state.values["r"].Q + state.dual.y * state.values["g"].Q)
    expo -= expo.max(axis=-1, keepdims=True)
    w = mixed * np.exp(expo)
    z = w.sum(axis=-1, keepdims=True)
    if np.any(z <= 0.0):
        raise InvariantViolationError("policy normalizer underflowed to 0")
    new = w / z

    if diag is not None:
        H = state.policy.probs.shape[0]
        diag.require(bool(np.all(mixed >= cfg.theta_mix / A)),
                     "mixing floor theta_mix/|A| violated")
        diag.require(float(np.max(np.abs(new.sum(-1) - 1.0))) <= 1e-12,
                     "policy rows do not sum to 1 after update")
        diag.require(bool(np.all(new > 0.0)), "policy not strictly positive")
        l1 = float(np.abs(new - mixed).sum(axis=-1).max())
        diag.require(l1 <= cfg.alpha * H * (1.0 + state.dual.y) + 1e-12,
                     "mirror-descent step exceeded alpha H (1 + Y)")
    return PolicyTable(new)


def dual_update(state: LearnerState, v_g_estimate: float, b: float, H: int,
                cfg: LearnerConfig) -> DualState:
    """Regularized update: the decay and offset terms give the dual
    variable negative drift instead of a hard cap."""
    a, e, t = cfg.alpha, cfg.eta, cfg.theta_mix
    y = (1.0 - a * e * H**3) * state.dual.y \
        + e * (b - v_g_estimate - a * H**3 - 2.0 * t * H * H)
    return DualState(max(0.0, y))


def dual_update_clipped(state: LearnerState, v_g_estimate: float, b: float,
                        gamma: float, cfg: LearnerConfig) -> DualState:
    """Baseline variant: plain subgradient step clipped to [0, 2/gamma]."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    y = state.dual.y + cfg.eta * (b - v_g_estimate)
    return DualState(float(np.clip(y, 0.0, 2.0 / gamma)))


def backward_pass(state: LearnerState, ep: EpisodeRecord, inst: CmdpInstance,
                  rad: ConfidenceRadii, cfg: LearnerConfig,
                  diag: Optional[DiagnosticsLog] = None) -> Dict[str, float]:
    """Build optimistic Q/V for both signals from h = H-1 down to 0 and
    ingest the visited pair into both estimator families.

    Returns the initial-state value estimates {signal: V_{k,1}(s1)}.
    """
    fm = inst.feature_map
    H, d = inst.horizon, fm.dim
    tables = {"r": ep.revealed_rewards, "g": inst.g_table}
    sp = inst.support_probs

    for h in range(H - 1, -1, -1):
        s_vis, a_vis, s_nxt = ep.states[h], ep.actions[h], ep.states[h + 1]
        for l in SIGNALS:
            vt = state.values[l]
            hat = state.hat[(h, l)]
            tilde = state.tilde[(h, l)]
            v_next = vt.V[h + 1]

            feats = phi_v_all(fm, v_next)                       # (S, A, d)
            mean = feats @ hat.theta
            quad = np.einsum("sad,de,sae->sa", feats, hat.sigma_inv, feats)
            if float(quad.min()) < -1e-12:
                raise InvariantViolationError("negative bonus quadratic form")
            bonus = rad.beta_hat * np.sqrt(np.maximum(quad, 0.0))
            q = np.clip(tables[l][h] + mean + bonus, 0.0, H - h)
            vt.Q[h] = q
            vt.V[h] = np.einsum("sa,sa->s", state.policy.probs[h], q)
            if diag is not None:
                diag.require(bool(np.all((q >= 0.0) & (q <= H - h))),
                             f"Q outside [0, {H - h}] at h={h}")

            # Ingest the visited transition with the pre-update episode-k
            # statistics, then advance both Gram families to episode k+1.
            f1 = feats[s_vis, a_vis]
            f2 = phi_v(fm, v_next * v_next, s_vis, a_vis)
            vbar = variance_estimate(tilde, hat, f1, f2, H)
            E = offset_e(rad, bonus_norm(tilde, f2), bonus_norm(hat, f1), H)
            sbar2 = sigma_bar_sq(vbar, E, H, d)
            if diag is not None:
                p = sp[h, s_vis, a_vis]
                vals = v_next[fm.support[s_vis, a_vis]]
                true_var = float(p @ vals**2 - (p @ vals) ** 2)
                ok, slack = proposition1_check(
                    inst.theta_star[h], tilde, hat, f1, f2, vbar, true_var, H)
                diag.require(ok, f"variance-error inequality failed, slack={slack}")
                diag.require(sbar2 >= H * H / d, "variance weight below floor")
            rank1_update(hat, f1, float(v_next[s_nxt]), sbar2)
            rank1_update(tilde, f2, float(v_next[s_nxt]) ** 2, 1.0)

    return {l: float(state.values[l].V[0][inst.s1]) for l in SIGNALS}


@dataclass
class RunResult:
    """Per-episode series of one learner run; all arrays have length K."""

    v_est_r: np.ndarray
    v_est_g: np.ndarray
    v_true_r: np.ndarray
    v_true_g: np.ndarray
    dual_y: np.ndarray
    checks_run: np.ndarray
    checks_failed: np.ndarray
    final_state: Optional[LearnerState] = None


def run_pd_powers(inst: CmdpInstance, cfg: LearnerConfig, rng: RngStream,
                  collect_true_values: bool = True) -> RunResult:
    cfg.validate()
    H, d = inst.horizon, inst.feature_map.dim
    state = LearnerState.initial(inst, cfg)
    diag = DiagnosticsLog() if cfg.diagnostics else None
    out = RunResult(*(np.zeros(cfg.K) for _ in range(7)))
    v_g_prev = 0.0

    for k in range(1, cfg.K + 1):
        state.k = k
        rad = radii(k, d, H, cfg.lam, cfg.delta, cfg.B)
        if k > 1:
            state.policy = policy_update(state, cfg, diag)
            if cfg.use_clipped_dual:
                state.dual = dual_update_clipped(
                    state, v_g_prev, inst.b, cfg.gamma_for_clipped, cfg)
            else:
                state.dual = dual_update(state, v_g_prev, inst.b, H, cfg)
            if diag is not None:
                diag.require(state.dual.y >= 0.0, "dual variable negative")
                diag.require(state.dual.y <= 3.0 * H * cfg.eta * k + 1e-12,
                             "dual variable exceeded 3 H eta k")

        ep = rollout(inst, state.policy, k, rng)
        v_est = backward_pass(state, ep, inst, rad, cfg, diag)
        v_g_prev = v_est["g"]

        out.v_est_r[k - 1] = v_est["r"]
        out.v_est_g[k - 1] = v_est["g"]
        out.dual_y[k - 1] = state.dual.y
        if collect_true_values:
            out.v_true_r[k - 1] = oracle.dp_evaluate(
                inst, state.policy, ep.revealed_rewards).V[0][inst.s1]
            out.v_true_g[k - 1] = oracle.dp_evaluate(
                inst, state.policy, inst.g_table).V[0][inst.s1]
        if diag is not None:
            out.checks_run[k - 1] = diag.checked
            out.checks_failed[k - 1] = diag.failed

    out.final_state = state
    return out


def run_random_baseline(inst: CmdpInstance, K: int, rng: RngStream) -> RunResult:
    """Uniform policy for K episodes, recording the same DP-exact metrics.
    Estimated values coincide with the exact ones (no learner state)."""
    H, S, A = inst.horizon, inst.num_states, inst.num_actions
    policy = PolicyTable.uniform(H, S, A)
    out = RunResult(*(np.zeros(K) for _ in range(7)))
    cache = {}
    v_g = float(oracle.dp_evaluate(inst, policy, inst.g_table).V[0][inst.s1])
    for k in range(1, K + 1):
        ep = rollout(inst, policy, k, rng)
        key = ep.revealed_rewards.tobytes()
        if key not in cache:
            cache[key] = float(oracle.dp_evaluate(
                inst, policy, ep.revealed_rewards).V[0][inst.s1])
        out.v_true_r[k - 1] = cache[key]
        out.v_true_g[k - 1] = v_g
    out.v_est_r[:] = out.v_true_r
    out.v_est_g[:] = out.v_true_g
    return out
