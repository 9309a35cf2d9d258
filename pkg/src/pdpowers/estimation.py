"""Parameter estimation: weighted/unweighted ridge regression with
incrementally maintained inverses, variance estimates, offsets, and the
three confidence radii.

One `SpdState` holds the Gram matrix Sigma, its maintained inverse, the
target accumulator b and the regressed parameter theta = Sigma^{-1} b.
The weighted family divides each rank-one term by the per-sample variance
upper bound; the auxiliary family uses unit weights.
"""

import math
from dataclasses import dataclass

import numpy as np

REFACTOR_EVERY = 64
DRIFT_TOL = 1e-8


class NumericalCorruptionError(RuntimeError):
    """An SPD invariant broke; indicates an implementation bug upstream."""


class SpdState:
    """Ridge-regression accumulator with a maintained matrix inverse."""

    __slots__ = ("dim", "lam", "sigma", "sigma_inv", "bvec", "theta",
                 "update_count")

    def __init__(self, dim: int, lam: float):
        if lam <= 0:
            raise ValueError("lam must be positive")
        self.dim = dim
        self.lam = lam
        self.sigma = lam * np.eye(dim)
        self.sigma_inv = np.eye(dim) / lam
        self.bvec = np.zeros(dim)
        self.theta = np.zeros(dim)
        self.update_count = 0

    def drift(self) -> float:
        return float(np.max(np.abs(self.sigma @ self.sigma_inv - np.eye(self.dim))))

    def refactor(self) -> None:
        self.sigma = 0.5 * (self.sigma + self.sigma.T)
        self.sigma_inv = np.linalg.inv(self.sigma)
        self.sigma_inv = 0.5 * (self.sigma_inv + self.sigma_inv.T)
        self.theta = self.sigma_inv @ self.bvec


def rank1_update(st: SpdState, x: np.ndarray, y: float, weight_sq: float) -> SpdState:
    """Ingest one observation (x, y) with weight 1/weight_sq; returns `st`."""
    if weight_sq <= 0:
        raise ValueError("weight_sq must be positive")
    v = st.sigma_inv @ x
    denom = 1.0 + float(x @ v) / weight_sq
    if denom <= 0:
        raise NumericalCorruptionError(
            f"rank-1 denominator {denom} <= 0 on an SPD matrix")
    st.sigma += np.outer(x, x) / weight_sq
    st.bvec += x * (y / weight_sq)
    st.sigma_inv -= np.outer(v, v) / (weight_sq * denom)
    st.update_count += 1
    if st.update_count % REFACTOR_EVERY == 0 or st.drift() > DRIFT_TOL:
        st.refactor()
    else:
        st.theta = st.sigma_inv @ st.bvec
    return st


def bonus_norm(st: SpdState, x: np.ndarray) -> float:
    """||x||_{Sigma^{-1}}, with tiny negative quadratic forms clamped to 0."""
    q = float(x @ st.sigma_inv @ x)
    if q < -1e-12:
        raise NumericalCorruptionError(f"quadratic form {q} < -1e-12")
    return math.sqrt(max(q, 0.0))


@dataclass(frozen=True)
class ConfidenceRadii:
    """Confidence radii at episode k: the optimism bonus radius beta_hat
    and the variance-offset radii beta_tilde, beta_check."""

    beta_hat: float
    beta_tilde: float
    beta_check: float
    k: int
    d: int
    H: int
    lam: float
    delta: float
    B: float


def radii(k: int, d: int, H: int, lam: float, delta: float, B: float) -> ConfidenceRadii:
    if k < 1:
        raise ValueError("k must be >= 1")
    if lam <= 0:
        raise ValueError("lam must be positive")
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    arg_main = 1.0 + k / lam
    arg_tilde = 1.0 + k * H**4 / (d * lam)
    arg_conf = 8.0 * H * k * k / delta
    for name, arg in (("1+k/lam", arg_main), ("1+kH^4/(d lam)", arg_tilde),
                      ("8Hk^2/delta", arg_conf)):
        if arg <= 1.0:
            raise ValueError(f"log argument {name} = {arg} <= 1")
    log_main = math.log(arg_main)
    log_tilde = math.log(arg_tilde)
    log_conf = math.log(arg_conf)
    reg = math.sqrt(lam) * B
    beta_hat = 8.0 * math.sqrt(d * log_main * log_conf) \
        + 4.0 * math.sqrt(d) * log_conf + reg
    beta_tilde = 8.0 * H**2 * math.sqrt(d * log_tilde * log_conf) \
        + 4.0 * H**2 * log_conf + reg
    beta_check = 8.0 * d * math.sqrt(log_main * log_conf) \
        + 4.0 * math.sqrt(d) * log_conf + reg
    return ConfidenceRadii(beta_hat=beta_hat, beta_tilde=beta_tilde,
                           beta_check=beta_check, k=k, d=d, H=H, lam=lam,
                           delta=delta, B=B)


def variance_estimate(tilde_state: SpdState, hat_state: SpdState,
                      phi_v: np.ndarray, phi_v2: np.ndarray, H: int) -> float:
    """Plug-in estimate of the next-state value variance.

    First term is the second-moment regression clipped to [0, H^2]; second
    is the squared clipped first moment. May be negative: the floor is
    applied later, when composing the variance weight.
    """
    m2 = float(np.clip(phi_v2 @ tilde_state.theta, 0.0, H * H))
    m1 = float(np.clip(phi_v @ hat_state.theta, 0.0, H))
    return m2 - m1 * m1


def offset_e(rad: ConfidenceRadii, tilde_norm: float, hat_norm: float,
             H: int) -> float:
    """Offset bounding the variance-estimate error from both regressions."""
    return min(H * H, rad.beta_tilde * tilde_norm) \
        + min(H * H, 2.0 * H * rad.beta_check * hat_norm)


def sigma_bar_sq(vbar: float, E: float, H: int, d: int) -> float:
    """Variance upper bound with floor H^2/d; the weighted-ridge weight is
    its reciprocal."""
    if E < 0:
        raise ValueError("offset E must be nonnegative")
    return max(H * H / d, vbar + E)


def proposition1_check(true_theta: np.ndarray, tilde_state: SpdState,
                       hat_state: SpdState, phi_v: np.ndarray,
                       phi_v2: np.ndarray, vbar: float, true_var: float,
                       H: int):
    """Deterministic variance-error inequality (triangle + Cauchy-Schwarz).

    Returns (pass, slack). A failure beyond numerical tolerance indicates
    an implementation bug, not bad luck.
    """
    dt = tilde_state.theta - true_theta
    dh = hat_state.theta - true_theta
    tilde_err = math.sqrt(max(float(dt @ tilde_state.sigma @ dt), 0.0))
    hat_err = math.sqrt(max(float(dh @ hat_state.sigma @ dh), 0.0))
    rhs = min(H * H, bonus_norm(tilde_state, phi_v2) * tilde_err) \
        + min(H * H, 2.0 * H * bonus_norm(hat_state, phi_v) * hat_err)
    slack = rhs - abs(vbar - true_var)
    return slack >= -1e-9, slack
