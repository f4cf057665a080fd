"""Ternary win/draw/loss likelihood with a draw-margin parameter.

With latent strength difference ``f`` (positive favours team1) and draw
margin ``alpha > 0``:

    p_win  = 1 / (1 + exp(alpha - f))
    p_loss = 1 / (1 + exp(alpha + f))
    p_draw = (exp(2*alpha) - 1) * p_win * p_loss

The three sum to one identically, ``alpha -> 0`` recovers the plain
logistic pairwise model, and the draw probability at ``f = 0`` is
``tanh(alpha/2)``.  Everything is computed through sigmoids/softplus so it
is stable for |f| far beyond any realistic strength difference, and the
expressions are arranged so negating ``f`` exchanges the win/loss roles
bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit

from .data import Outcome

__all__ = [
    "DrawParam",
    "PredictiveDistribution",
    "outcome_probs",
    "log_likelihood",
    "log_likelihood_derivs",
]


@dataclass(frozen=True)
class DrawParam:
    """Draw margin, stored as log(alpha) so optimizers keep it positive."""

    log_alpha: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.log_alpha):
            raise ValueError(f"log_alpha must be finite, got {self.log_alpha!r}")

    @property
    def alpha(self) -> float:
        return math.exp(self.log_alpha)

    @classmethod
    def from_alpha(cls, alpha: float) -> "DrawParam":
        if not (alpha > 0.0) or not math.isfinite(alpha):
            raise ValueError(f"alpha must be positive and finite, got {alpha!r}")
        return cls(log_alpha=math.log(alpha))


@dataclass(frozen=True)
class PredictiveDistribution:
    """Probability triple over (win, draw, loss) from team1's perspective."""

    p_w: float
    p_d: float
    p_l: float

    def __post_init__(self) -> None:
        for name, p in (("p_w", self.p_w), ("p_d", self.p_d), ("p_l", self.p_l)):
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"{name} = {p!r} outside [0, 1]")
        total = self.p_w + self.p_d + self.p_l
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total!r}, expected 1 within 1e-9")

    def prob(self, outcome: Outcome) -> float:
        if outcome is Outcome.TEAM1_WIN:
            return self.p_w
        if outcome is Outcome.DRAW:
            return self.p_d
        return self.p_l

    def as_array(self) -> np.ndarray:
        return np.array([self.p_w, self.p_d, self.p_l])


def _log_expm1(x: float) -> float:
    """log(exp(x) - 1) for x > 0 without overflow."""
    if x < 30.0:
        return math.log(math.expm1(x))
    return x + math.log1p(-math.exp(-x))


def outcome_probs(f: float, d: DrawParam) -> PredictiveDistribution:
    """Exact outcome distribution at a known latent difference ``f``."""
    alpha = d.alpha
    p_w = float(expit(f - alpha))
    p_l = float(expit(-f - alpha))
    # grouping (p_w * p_l) first keeps f -> -f an exact win/loss exchange
    p_d = math.expm1(2.0 * alpha) * (p_w * p_l)
    return PredictiveDistribution(p_w=p_w, p_d=min(p_d, 1.0), p_l=p_l)


def _probs_arrays(f: np.ndarray, alpha: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized (p_w, p_d, p_l) without constructing distribution objects."""
    p_w = expit(f - alpha)
    p_l = expit(-f - alpha)
    p_d = math.expm1(2.0 * alpha) * (p_w * p_l)
    return p_w, p_d, p_l


def loglik_vector(codes: np.ndarray, f: np.ndarray, alpha: float) -> np.ndarray:
    """Per-match log-likelihood for outcome codes (+1 win, 0 draw, -1 loss)."""
    lw = log_expit(f - alpha)
    ll = log_expit(-f - alpha)
    draw = _log_expm1(2.0 * alpha) + (lw + ll)
    out = np.where(codes > 0, lw, np.where(codes < 0, ll, draw))
    return out


def loglik_derivs_vector(
    codes: np.ndarray, f: np.ndarray, alpha: float
) -> tuple[np.ndarray, np.ndarray]:
    """First and second derivatives of the per-match log-likelihood in f.

    The second derivative is <= 0 everywhere (log-concave likelihood).
    """
    p_w = expit(f - alpha)
    p_l = expit(-f - alpha)
    q_w = expit(alpha - f)  # 1 - p_w
    q_l = expit(alpha + f)  # 1 - p_l
    d1 = np.where(codes > 0, q_w, np.where(codes < 0, -q_l, q_w - q_l))
    d2 = np.where(
        codes > 0,
        -(p_w * q_w),
        np.where(codes < 0, -(p_l * q_l), -(p_w * q_w + p_l * q_l)),
    )
    return d1, d2


def log_likelihood(y: Outcome, f: float, d: DrawParam) -> float:
    """log p(y | f, alpha)."""
    val = loglik_vector(np.array([y.code]), np.array([float(f)]), d.alpha)
    return float(val[0])


def log_likelihood_derivs(y: Outcome, f: float, d: DrawParam) -> tuple[float, float]:
    """(d/df, d^2/df^2) of log p(y | f, alpha)."""
    d1, d2 = loglik_derivs_vector(np.array([y.code]), np.array([float(f)]), d.alpha)
    return float(d1[0]), float(d2[0])
