"""Gaussian process outcome classifier fitted with Laplace's method.

The latent match quality ``f`` has a zero-mean GP prior with the sparse
lineup kernel; the ternary likelihood ties it to observed outcomes.  The
posterior mode is found by damped Newton ascent on

    Psi(f) = log p(y | f) - 0.5 * f' K^{-1} f

parametrized through dual coefficients ``a`` with ``f = K a`` so no solve
against K is ever needed.  Prediction and the evidence use the standard
well-conditioned factor B = I + W^{1/2} K W^{1/2} (W is the negated
likelihood Hessian, nonnegative because the likelihood is log-concave).
"""

from __future__ import annotations

import base64
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.optimize

from .data import Dataset, MatchRecord, Outcome
from .errors import DataError, NumericalError
from .kernel import (
    SELF_OVERLAP,
    KernelParams,
    MatchVector,
    build_match_vector,
    overlap_matrix,
)
from .likelihood import (
    DrawParam,
    PredictiveDistribution,
    _probs_arrays,
    loglik_derivs_vector,
    loglik_vector,
    outcome_probs,
)

logger = logging.getLogger(__name__)

__all__ = [
    "Hyperparams",
    "LaplacePosterior",
    "GPModel",
    "fit",
    "log_marginal",
    "predict_latent",
    "predict_outcomes",
    "quadrature_outcome_probs",
    "optimize_hyperparams",
    "train_model",
    "save_model",
    "load_model",
]

MODEL_MAGIC = "lineupgp/model"
MODEL_VERSION = 1

_NEWTON_TOL = 1e-10
_NEWTON_MAX_ITER = 100
# tighter than the posterior's published 1e-6 stationarity bound
_STATIONARITY_TOL = 1e-8

_GH_POINTS = 32
_gh_nodes, _gh_weights = np.polynomial.hermite.hermgauss(_GH_POINTS)
_gh_weights = _gh_weights / math.sqrt(math.pi)


@dataclass(frozen=True)
class Hyperparams:
    """Kernel scales plus the draw margin."""

    kernel: KernelParams
    draw: DrawParam

    @classmethod
    def create(
        cls,
        sigma2: float = 1.0,
        sigma2_home: float = 1.0,
        alpha: float = 0.5,
        jitter: float | None = None,
    ) -> "Hyperparams":
        return cls(
            kernel=KernelParams(sigma2=sigma2, sigma2_home=sigma2_home, jitter=jitter),
            draw=DrawParam.from_alpha(alpha),
        )

    @property
    def alpha(self) -> float:
        return self.draw.alpha


@dataclass(frozen=True)
class LaplacePosterior:
    """Laplace approximation at the unique mode of Psi.

    ``mode = K @ dual_coef`` with K including ``jitter`` on the diagonal;
    ``grad`` is the likelihood gradient at the mode, ``sqrt_w`` the square
    root of its negated Hessian, and ``chol_b`` the lower Cholesky factor
    of B = I + W^{1/2} K W^{1/2}.
    """

    mode: np.ndarray
    grad: np.ndarray
    sqrt_w: np.ndarray
    chol_b: np.ndarray
    dual_coef: np.ndarray
    loglik: float
    jitter: float
    newton_iters: int
    train_vectors: tuple[MatchVector, ...]
    train_outcomes: tuple[Outcome, ...]
    hyper: Hyperparams

    @property
    def n(self) -> int:
        return len(self.mode)


class _CholeskyFailure(Exception):
    pass


@dataclass(frozen=True)
class _TrainParts:
    """Hyperparameter-independent pieces of the training Gram."""

    vectors: tuple[MatchVector, ...]
    outcomes: tuple[Outcome, ...]
    codes: np.ndarray
    overlap: np.ndarray
    home_outer: np.ndarray


def _make_parts(
    vectors: Sequence[MatchVector], outcomes: Sequence[Outcome], threads: int = 1
) -> _TrainParts:
    overlap = overlap_matrix(vectors, vectors, threads=threads).astype(np.float64)
    homes = np.array([v.home for v in vectors], dtype=np.int64)
    return _TrainParts(
        vectors=tuple(vectors),
        outcomes=tuple(outcomes),
        codes=np.array([o.code for o in outcomes], dtype=np.int64),
        overlap=overlap,
        home_outer=np.outer(homes, homes).astype(np.float64),
    )


def _assemble_gram(parts: _TrainParts, kp: KernelParams, jitter: float) -> np.ndarray:
    k = kp.sigma2 * parts.overlap + kp.sigma2_home * parts.home_outer
    if jitter > 0.0:
        k[np.diag_indices_from(k)] += jitter
    return k


def _chol_lower(mat: np.ndarray) -> np.ndarray:
    try:
        return sla.cholesky(mat, lower=True)
    except sla.LinAlgError as exc:
        raise _CholeskyFailure(str(exc)) from None


def _newton_mode(
    k: np.ndarray, codes: np.ndarray, alpha: float, a0: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray, int]:
    """Damped Newton ascent; returns (f_hat, a_hat, iterations).

    Starts from a = 0 (hence f = 0) unless ``a0`` is given.  The objective
    is strictly concave in f, so every start reaches the same mode.
    """
    n = len(codes)
    a = np.zeros(n) if a0 is None else np.asarray(a0, dtype=float).copy()
    f = k @ a
    psi = float(np.sum(loglik_vector(codes, f, alpha))) - 0.5 * float(a @ f)
    d1, d2 = loglik_derivs_vector(codes, f, alpha)
    last_delta = math.inf
    for iteration in range(1, _NEWTON_MAX_ITER + 1):
        w = -d2
        sw = np.sqrt(w)
        b_mat = np.eye(n) + (sw[:, None] * k) * sw[None, :]
        chol = _chol_lower(b_mat)
        b_vec = w * f + d1
        kb = k @ b_vec
        a_new = b_vec - sw * sla.cho_solve((chol, True), sw * kb)
        step = a_new - a

        t = 1.0
        improved = False
        while t >= 1e-12:
            a_try = a + t * step
            f_try = k @ a_try
            psi_try = float(np.sum(loglik_vector(codes, f_try, alpha))) - 0.5 * float(
                a_try @ f_try
            )
            if psi_try > psi:
                improved = True
                break
            t *= 0.5

        if not improved:
            # ascent exhausted at floating-point resolution
            if _stationary(f, k, d1, np.max(np.abs(f)), 1e-6):
                return f, a, iteration - 1
            raise NumericalError(
                "Newton ascent stalled away from stationarity "
                f"(|dPsi| floor reached after {iteration - 1} iterations)"
            )

        last_delta = psi_try - psi
        a, f, psi = a_try, f_try, psi_try
        d1, d2 = loglik_derivs_vector(codes, f, alpha)
        if last_delta < _NEWTON_TOL and _stationary(
            f, k, d1, np.max(np.abs(f)), _STATIONARITY_TOL
        ):
            return f, a, iteration
    raise NumericalError(
        f"Laplace Newton did not converge after {_NEWTON_MAX_ITER} iterations "
        f"(final |dPsi| = {last_delta:.3e})"
    )


def _stationary(
    f: np.ndarray, k: np.ndarray, d1: np.ndarray, f_scale: float, tol: float
) -> bool:
    return float(np.max(np.abs(f - k @ d1))) <= tol * max(1.0, float(f_scale))


def _fit_parts(parts: _TrainParts, hyper: Hyperparams) -> LaplacePosterior:
    kp = hyper.kernel
    alpha = hyper.alpha
    jitter = kp.effective_jitter
    while True:
        k = _assemble_gram(parts, kp, jitter)
        try:
            f_hat, a_hat, iters = _newton_mode(k, parts.codes, alpha)
            d1, d2 = loglik_derivs_vector(parts.codes, f_hat, alpha)
            sqrt_w = np.sqrt(-d2)
            chol_b = _chol_lower(np.eye(len(f_hat)) + (sqrt_w[:, None] * k) * sqrt_w[None, :])
        except _CholeskyFailure:
            nxt = jitter * 10.0 if jitter > 0.0 else 1e-6 * kp.sigma2
            if nxt > kp.max_jitter or nxt <= jitter:
                raise NumericalError(
                    f"Gram factorization failed even at jitter {jitter:g} "
                    f"(cap {kp.max_jitter:g})"
                ) from None
            logger.warning("Cholesky failure; escalating jitter %g -> %g", jitter, nxt)
            jitter = nxt
            continue
        return LaplacePosterior(
            mode=f_hat,
            grad=d1,
            sqrt_w=sqrt_w,
            chol_b=chol_b,
            dual_coef=a_hat,
            loglik=float(np.sum(loglik_vector(parts.codes, f_hat, alpha))),
            jitter=jitter,
            newton_iters=iters,
            train_vectors=parts.vectors,
            train_outcomes=parts.outcomes,
            hyper=hyper,
        )


def fit(train: Dataset, hyper: Hyperparams, *, threads: int = 1) -> LaplacePosterior:
    """Laplace fit on a training dataset; needs at least one match."""
    if train.n < 1:
        raise DataError("cannot fit on an empty training set")
    vectors = [build_match_vector(r, train.registry) for r in train.records]
    outcomes = [r.outcome for r in train.records]
    return _fit_parts(_make_parts(vectors, outcomes, threads=threads), hyper)


def log_marginal(post: LaplacePosterior) -> float:
    """Laplace evidence: log p(y|f_hat) - 0.5 f_hat' K^{-1} f_hat - sum log diag L_B."""
    quad = 0.5 * float(post.mode @ post.dual_coef)
    half_logdet = float(np.sum(np.log(np.diag(post.chol_b))))
    return post.loglik - quad - half_logdet


def _latent_batch(
    post: LaplacePosterior, vectors: Sequence[MatchVector]
) -> tuple[np.ndarray, np.ndarray]:
    kp = post.hyper.kernel
    trains = list(post.train_vectors)
    overlap = overlap_matrix(list(vectors), trains)
    homes_test = np.array([v.home for v in vectors], dtype=np.int64)
    homes_train = np.array([v.home for v in trains], dtype=np.int64)
    k_star = kp.sigma2 * overlap.astype(np.float64) + kp.sigma2_home * np.outer(
        homes_test, homes_train
    ).astype(np.float64)
    mu = k_star @ post.grad
    v = sla.solve_triangular(post.chol_b, post.sqrt_w[:, None] * k_star.T, lower=True)
    k_ss = SELF_OVERLAP * kp.sigma2 + kp.sigma2_home * homes_test.astype(np.float64) ** 2
    var = k_ss - np.einsum("ij,ij->j", v, v)
    bad = var < -1e-8
    if np.any(bad):
        logger.warning(
            "clamping %d negative predictive variance(s), most negative %g",
            int(np.sum(bad)),
            float(np.min(var)),
        )
    return mu, np.maximum(var, 0.0)


def predict_latent(post: LaplacePosterior, test: MatchVector) -> tuple[float, float]:
    """Posterior latent mean and variance for one match vector."""
    mu, var = _latent_batch(post, [test])
    return float(mu[0]), float(var[0])


def quadrature_outcome_probs(mu: float, var: float, d: DrawParam) -> PredictiveDistribution:
    """Outcome probabilities under f* ~ Normal(mu, var), by 32-node quadrature.

    ``var = 0`` returns the exact point evaluation; otherwise the three
    components are integrated separately and renormalized to sum to one.
    """
    if var < 0.0:
        raise ValueError(f"variance must be >= 0, got {var!r}")
    if var == 0.0:
        return outcome_probs(mu, d)
    x = mu + math.sqrt(2.0 * var) * _gh_nodes
    p_w, p_d, p_l = _probs_arrays(x, d.alpha)
    w_bar = float(_gh_weights @ p_w)
    d_bar = float(_gh_weights @ p_d)
    l_bar = float(_gh_weights @ p_l)
    total = w_bar + d_bar + l_bar
    return PredictiveDistribution(p_w=w_bar / total, p_d=d_bar / total, p_l=l_bar / total)


def predict_outcomes(post: LaplacePosterior, test: MatchVector) -> PredictiveDistribution:
    """Posterior predictive win/draw/loss probabilities for one match."""
    mu, var = predict_latent(post, test)
    return quadrature_outcome_probs(mu, var, post.hyper.draw)


class _BudgetExhausted(Exception):
    pass


def optimize_hyperparams(
    train: Dataset,
    init: Hyperparams,
    budget: int = 200,
    *,
    threads: int = 1,
) -> Hyperparams:
    """Evidence maximization over (log sigma2, log sigma2_home, log alpha).

    Nelder-Mead restarted from ``init`` and two fixed perturbations of it;
    ``budget`` caps the total number of evidence evaluations (repeated
    points hit a cache and are not recounted).  Deterministic given inputs;
    returns the best point actually evaluated, so the result's evidence is
    never below the init's.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget!r}")
    if train.n < 1:
        raise DataError("cannot optimize on an empty training set")
    vectors = [build_match_vector(r, train.registry) for r in train.records]
    outcomes = [r.outcome for r in train.records]
    parts = _make_parts(vectors, outcomes, threads=threads)
    requested_jitter = init.kernel.jitter

    theta0 = np.array(
        [
            math.log(init.kernel.sigma2),
            math.log(max(init.kernel.sigma2_home, 1e-12)),
            init.draw.log_alpha,
        ]
    )

    def hyper_at(theta: np.ndarray) -> Hyperparams:
        return Hyperparams(
            kernel=KernelParams(
                sigma2=math.exp(theta[0]),
                sigma2_home=math.exp(theta[1]),
                jitter=requested_jitter,
            ),
            draw=DrawParam(log_alpha=float(theta[2])),
        )

    used = 0
    cache: dict[tuple[float, float, float], float] = {}
    best_ev = -math.inf
    best = init

    def objective(theta: np.ndarray, exact: Hyperparams | None = None) -> float:
        nonlocal used, best_ev, best
        key = (float(theta[0]), float(theta[1]), float(theta[2]))
        if key in cache:
            return cache[key]
        if used >= budget:
            raise _BudgetExhausted
        used += 1
        try:
            # round-tripping init through exp(log(.)) can slip an ulp, so the
            # first evaluation keeps the caller's exact parameter object
            h = exact if exact is not None else hyper_at(theta)
            ev = log_marginal(_fit_parts(parts, h))
        except (NumericalError, ValueError, OverflowError):
            cache[key] = 1e300
            return 1e300
        if ev > best_ev:
            best_ev = ev
            best = h
        cache[key] = -ev
        return -ev

    try:
        objective(theta0, exact=init)
        starts = [theta0, theta0 + 0.5, theta0 - 0.5]
        for start in starts:
            if used >= budget:
                break
            val = objective(start)
            if not val < 1e299:
                # evidence undefined at this start; nudge it in log-space
                start = start + 0.25
            scipy.optimize.minimize(
                objective,
                start,
                method="Nelder-Mead",
                options={"maxfev": max(1, budget - used), "xatol": 1e-3, "fatol": 1e-7},
            )
    except _BudgetExhausted:
        pass
    return best


def _extended_registry(
    registry: Mapping[str, int], rec: MatchRecord
) -> Mapping[str, int]:
    extra = [p for p in rec.players if p not in registry]
    if not extra:
        return registry
    merged = dict(registry)
    for pid in sorted(extra):
        merged[pid] = len(merged)
    return merged


@dataclass
class GPModel:
    """Fitted posterior plus the registry needed to score new records.

    Players unseen in training get fresh indices on the fly; they carry
    zero covariance with every training match, so this matches scoring
    under the train/test union registry.
    """

    posterior: LaplacePosterior
    registry: dict[str, int]
    name: str = "gp"

    def vector_for(self, rec: MatchRecord) -> MatchVector:
        return build_match_vector(rec, _extended_registry(self.registry, rec))

    def predict_latent(self, rec: MatchRecord) -> tuple[float, float]:
        return predict_latent(self.posterior, self.vector_for(rec))

    def predict(self, rec: MatchRecord) -> PredictiveDistribution:
        return predict_outcomes(self.posterior, self.vector_for(rec))


def train_model(
    train: Dataset,
    hyper: Hyperparams,
    *,
    optimize: bool = False,
    budget: int = 200,
    threads: int = 1,
) -> GPModel:
    """Fit (optionally after an evidence search) and wrap with the registry."""
    if optimize:
        hyper = optimize_hyperparams(train, hyper, budget=budget, threads=threads)
    post = fit(train, hyper, threads=threads)
    return GPModel(posterior=post, registry=dict(train.registry))


def _encode_array(arr: np.ndarray, dtype: str) -> dict:
    cast = np.ascontiguousarray(arr.astype(dtype))
    return {
        "dtype": dtype,
        "shape": list(cast.shape),
        "data": base64.b64encode(cast.tobytes()).decode("ascii"),
    }


def _decode_array(obj: dict) -> np.ndarray:
    raw = base64.b64decode(obj["data"])
    return np.frombuffer(raw, dtype=obj["dtype"]).reshape(obj["shape"]).copy()


def save_model(model: GPModel, path: str | Path) -> None:
    """Versioned text dump; reload reproduces predictions bit-identically."""
    post = model.posterior
    ids = [None] * len(model.registry)
    for pid, idx in model.registry.items():
        ids[idx] = pid
    payload = {
        "magic": MODEL_MAGIC,
        "version": MODEL_VERSION,
        "hyper": {
            "sigma2": post.hyper.kernel.sigma2,
            "sigma2_home": post.hyper.kernel.sigma2_home,
            "jitter": post.hyper.kernel.jitter,
            "log_alpha": post.hyper.draw.log_alpha,
        },
        "jitter_used": post.jitter,
        "newton_iters": post.newton_iters,
        "loglik": post.loglik,
        "registry": ids,
        "outcomes": "".join(o.token for o in post.train_outcomes),
        "homes": [v.home for v in post.train_vectors],
        "plus": _encode_array(np.array([v.plus_indices for v in post.train_vectors]), "<i4"),
        "minus": _encode_array(np.array([v.minus_indices for v in post.train_vectors]), "<i4"),
        "mode": _encode_array(post.mode, "<f8"),
        "grad": _encode_array(post.grad, "<f8"),
        "sqrt_w": _encode_array(post.sqrt_w, "<f8"),
        "dual_coef": _encode_array(post.dual_coef, "<f8"),
        "chol_b": _encode_array(post.chol_b, "<f8"),
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_model(path: str | Path) -> GPModel:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read model file {path}: {exc}") from None
    if not isinstance(payload, dict) or payload.get("magic") != MODEL_MAGIC:
        raise DataError(f"{path} is not a lineupgp model file")
    if payload.get("version") != MODEL_VERSION:
        raise DataError(
            f"unsupported model version {payload.get('version')!r} "
            f"(this build reads version {MODEL_VERSION})"
        )
    hyper_raw = payload["hyper"]
    hyper = Hyperparams(
        kernel=KernelParams(
            sigma2=hyper_raw["sigma2"],
            sigma2_home=hyper_raw["sigma2_home"],
            jitter=hyper_raw["jitter"],
        ),
        draw=DrawParam(log_alpha=hyper_raw["log_alpha"]),
    )
    plus = _decode_array(payload["plus"])
    minus = _decode_array(payload["minus"])
    homes = payload["homes"]
    vectors = tuple(
        MatchVector(plus_indices=plus[i], minus_indices=minus[i], home=homes[i])
        for i in range(len(homes))
    )
    outcomes = tuple(Outcome.from_token(t) for t in payload["outcomes"])
    post = LaplacePosterior(
        mode=_decode_array(payload["mode"]),
        grad=_decode_array(payload["grad"]),
        sqrt_w=_decode_array(payload["sqrt_w"]),
        chol_b=_decode_array(payload["chol_b"]),
        dual_coef=_decode_array(payload["dual_coef"]),
        loglik=payload["loglik"],
        jitter=payload["jitter_used"],
        newton_iters=payload["newton_iters"],
        train_vectors=vectors,
        train_outcomes=outcomes,
        hyper=hyper,
    )
    registry = {pid: i for i, pid in enumerate(payload["registry"])}
    return GPModel(posterior=post, registry=registry)
