"""Contextual bandit policies for one-vs-all classification environments.

Each arm keeps its own model (linear or logistic) fitted by weighted maximum
likelihood.  Bootstrap policies refit every arm each round under fresh
random weights (WB) or resample multiplicities (NPB), warm-starting from the
previous round's solution.  LinUCB and linear Thompson sampling keep
ridge-regression sufficient statistics.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.special import expit

from .dist import RngStream
from .policy import argmax_random_ties, epsilon_schedule

logger = logging.getLogger(__name__)

__all__ = [
    "OptimizationError",
    "ContextModel",
    "ArmDataset",
    "PseudoExamples",
    "LinearBayesState",
    "fit_weighted_mle",
    "wb_contextual_sample",
    "npb_contextual_sample",
    "make_pseudo_examples",
    "linucb_select",
    "lints_select",
    "BootstrapPolicy",
    "GreedyModelPolicy",
    "LinUCBPolicy",
    "LinTSPolicy",
    "UniformPolicy",
    "make_contextual_policy",
    "resolve_contextual_name",
    "CONTEXTUAL_POLICY_NAMES",
]

MODEL_KINDS = ("linear", "logistic")
DEFAULT_LR = {"linear": 0.01, "logistic": 0.1}


class OptimizationError(RuntimeError):
    """The weighted MLE diverged."""

    def __init__(self, message: str, steps: int):
        super().__init__(f"{message} (after {steps} steps)")
        self.steps = steps


@dataclass
class ContextModel:
    """Parametric map from context to expected reward."""

    kind: str
    theta: np.ndarray

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        self.theta = np.asarray(self.theta, dtype=float)

    def predict(self, x) -> np.ndarray | float:
        z = np.asarray(x, dtype=float) @ self.theta
        return expit(z) if self.kind == "logistic" else z


def _link(kind: str, z):
    return expit(z) if kind == "logistic" else z


def _loss(kind: str, z, y, v) -> float:
    if kind == "logistic":
        # log(1 + e^z) - y z, stable for large |z|
        return float(v @ (np.logaddexp(0.0, z) - y * z))
    return float(0.5 * v @ (z - y) ** 2)


def fit_weighted_mle(
    kind: str,
    X,
    y,
    weights=None,
    warm_start=None,
    tol: float = 1e-3,
    *,
    max_passes: int = 50,
    lr: float | None = None,
    batch_size: int | None = None,
    solver: str = "gd",
    rng: RngStream | None = None,
) -> np.ndarray:
    """Maximize the weighted log-likelihood of a linear or logistic model.

    The objective is normalized by the total weight, so scaling every weight
    by the same constant leaves the optimization path unchanged.

    Parameters
    ----------
    kind : {"linear", "logistic"}
        Squared loss with identity link, or cross-entropy with sigmoid link.
    X, y : array_like
        ``(n, d)`` rows and their targets.
    weights : array_like, optional
        Nonnegative per-row weights; ones when omitted.
    warm_start : array_like, optional
        Starting parameters (zeros when omitted).
    tol : float
        Stop once the norm of the weighted mean gradient, or the change in
        the weighted mean loss over one pass, drops below ``tol``.
    max_passes : int
        Passes over the data per call.
    lr : float, optional
        Base step; defaults to 0.1 (logistic) or 0.01 (linear).  Logistic
        steps decay as ``lr / sqrt(pass)``.
    batch_size : int, optional
        Mini-batch size for shuffled passes; ``None`` makes every pass a
        single full-data step.
    solver : {"gd", "newton"}
        ``"newton"`` runs damped Newton steps instead (exact in one step for
        the linear model).
    rng : RngStream, optional
        Required for mini-batch shuffling.
    """
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if n == 0:
        raise ValueError("cannot fit an empty dataset")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    total = w.sum()
    if not total > 0:
        raise ValueError("weights sum to zero")
    v = w / total
    theta = np.zeros(d) if warm_start is None else np.array(warm_start, dtype=float)

    if solver == "newton":
        return _fit_newton(kind, X, y, v, theta, tol, max_passes)
    if solver != "gd":
        raise ValueError(f"unknown solver {solver!r}")

    base_lr = DEFAULT_LR[kind] if lr is None else lr
    # divergence is detected below, so overflow warnings are noise
    with np.errstate(over="ignore", invalid="ignore"):
        return _fit_gd(kind, X, y, v, theta, tol, max_passes, base_lr, batch_size, rng)


def _fit_gd(kind, X, y, v, theta, tol, max_passes, base_lr, batch_size, rng):
    n = X.shape[0]
    prev_loss = math.inf
    for p in range(1, max_passes + 1):
        step = base_lr / math.sqrt(p) if kind == "logistic" else base_lr
        z = X @ theta
        resid = _link(kind, z) - y
        grad = X.T @ (v * resid)
        gnorm = float(np.sqrt(grad @ grad))
        if not np.isfinite(gnorm):
            raise OptimizationError("gradient is not finite", p - 1)
        if gnorm < tol:
            break
        loss = _loss(kind, z, y, v)
        if abs(prev_loss - loss) < tol:
            break
        prev_loss = loss
        if batch_size is None or batch_size >= n:
            theta = theta - step * grad
        else:
            if rng is None:
                raise ValueError("mini-batch passes need an RngStream")
            perm = rng.gen.permutation(n)
            for s in range(0, n, batch_size):
                idx = perm[s : s + batch_size]
                vb = v[idx]
                wb = vb.sum()
                if wb <= 0:
                    continue
                rb = _link(kind, X[idx] @ theta) - y[idx]
                theta = theta - step * (X[idx].T @ (vb * rb)) / wb
        if not np.all(np.isfinite(theta)):
            raise OptimizationError("parameters diverged", p)
    return theta


def _fit_newton(kind, X, y, v, theta, tol, max_iter):
    d = X.shape[1]
    for it in range(1, max_iter + 1):
        z = X @ theta
        mu = _link(kind, z)
        grad = X.T @ (v * (mu - y))
        if not np.all(np.isfinite(grad)):
            raise OptimizationError("gradient is not finite", it - 1)
        if np.sqrt(grad @ grad) < tol:
            break
        curv = v * (mu * (1.0 - mu)) if kind == "logistic" else v
        H = (X * curv[:, None]).T @ X + 1e-10 * np.eye(d)
        theta = theta - np.linalg.solve(H, grad)
        if kind == "linear":
            break
    return theta


class ArmDataset:
    """Growing set of (context, reward) rows for one arm, plus pseudo-rows."""

    def __init__(self, dim: int, pseudo_X=None, pseudo_y=None, capacity: int = 256):
        self.dim = dim
        px = np.zeros((0, dim)) if pseudo_X is None else np.atleast_2d(np.asarray(pseudo_X, dtype=float))
        py = np.zeros(0) if pseudo_y is None else np.asarray(pseudo_y, dtype=float)
        if px.shape[1] != dim or px.shape[0] != py.shape[0]:
            raise ValueError("pseudo-rows do not match the dimension")
        self.n_pseudo = px.shape[0]
        cap = self.n_pseudo + capacity
        self._X = np.zeros((cap, dim))
        self._y = np.zeros(cap)
        self._X[: self.n_pseudo] = px
        self._y[: self.n_pseudo] = py
        self._n = self.n_pseudo

    def add(self, x, y: float) -> None:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"context has shape {x.shape}, expected ({self.dim},)")
        if self._n == self._X.shape[0]:
            self._X = np.vstack([self._X, np.zeros_like(self._X)])
            self._y = np.concatenate([self._y, np.zeros_like(self._y)])
        self._X[self._n] = x
        self._y[self._n] = y
        self._n += 1

    @property
    def n_rows(self) -> int:
        """Observed rows, excluding pseudo-rows."""
        return self._n - self.n_pseudo

    def __len__(self) -> int:
        return self._n

    @property
    def X(self) -> np.ndarray:
        return self._X[: self._n]

    @property
    def y(self) -> np.ndarray:
        return self._y[: self._n]


def wb_contextual_sample(
    data: ArmDataset, kind: str, warm, rng: RngStream, *, unit_weights: bool = False, **fit_kw
) -> np.ndarray:
    """Weighted MLE under i.i.d. Exp(1) row weights (pseudo-rows included)."""
    if len(data) == 0:
        raise ValueError("empty arm dataset")
    w = np.ones(len(data)) if unit_weights else rng.gen.standard_exponential(len(data))
    return fit_weighted_mle(kind, data.X, data.y, w, warm, rng=rng, **fit_kw)


def npb_contextual_sample(data: ArmDataset, kind: str, warm, rng: RngStream, **fit_kw) -> np.ndarray:
    """MLE on a with-replacement resample of the rows (pseudo-rows included).

    The resample is represented by its multiplicities, used as weights.
    """
    n = len(data)
    if n == 0:
        raise ValueError("empty arm dataset")
    counts = rng.gen.multinomial(n, np.full(n, 1.0 / n))
    return fit_weighted_mle(kind, data.X, data.y, counts.astype(float), warm, rng=rng, **fit_kw)


@dataclass
class PseudoExamples:
    """``4 d`` pseudo-rows; ``isotropic`` flags the Gaussian fallback."""

    X: np.ndarray
    y: np.ndarray
    isotropic: bool = False


def make_pseudo_examples(contexts, dim: int, rng: RngStream | None = None, rel_eps: float = 1e-10) -> PseudoExamples:
    """Pseudo-rows from the principal axes of the context covariance.

    For every eigenpair ``(lambda_i^2, v_i)`` the rows ``+lambda_i v_i`` and
    ``-lambda_i v_i`` are emitted with label 1 and again with label 0.  With
    fewer than ``dim`` contexts or a singular covariance, ``2 dim`` draws from
    N(0, I) take the place of the ``±lambda_i v_i`` points.
    """
    C = None if contexts is None else np.atleast_2d(np.asarray(contexts, dtype=float))
    points = None
    if C is not None and C.shape[0] >= max(dim, 2) and C.shape[1] == dim:
        cov = np.cov(C, rowvar=False).reshape(dim, dim)
        evals, evecs = np.linalg.eigh(cov)
        if evals.max() > 0 and evals.min() > rel_eps * evals.max():
            lam = np.sqrt(evals)
            axes = (evecs * lam).T  # row i is lambda_i v_i
            points = np.vstack([axes, -axes])
    isotropic = points is None
    if isotropic:
        logger.warning("pseudo-examples: falling back to isotropic Gaussian contexts")
        rng = rng if rng is not None else RngStream(0)
        points = rng.gen.standard_normal((2 * dim, dim))
    X = np.vstack([points, points])
    y = np.concatenate([np.ones(len(points)), np.zeros(len(points))])
    return PseudoExamples(X, y, isotropic)


class LinearBayesState:
    """Ridge statistics ``A = ridge I + sum x x'`` and ``b = sum r x``."""

    def __init__(self, dim: int, ridge: float = 1.0):
        if ridge <= 0:
            raise ValueError("ridge must be positive")
        self.dim, self.ridge = dim, ridge
        self.A = ridge * np.eye(dim)
        self.b = np.zeros(dim)
        self._chol = None

    def update(self, x, r: float) -> None:
        x = np.asarray(x, dtype=float)
        self.A += np.outer(x, x)
        self.b += r * x
        self._chol = None

    def cholesky(self):
        if self._chol is None:
            try:
                self._chol = cho_factor(self.A, lower=True)
            except np.linalg.LinAlgError as exc:
                raise np.linalg.LinAlgError("precision matrix lost positive definiteness") from exc
        return self._chol

    def mean(self) -> np.ndarray:
        return cho_solve(self.cholesky(), self.b)

    def width(self, x) -> float:
        """``sqrt(x' A^{-1} x)``."""
        x = np.asarray(x, dtype=float)
        return float(np.sqrt(x @ cho_solve(self.cholesky(), x)))

    def sample(self, scale: float, rng: RngStream) -> np.ndarray:
        """Draw from ``N(A^{-1} b, scale^2 A^{-1})``."""
        L = self.cholesky()[0]
        z = rng.gen.standard_normal(self.dim)
        return self.mean() + scale * solve_triangular(L.T, z, lower=False)


def linucb_select(states, x, alpha: float, rng: RngStream) -> int:
    """Arm maximizing ``x'theta_hat + alpha * ||x||_{A^{-1}}``."""
    scores = np.array([x @ s.mean() + alpha * s.width(x) for s in states])
    return int(argmax_random_ties(scores[None, :], rng)[0])


def lints_select(states, x, scale: float, rng: RngStream) -> int:
    """Arm maximizing ``x'theta`` for ``theta ~ N(A^{-1} b, scale^2 A^{-1})``."""
    scores = np.array([x @ s.sample(scale, rng) for s in states])
    return int(argmax_random_ties(scores[None, :], rng)[0])


# ---------------------------------------------------------------------------
# single-run contextual policies


class _ModelPolicy:
    def __init__(
        self,
        n_arms: int,
        dim: int,
        model: str = "logistic",
        *,
        contexts=None,
        pseudo: PseudoExamples | None = None,
        tol: float = 1e-3,
        max_passes: int = 50,
        lr: float | None = None,
        batch_size: int | None = None,
        solver: str = "gd",
        rng: RngStream | None = None,
    ):
        if model not in MODEL_KINDS:
            raise ValueError(f"unknown model {model!r}")
        self.n_arms, self.dim, self.model = n_arms, dim, model
        if pseudo is None:
            pseudo = make_pseudo_examples(contexts, dim, rng)
        self.pseudo = pseudo
        self.data = [ArmDataset(dim, pseudo.X, pseudo.y) for _ in range(n_arms)]
        self.theta = np.zeros((n_arms, dim))
        self.fit_kw = dict(tol=tol, max_passes=max_passes, lr=lr, batch_size=batch_size, solver=solver)

    def update(self, x, arm: int, reward: float) -> None:
        self.data[arm].add(x, reward)


class BootstrapPolicy(_ModelPolicy):
    """NPB or WB over per-arm linear/logistic models (one bootstrap fit per arm per round)."""

    def __init__(self, n_arms, dim, model="logistic", *, method: str = "wb", **kw):
        super().__init__(n_arms, dim, model, **kw)
        if method not in ("wb", "npb"):
            raise ValueError(f"unknown bootstrap method {method!r}")
        self.method = method
        self.name = f"{method}-{'log' if model == 'logistic' else 'lin'}"

    def select(self, x, rng: RngStream) -> int:
        sampler = wb_contextual_sample if self.method == "wb" else npb_contextual_sample
        for j in range(self.n_arms):
            self.theta[j] = sampler(self.data[j], self.model, self.theta[j], rng, **self.fit_kw)
        scores = _link(self.model, self.theta @ x)
        return int(argmax_random_ties(scores[None, :], rng)[0])


class GreedyModelPolicy(_ModelPolicy):
    """Epsilon-greedy over plain MLE fits; explores with probability ``c / (c + t)``."""

    def __init__(self, n_arms, dim, model="logistic", *, schedule_c: float = 50.0, **kw):
        super().__init__(n_arms, dim, model, **kw)
        self.schedule_c = schedule_c
        self.t = 0
        self.name = f"eg-{'log' if model == 'logistic' else 'lin'}"
        for j in range(n_arms):
            self._refit(j)

    def _refit(self, j: int) -> None:
        d = self.data[j]
        self.theta[j] = fit_weighted_mle(self.model, d.X, d.y, None, self.theta[j], **self.fit_kw)

    def select(self, x, rng: RngStream) -> int:
        self.t += 1
        if rng.gen.random() < epsilon_schedule(self.t, self.schedule_c):
            return int(rng.gen.integers(0, self.n_arms))
        scores = _link(self.model, self.theta @ x)
        return int(argmax_random_ties(scores[None, :], rng)[0])

    def update(self, x, arm, reward):
        super().update(x, arm, reward)
        self._refit(arm)


class LinUCBPolicy:
    name = "ucb-lin"

    def __init__(self, n_arms: int, dim: int, *, alpha: float = 1.0, ridge: float = 1.0, **_):
        self.alpha = alpha
        self.states = [LinearBayesState(dim, ridge) for _ in range(n_arms)]

    def select(self, x, rng):
        return linucb_select(self.states, x, self.alpha, rng)

    def update(self, x, arm, reward):
        self.states[arm].update(x, reward)


class LinTSPolicy:
    name = "ts-lin"

    def __init__(self, n_arms: int, dim: int, *, scale: float = 1.0, ridge: float = 1.0, **_):
        self.scale = scale
        self.states = [LinearBayesState(dim, ridge) for _ in range(n_arms)]

    def select(self, x, rng):
        return lints_select(self.states, x, self.scale, rng)

    def update(self, x, arm, reward):
        self.states[arm].update(x, reward)


class UniformPolicy:
    name = "random"

    def __init__(self, n_arms: int, dim: int = 0, **_):
        self.n_arms = n_arms

    def select(self, x, rng):
        return int(rng.gen.integers(0, self.n_arms))

    def update(self, x, arm, reward):
        pass


CONTEXTUAL_POLICY_NAMES = (
    "eg-lin",
    "eg-log",
    "wb-lin",
    "wb-log",
    "npb-lin",
    "npb-log",
    "ucb-lin",
    "ts-lin",
    "random",
)

_ALIASES = {"ucb": "ucb-lin", "linucb": "ucb-lin", "ts": "ts-lin", "lints": "ts-lin"}


def resolve_contextual_name(name: str) -> str:
    """Canonical policy name, accepting the aliases ``ucb``, ``linucb``, ``ts`` and ``lints``."""
    canon = _ALIASES.get(name.lower(), name.lower())
    if canon not in CONTEXTUAL_POLICY_NAMES:
        raise ValueError(f"unknown contextual policy {name!r}; valid names: {', '.join(CONTEXTUAL_POLICY_NAMES)}")
    return canon


def make_contextual_policy(name: str, n_arms: int, dim: int, *, contexts=None, rng: RngStream | None = None, **params):
    """Build a contextual policy from its name (see ``CONTEXTUAL_POLICY_NAMES``)."""
    name = resolve_contextual_name(name)
    if name == "ucb-lin":
        return LinUCBPolicy(n_arms, dim, **params)
    if name == "ts-lin":
        return LinTSPolicy(n_arms, dim, **params)
    if name == "random":
        return UniformPolicy(n_arms, dim)
    method, suffix = name.split("-")
    model = "logistic" if suffix == "log" else "linear"
    if method == "eg":
        return GreedyModelPolicy(n_arms, dim, model, contexts=contexts, rng=rng, **params)
    return BootstrapPolicy(n_arms, dim, model, method=method, contexts=contexts, rng=rng, **params)
