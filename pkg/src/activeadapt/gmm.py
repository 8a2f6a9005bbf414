"""Four-component Gaussian mixture over scalar informativeness scores,
fitted by semi-supervised EM.

Labeled scores arrive with a hard component assignment (their observation
label) and keep a one-hot responsibility through every iteration; unlabeled
scores get soft posterior responsibilities. The M step blends the two sides
with weight alpha on labeled sums and (1 - alpha) on unlabeled sums. All
density arithmetic runs in the log domain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

N_COMPONENTS = 4
VARIANCE_FLOOR = 1e-6
RESPONSIBILITY_FLOOR = 1e-12


@dataclass(frozen=True)
class GmmParams:
    """Mixture weights, means, and variances of the four components."""

    pi: np.ndarray
    mu: np.ndarray
    sigma2: np.ndarray

    def __post_init__(self):
        for name in ("pi", "mu", "sigma2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
            if getattr(self, name).shape != (N_COMPONENTS,):
                raise ValueError(f"{name} must have shape ({N_COMPONENTS},)")
        if abs(self.pi.sum() - 1.0) > 1e-9 or (self.pi < -1e-12).any():
            raise ValueError("mixture weights must be a probability vector")
        if (self.sigma2 < VARIANCE_FLOOR * (1 - 1e-9)).any():
            raise ValueError(f"variances must be >= {VARIANCE_FLOOR}")

    def as_tuple(self):
        return self.pi, self.mu, self.sigma2

    def max_abs_diff(self, other: "GmmParams") -> float:
        return max(
            float(np.max(np.abs(a - b)))
            for a, b in zip(self.as_tuple(), other.as_tuple())
        )


@dataclass
class GmmTrainSet:
    """Scores feeding one EM fit.

    labeled_components take values in 1..4. alpha defaults to the labeled
    fraction |D_L| / (|D_L| + |D_U|), a proper convex weight; pass an
    explicit value to override.
    """

    labeled_scores: np.ndarray
    labeled_components: np.ndarray
    unlabeled_scores: np.ndarray = field(default_factory=lambda: np.zeros(0))
    alpha: float | None = None

    def __post_init__(self):
        self.labeled_scores = np.asarray(self.labeled_scores, dtype=float).ravel()
        self.labeled_components = np.asarray(self.labeled_components, dtype=int).ravel()
        self.unlabeled_scores = np.asarray(self.unlabeled_scores, dtype=float).ravel()
        if self.labeled_scores.size == 0:
            raise ValueError("EM initialization needs at least one labeled score")
        if self.labeled_scores.shape != self.labeled_components.shape:
            raise ValueError("labeled scores and components must align")
        if ((self.labeled_components < 1) | (self.labeled_components > N_COMPONENTS)).any():
            raise ValueError(f"components must lie in 1..{N_COMPONENTS}")
        if self.alpha is None:
            n_l, n_u = self.labeled_scores.size, self.unlabeled_scores.size
            self.alpha = n_l / (n_l + n_u)
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")


# -- densities ---------------------------------------------------------------


def _log_normal(x: np.ndarray, mu: np.ndarray, sigma2: np.ndarray) -> np.ndarray:
    # broadcast (n, 1) against (4,) -> (n, 4)
    x = np.asarray(x, dtype=float).reshape(-1, 1)
    return -0.5 * (np.log(2 * np.pi * sigma2) + (x - mu) ** 2 / sigma2)


def _log_weighted(scores, params: GmmParams) -> np.ndarray:
    """log(pi_k * N(score; mu_k, sigma2_k)) per score and component."""
    with np.errstate(divide="ignore"):
        log_pi = np.log(params.pi)
    return log_pi + _log_normal(scores, params.mu, params.sigma2)


def gmm_density(score, params: GmmParams):
    """Mixture density sum_k pi_k N(score; mu_k, sigma2_k)."""
    out = np.exp(logsumexp(_log_weighted(score, params), axis=1))
    return float(out[0]) if np.isscalar(score) else out


def component_posteriors(scores, params: GmmParams) -> np.ndarray:
    """Posterior membership Pr(z=k | score) for each score, rows summing
    to 1. Scaling all four weighted densities by a common constant cancels."""
    lw = _log_weighted(scores, params)
    return np.exp(lw - logsumexp(lw, axis=1, keepdims=True))


def component_posterior(score: float, params: GmmParams) -> np.ndarray:
    return component_posteriors([score], params)[0]


# -- semi-supervised EM ------------------------------------------------------


def init_from_labeled(labeled_scores, labeled_components) -> GmmParams:
    """Starting parameters from the hard-assigned scores alone.

    Weights are Laplace-smoothed counts, (count_k + 1) / (N + 4), and empty
    or singleton components fall back to the global mean/variance so no
    component starts degenerate.
    """
    scores = np.asarray(labeled_scores, dtype=float).ravel()
    comps = np.asarray(labeled_components, dtype=int).ravel()
    if scores.size == 0:
        raise ValueError("EM initialization needs at least one labeled score")
    counts = np.bincount(comps - 1, minlength=N_COMPONENTS)[:N_COMPONENTS]
    N = scores.size
    pi = (counts + 1.0) / (N + N_COMPONENTS)
    global_mu = float(scores.mean())
    global_var = float(scores.var())
    mu = np.full(N_COMPONENTS, global_mu)
    sigma2 = np.full(N_COMPONENTS, max(global_var, VARIANCE_FLOOR))
    for k in range(N_COMPONENTS):
        own = scores[comps == k + 1]
        if own.size >= 1:
            mu[k] = own.mean()
        if own.size >= 2:
            sigma2[k] = max(own.var(), VARIANCE_FLOOR)
    return GmmParams(pi=pi, mu=mu, sigma2=sigma2)


def e_step(trainset: GmmTrainSet, params: GmmParams):
    """Responsibilities: labeled scores are one-hot at their observation
    label regardless of the parameters; unlabeled scores get normalized
    posteriors."""
    gamma_l = np.zeros((trainset.labeled_scores.size, N_COMPONENTS))
    gamma_l[np.arange(gamma_l.shape[0]), trainset.labeled_components - 1] = 1.0
    if trainset.unlabeled_scores.size:
        gamma_u = component_posteriors(trainset.unlabeled_scores, params)
    else:
        gamma_u = np.zeros((0, N_COMPONENTS))
    return gamma_l, gamma_u


def m_step(trainset: GmmTrainSet, responsibilities, prev: GmmParams) -> GmmParams:
    """Weighted parameter updates.

    With a = alpha and b = 1 - alpha:

      pi_k     = (a sum_i g_ik + b sum_j u_jk) / (a n_l + b n_u)
      mu_k     = (a sum_i g_ik l_i + b sum_j u_jk l_j) / (a sum g + b sum u)
      sigma2_k = same form with squared residuals about the new mu_k

    A component whose total weighted responsibility falls below 1e-12 keeps
    its previous mean and variance and still receives pi from the formula.
    Variances are floored at 1e-6.
    """
    gamma_l, gamma_u = responsibilities
    a, b = trainset.alpha, 1.0 - trainset.alpha
    ls, us = trainset.labeled_scores, trainset.unlabeled_scores

    mass = a * gamma_l.sum(axis=0) + b * gamma_u.sum(axis=0)
    pi = mass / (a * ls.size + b * us.size)

    alive = mass >= RESPONSIBILITY_FLOOR
    safe_mass = np.where(alive, mass, 1.0)

    mu_num = a * gamma_l.T @ ls + b * gamma_u.T @ us
    mu = np.where(alive, mu_num / safe_mass, prev.mu)

    res_l = (ls.reshape(-1, 1) - mu) ** 2
    res_u = (us.reshape(-1, 1) - mu) ** 2
    var_num = a * np.sum(gamma_l * res_l, axis=0) + b * np.sum(gamma_u * res_u, axis=0)
    sigma2 = np.where(alive, np.maximum(var_num / safe_mass, VARIANCE_FLOOR), prev.sigma2)

    return GmmParams(pi=pi, mu=mu, sigma2=sigma2)


def weighted_log_likelihood(trainset: GmmTrainSet, params: GmmParams) -> float:
    """The objective EM ascends: alpha-weighted complete-data log-likelihood
    of the hard-assigned scores plus (1-alpha)-weighted mixture
    log-likelihood of the unlabeled scores."""
    total = 0.0
    if trainset.alpha > 0:
        lw = _log_weighted(trainset.labeled_scores, params)
        picked = lw[np.arange(trainset.labeled_scores.size), trainset.labeled_components - 1]
        total += trainset.alpha * picked.sum()
    if trainset.alpha < 1 and trainset.unlabeled_scores.size:
        unl = logsumexp(_log_weighted(trainset.unlabeled_scores, params), axis=1).sum()
        total += (1.0 - trainset.alpha) * unl
    return float(total)


@dataclass
class EmFit:
    params: GmmParams
    n_iter: int
    objective: float
    objective_trace: list[float]


def run_em(
    trainset: GmmTrainSet, max_iter: int = 200, tol: float = 1e-6
) -> EmFit:
    """Alternate E and M steps until the largest parameter change over all
    12 scalars drops below tol, or max_iter is hit. Deterministic: the
    labeled anchors fix the starting point, so there is no random restart."""
    params = init_from_labeled(trainset.labeled_scores, trainset.labeled_components)
    trace = [weighted_log_likelihood(trainset, params)]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        new = m_step(trainset, e_step(trainset, params), params)
        trace.append(weighted_log_likelihood(trainset, new))
        delta = new.max_abs_diff(params)
        params = new
        if delta < tol:
            break
    return EmFit(params=params, n_iter=n_iter, objective=trace[-1], objective_trace=trace)


def fit_gmm(trainset: GmmTrainSet, max_iter: int = 200, tol: float = 1e-6) -> GmmParams:
    return run_em(trainset, max_iter=max_iter, tol=tol).params


def dump_params(path, fit: EmFit) -> None:
    """JSON snapshot of a fit: weights, means, variances, iteration count,
    and final objective."""
    payload = {
        "pi": fit.params.pi.tolist(),
        "mu": fit.params.mu.tolist(),
        "sigma2": fit.params.sigma2.tolist(),
        "n_iter": fit.n_iter,
        "objective": fit.objective,
    }
    Path(path).write_text(json.dumps(payload, indent=2))
