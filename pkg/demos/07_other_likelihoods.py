"""Weighted bootstrap beyond Bernoulli rewards.

Categorical rewards: Exp(1) weights give a Dirichlet(counts + pseudo) draw.
Gaussian rewards with a linear model: perturbing the labels with N(0, 1)
noise gives theta ~ N(theta_hat, (X'X)^-1), the Gaussian posterior.
"""
from __future__ import annotations

import numpy as np

from bootbandit.dist import RngStream
from bootbandit.policy import wb_categorical_sample, wb_gaussian_sample

rng = RngStream(7)
draws = wb_categorical_sample([2, 1, 1], [1, 1, 1], rng, 100_000)
print("categorical: mean", np.round(draws.mean(axis=0), 4), "target", np.round([3 / 7, 2 / 7, 2 / 7], 4))

X = rng.gen.normal(size=(20, 3))
y = X @ [1.0, -2.0, 0.5] + rng.gen.normal(size=20)
theta = wb_gaussian_sample(X, y, rng, 100_000)
cov = np.linalg.inv(X.T @ X)
print("gaussian: mean", np.round(theta.mean(axis=0), 3), "least squares", np.round(np.linalg.lstsq(X, y, rcond=None)[0], 3))
err = np.linalg.norm(np.cov(theta, rowvar=False) - cov) / np.linalg.norm(cov)
print(f"gaussian: relative Frobenius error of the covariance {err:.3f}")
