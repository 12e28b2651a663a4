"""Comparison reconstructions: l2, l1, and total variation.

The l2 and l1 runs are thin parameterizations of the split Bregman solver
with the convex mix pinned to 1 or 0. Total variation uses lagged
diffusivity: a Gauss-Newton loop whose penalty Hessian is the weighted
Laplacian rebuilt from the previous iterate, with the same geometric
weight schedule and discrepancy stop as the elastic-net runs.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy import sparse
from sklearn.base import BaseEstimator

from .inversion import (HistoryRecord, InversionError,
                        SplitBregmanReconstruction, _solve_normal_equations,
                        morozov_stop)
from .mesh import adjacency_difference_operator
from .metrics import relative_error


def run_l2(model, voltages, domain="transform", truth=None, **params):
    """l2-only reconstruction: the split Bregman solver with beta = 1."""
    params.pop("beta", None)
    est = SplitBregmanReconstruction(model, domain=domain, beta=1.0, **params)
    return est.fit(voltages, truth=truth)


def run_l1(model, voltages, domain="transform", truth=None, **params):
    """l1-only reconstruction: the split Bregman solver with beta = 0."""
    params.pop("beta", None)
    est = SplitBregmanReconstruction(model, domain=domain, beta=0.0, **params)
    return est.fit(voltages, truth=truth)


def tv_penalty(R, sigma, gamma):
    """Smoothed total variation sum(sqrt((R sigma)^2 + gamma^2) - gamma)."""
    edge = R @ np.asarray(sigma, dtype=float)
    return float(np.sum(np.sqrt(edge * edge + gamma * gamma) - gamma))


def lagged_diffusivity_matrix(R, sigma, gamma):
    """Weighted Laplacian R^T diag(1/sqrt((R sigma)^2 + gamma^2)) R."""
    edge = R @ np.asarray(sigma, dtype=float)
    w = 1.0 / np.sqrt(edge * edge + gamma * gamma)
    return (R.T @ sparse.diags(w) @ R).tocsr()


class TVReconstruction(BaseEstimator):
    """Total-variation EIT reconstruction by lagged diffusivity.

    Each outer iteration solves
    [J^T J + alpha_k L(sigma^k) + mu I] ds = J^T r - alpha_k L (sigma - sigma_ref)
    with L the lagged-diffusivity Laplacian, alpha_k = alpha0 * q_alpha**k,
    stopping by the discrepancy principle or ``outer_max``.

    Parameters mirror :class:`SplitBregmanReconstruction` where they apply;
    ``gamma`` is the C1 smoothing of |x| (default 1e-3 * max|sigma_ref|).
    """

    def __init__(self, model, alpha0=1e-4, q_alpha=0.6, gamma=None, mu=0.0,
                 outer_max=30, cg_tol=1e-8, cg_max=500, noise_norm=0.0,
                 residual_floor=1e-8, sigma_ref=1.0, admissible_bound=0.02,
                 reg_matrix=None, solver="cg"):
        self.model = model
        self.alpha0 = alpha0
        self.q_alpha = q_alpha
        self.gamma = gamma
        self.mu = mu
        self.outer_max = outer_max
        self.cg_tol = cg_tol
        self.cg_max = cg_max
        self.noise_norm = noise_norm
        self.residual_floor = residual_floor
        self.sigma_ref = sigma_ref
        self.admissible_bound = admissible_bound
        self.reg_matrix = reg_matrix
        self.solver = solver

    def fit(self, voltages, truth=None):
        if self.alpha0 <= 0 or not 0.0 < self.q_alpha < 1.0:
            raise ValueError("need alpha0 > 0 and q_alpha in (0, 1)")
        model = self.model
        n = model.mesh.n_elements
        voltages = np.asarray(voltages, dtype=float)
        lam = self.admissible_bound
        sigma_ref = np.clip(
            np.broadcast_to(np.asarray(self.sigma_ref, dtype=float), (n,)),
            lam, 1.0 / lam).copy()
        R = (adjacency_difference_operator(model.mesh)
             if self.reg_matrix is None else self.reg_matrix)
        gamma = self.gamma
        if gamma is None:
            gamma = 1e-3 * float(np.abs(sigma_ref).max())
        if gamma <= 0:
            raise ValueError("gamma must be positive")

        stop_norm = max(float(self.noise_norm),
                        self.residual_floor * float(np.linalg.norm(voltages)))
        sigma = sigma_ref.copy()
        history = []
        stopped_by = "max_iterations"
        cg_iters_prev = 0
        cg_fail_prev = 0

        for k in range(self.outer_max + 1):
            alpha = self.alpha0 * self.q_alpha ** k
            try:
                volt, J = model.solve_with_jacobian(sigma)
            except Exception as err:
                raise InversionError(f"forward solve failed at k={k}: {err}",
                                     history) from err
            residual_vec = voltages - volt
            rnorm = float(np.linalg.norm(residual_vec))
            re = relative_error(sigma, truth) if truth is not None else float("nan")
            history.append(HistoryRecord(k=k, alpha=alpha, inner_iters=1,
                                         residual=rnorm, re=re,
                                         cg_iters=cg_iters_prev,
                                         cg_failures=cg_fail_prev))
            if morozov_stop(rnorm, stop_norm):
                stopped_by = "discrepancy"
                break
            if k == self.outer_max:
                break
            # lagged weights from the current iterate
            edge = R @ sigma
            w = 1.0 / np.sqrt(edge * edge + gamma * gamma)
            R_eff = sparse.diags(np.sqrt(w)) @ R
            rhs = J.T @ residual_vec \
                - alpha * (R_eff.T @ (R_eff @ (sigma - sigma_ref)))
            delta, rep = _solve_normal_equations(
                J, R_eff, alpha, self.mu, rhs, self.cg_tol, self.cg_max,
                self.solver)
            cg_iters_prev = rep.n_iter
            cg_fail_prev = 0 if rep.converged else 1
            if not np.all(np.isfinite(delta)):
                raise InversionError(f"non-finite update at k={k}", history)
            sigma = np.clip(sigma + delta, lam, 1.0 / lam)

        if sum(h.cg_failures for h in history):
            warnings.warn("conjugate gradient hit cg_max in some TV solves",
                          RuntimeWarning, stacklevel=2)
        self.sigma_ = sigma
        self.history_ = history
        self.residual_ = history[-1].residual
        self.n_outer_ = history[-1].k
        self.stopped_by_ = stopped_by
        return self
