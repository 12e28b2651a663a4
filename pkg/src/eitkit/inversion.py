"""Elastic-net regularized Gauss-Newton reconstruction via operator splitting.

Two variants share one engine: the transform-domain solver promotes
sparsity of the wavelet coefficients of the conductivity, the space-domain
solver promotes sparsity of the deviation from a known background. Each
outer Gauss-Newton iteration linearizes the forward map, then an inner
loop alternates a conjugate-gradient solve of the damped normal equations
with soft shrinkage and a Bregman-variable update. The regularization
weight follows a geometric schedule and the outer loop stops by the
discrepancy principle.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, cg, splu
from sklearn.base import BaseEstimator

from .mesh import adjacency_difference_operator
from .metrics import relative_error
from .transforms import HaarBasis


class InversionError(RuntimeError):
    """Reconstruction aborted; carries the iteration history gathered so far."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history or []


def shrinkage(x, t):
    """Soft thresholding sign(x) * max(|x| - t, 0), the l1 proximal map."""
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def shrinkage_threshold(alpha, beta, mu):
    """Inner-loop threshold alpha * (1 - beta) / (2 * mu)."""
    return alpha * (1.0 - beta) / (2.0 * mu)


def morozov_stop(residual_norm, noise_norm):
    """True when the data residual has fallen strictly below the noise norm."""
    if residual_norm < 0 or noise_norm < 0:
        raise ValueError("norms must be nonnegative")
    return residual_norm < noise_norm


@dataclass
class CGReport:
    converged: bool
    n_iter: int
    solver: str = "cg"


def _solve_normal_equations(J, R, smooth_weight, mu, rhs, cg_tol, cg_max,
                            solver="cg"):
    """Solve [J^T J + smooth_weight R^T R + mu I] x = rhs.

    The operator is applied matrix-free. CG is preconditioned with the
    factored sparse part (smooth_weight R^T R + mu I): the preconditioned
    operator is identity plus a rank-(rows of J) term, so CG converges in
    at most rank+1 steps regardless of how small mu is. ``solver="dense"``
    forms the matrix explicitly (small instances and oracle checks only).
    """
    n = rhs.shape[0]
    if solver == "dense":
        A = J.T @ J + mu * np.eye(n)
        if smooth_weight != 0.0:
            A += smooth_weight * (R.T @ R).toarray()
        return np.linalg.solve(A, rhs), CGReport(True, 0, "dense")

    def matvec(v):
        out = J.T @ (J @ v) + mu * v
        if smooth_weight != 0.0:
            out += smooth_weight * (R.T @ (R @ v))
        return out

    op = LinearOperator((n, n), matvec=matvec, dtype=float)
    precond = sparse.identity(n, format="csc") * mu
    if smooth_weight != 0.0:
        precond = precond + smooth_weight * (R.T @ R)
    # keep the preconditioner nonsingular when mu = 0 (R^T R annihilates
    # constants); the floor enters the preconditioner only, not the operator
    floor = 1e-12 * (abs(mu) + abs(smooth_weight)) + 1e-300
    diag_max = precond.diagonal().max() if n else 0.0
    if diag_max > 0:
        floor = max(floor, 1e-12 * diag_max)
    precond = precond + sparse.identity(n, format="csc") * floor
    lu = splu(precond.tocsc())
    M = LinearOperator((n, n), matvec=lu.solve, dtype=float)
    count = {"n": 0}

    def cb(_):
        count["n"] += 1

    x, info = cg(op, rhs, rtol=cg_tol, atol=0.0, maxiter=cg_max, M=M,
                 callback=cb)
    return x, CGReport(info == 0, count["n"])


def gn_update_transform(J, residual, sigma, sigma_ref, d, b_d, alpha, beta,
                        mu, R, basis, cg_tol=1e-8, cg_max=500, solver="cg"):
    """Gauss-Newton step for the transform-domain subproblem.

    Solves [J^T J + alpha*beta R^T R + mu I] ds =
    J^T residual - alpha*beta R^T R (sigma - sigma_ref)
    - mu (sigma + basis^T (b_d - d)).
    """
    w = alpha * beta
    rhs = J.T @ residual - mu * (sigma + basis.adjoint(b_d - d))
    if w != 0.0:
        rhs -= w * (R.T @ (R @ (sigma - sigma_ref)))
    return _solve_normal_equations(J, R, w, mu, rhs, cg_tol, cg_max, solver)


def gn_update_space(J, residual, sigma, sigma_ref, sigma0, d, b_d, alpha,
                    beta, mu, R, cg_tol=1e-8, cg_max=500, solver="cg"):
    """Gauss-Newton step for the space-domain subproblem.

    Same operator as the transform variant; the splitting term couples to
    sigma - sigma0 + b_d - d directly.
    """
    w = alpha * beta
    rhs = J.T @ residual - mu * (sigma - sigma0 + b_d - d)
    if w != 0.0:
        rhs -= w * (R.T @ (R @ (sigma - sigma_ref)))
    return _solve_normal_equations(J, R, w, mu, rhs, cg_tol, cg_max, solver)


@dataclass
class HistoryRecord:
    """State of one outer iterate (k = 0 is the starting guess)."""

    k: int
    alpha: float
    inner_iters: int
    residual: float
    re: float = float("nan")
    cg_iters: int = 0
    cg_failures: int = 0


@dataclass
class SplitBregmanState:
    """Iteration state: current field, splitting variables, schedule."""

    sigma: np.ndarray
    d: np.ndarray
    b_d: np.ndarray
    alpha: float
    k: int
    history: list = field(default_factory=list)


class SplitBregmanReconstruction(BaseEstimator):
    """Elastic-net EIT reconstruction by split Bregman Gauss-Newton.

    Parameters
    ----------
    model : CEMForwardModel
        Forward operator on the inversion mesh.
    domain : {"transform", "space"}
        Where the l1 penalty acts: on transform coefficients of the field,
        or on the deviation from the known background ``sigma0``.
    beta : float in [0, 1]
        Convex mix between the l1 penalty (beta=0) and the smoothing
        seminorm (beta=1).
    alpha0, q_alpha : float
        Geometric regularization schedule alpha_k = alpha0 * q_alpha**k,
        0 < q_alpha < 1.
    mu : float
        Relaxation weight of the splitting constraint (> 0).
    tau : float
        Inner loop stops once the update norm drops below tau.
    inner_max, outer_max : int
        Iteration caps for the inner splitting loop and the outer
        Gauss-Newton loop.
    cg_tol, cg_max : float, int
        Conjugate-gradient controls for the normal-equation solves.
    noise_norm : float
        ||U - U^delta|| for the discrepancy stop; 0 for noise-free data.
    residual_floor : float
        Relative floor replacing a zero ``noise_norm``: the outer loop
        stops below residual_floor * ||data||.
    sigma_ref : float or ndarray
        A-priori guess; also the starting iterate. Scalars broadcast.
    sigma0 : float or ndarray, optional
        Known background for the space domain (defaults to sigma_ref).
    admissible_bound : float
        Iterates are clamped to [bound, 1/bound] after each outer update.
    reg_matrix : sparse matrix, optional
        Smoothing operator; defaults to the element adjacency difference.
    transform : object, optional
        Sparsifying map with forward/adjoint; defaults to the Haar basis.
    reset_bregman : bool
        Reset d and b_d at every outer iteration (default). False carries
        them across outer iterations.
    solver : {"cg", "dense"}
        Normal-equation solver; "dense" is for small diagnostics.

    Attributes
    ----------
    sigma_ : ndarray
        Reconstructed element conductivities.
    history_ : list of HistoryRecord
    state_ : SplitBregmanState
    residual_ : float
        Final data residual norm.
    stopped_by_ : str
        "discrepancy" or "max_iterations".
    """

    def __init__(self, model, domain="transform", beta=0.1, alpha0=1e-6,
                 q_alpha=0.6, mu=1e-10, tau=1e-2, inner_max=10, outer_max=30,
                 cg_tol=1e-8, cg_max=500, noise_norm=0.0, residual_floor=1e-8,
                 sigma_ref=1.0, sigma0=None, admissible_bound=0.02,
                 reg_matrix=None, transform=None, reset_bregman=True,
                 solver="cg"):
        self.model = model
        self.domain = domain
        self.beta = beta
        self.alpha0 = alpha0
        self.q_alpha = q_alpha
        self.mu = mu
        self.tau = tau
        self.inner_max = inner_max
        self.outer_max = outer_max
        self.cg_tol = cg_tol
        self.cg_max = cg_max
        self.noise_norm = noise_norm
        self.residual_floor = residual_floor
        self.sigma_ref = sigma_ref
        self.sigma0 = sigma0
        self.admissible_bound = admissible_bound
        self.reg_matrix = reg_matrix
        self.transform = transform
        self.reset_bregman = reset_bregman
        self.solver = solver

    def _check_params(self):
        if self.domain not in ("transform", "space"):
            raise ValueError("domain must be 'transform' or 'space'")
        if self.alpha0 <= 0:
            raise ValueError("alpha0 must be positive")
        if not 0.0 < self.q_alpha < 1.0:
            raise ValueError("q_alpha must lie in (0, 1)")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.tau <= 0:
            raise ValueError("tau must be positive")

    def _field(self, value, n):
        arr = np.broadcast_to(np.asarray(value, dtype=float), (n,)).copy()
        return arr

    def fit(self, voltages, truth=None):
        """Reconstruct the conductivity explaining ``voltages``.

        Parameters
        ----------
        voltages : ndarray
            Stacked measurement vector (possibly noisy).
        truth : ndarray, optional
            True conductivity on the inversion mesh; enables per-iteration
            relative-error tracking in the history.
        """
        self._check_params()
        model = self.model
        n = model.mesh.n_elements
        voltages = np.asarray(voltages, dtype=float)
        if voltages.shape != (model.measurement.n_measurements,):
            raise ValueError("data length does not match measurement layout")

        lam = self.admissible_bound
        sigma_ref = np.clip(self._field(self.sigma_ref, n), lam, 1.0 / lam)
        sigma0 = (sigma_ref if self.sigma0 is None
                  else self._field(self.sigma0, n))
        R = (adjacency_difference_operator(model.mesh)
             if self.reg_matrix is None else self.reg_matrix)
        basis = None
        if self.domain == "transform":
            basis = self.transform if self.transform is not None else HaarBasis(n)
            aux_len = basis.padded
        else:
            aux_len = n

        stop_norm = max(float(self.noise_norm),
                        self.residual_floor * float(np.linalg.norm(voltages)))
        sigma = sigma_ref.copy()
        d = np.zeros(aux_len)
        b_d = np.zeros(aux_len)
        history = []
        inner_prev = 0
        cg_iters_prev = 0
        cg_fail_prev = 0
        stopped_by = "max_iterations"

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
            history.append(HistoryRecord(k=k, alpha=alpha,
                                         inner_iters=inner_prev,
                                         residual=rnorm, re=re,
                                         cg_iters=cg_iters_prev,
                                         cg_failures=cg_fail_prev))
            if morozov_stop(rnorm, stop_norm):
                stopped_by = "discrepancy"
                break
            if k == self.outer_max:
                break

            if self.reset_bregman:
                d[:] = 0.0
                b_d[:] = 0.0
            eta = shrinkage_threshold(alpha, self.beta, self.mu)
            delta = np.zeros(n)
            inner_prev = 0
            cg_iters_prev = 0
            cg_fail_prev = 0
            for _ in range(self.inner_max):
                if self.domain == "transform":
                    delta, rep = gn_update_transform(
                        J, residual_vec, sigma, sigma_ref, d, b_d, alpha,
                        self.beta, self.mu, R, basis, self.cg_tol,
                        self.cg_max, self.solver)
                    z = basis.forward(sigma + delta)
                else:
                    delta, rep = gn_update_space(
                        J, residual_vec, sigma, sigma_ref, sigma0, d, b_d,
                        alpha, self.beta, self.mu, R, self.cg_tol,
                        self.cg_max, self.solver)
                    z = sigma + delta - sigma0
                cg_iters_prev += rep.n_iter
                cg_fail_prev += 0 if rep.converged else 1
                d = shrinkage(z + b_d, eta)
                b_d = b_d + z - d
                inner_prev += 1
                if not np.all(np.isfinite(delta)):
                    raise InversionError(
                        f"non-finite update at outer iteration {k}", history)
                if float(np.linalg.norm(delta)) < self.tau:
                    break
            sigma = np.clip(sigma + delta, lam, 1.0 / lam)

        total_cg_failures = sum(h.cg_failures for h in history)
        if total_cg_failures:
            warnings.warn(
                f"conjugate gradient hit cg_max without reaching cg_tol in "
                f"{total_cg_failures} solve(s); see history cg_failures",
                RuntimeWarning, stacklevel=2)

        self.sigma_ = sigma
        self.history_ = history
        self.state_ = SplitBregmanState(sigma=sigma, d=d, b_d=b_d,
                                        alpha=history[-1].alpha,
                                        k=history[-1].k, history=history)
        self.residual_ = history[-1].residual
        self.n_outer_ = history[-1].k
        self.stopped_by_ = stopped_by
        return self
