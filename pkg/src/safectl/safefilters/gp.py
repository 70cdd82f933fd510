"""Gaussian-process regression of dynamics residuals.

One independent zero-mean GP per output with a squared-exponential ARD
kernel on inputs normalized to zero mean and unit variance. Hyperparameters
are kept in log space: ``theta = [log sf2, log ell_1..ell_d, log sn2]``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize

from ..numopt.linalg import chol_factor

RESERVOIR = 200
LOG_ELL_BOUNDS = (math.log(1e-2), math.log(1e3))
LOG_SF2_BOUNDS = (math.log(1e-12), math.log(1e6))
LOG_SN2_BOUNDS = (math.log(1e-12), math.log(1e2))


def _sq_dists(A, B, ell):
    As = A / ell
    Bs = B / ell
    d = np.sum(As * As, axis=1)[:, None] + np.sum(Bs * Bs, axis=1)[None, :] - 2.0 * As @ Bs.T
    return np.maximum(d, 0.0)


def se_kernel(A, B, sf2: float, ell) -> np.ndarray:
    return sf2 * np.exp(-0.5 * _sq_dists(A, B, ell))


def log_marginal_likelihood(theta, Z, y, with_grad: bool = True):
    """Log marginal likelihood of one output and its gradient w.r.t. ``theta``."""
    theta = np.asarray(theta, dtype=float)
    N, d = Z.shape
    sf2 = math.exp(theta[0])
    ell = np.exp(theta[1 : 1 + d])
    sn2 = math.exp(theta[1 + d])
    Kf = se_kernel(Z, Z, sf2, ell)
    K = Kf + sn2 * np.eye(N)
    cf, _ = chol_factor(K)
    alpha = cho_solve(cf, y)
    lml = -0.5 * float(y @ alpha) - float(np.sum(np.log(np.diag(cf[0])))) - 0.5 * N * math.log(2.0 * math.pi)
    if not with_grad:
        return lml
    W = np.outer(alpha, alpha) - cho_solve(cf, np.eye(N))
    grad = np.empty_like(theta)
    grad[0] = 0.5 * float(np.sum(W * Kf))
    for j in range(d):
        diff = Z[:, j][:, None] - Z[:, j][None, :]
        grad[1 + j] = 0.5 * float(np.sum(W * Kf * (diff * diff) / (ell[j] * ell[j])))
    grad[1 + d] = 0.5 * sn2 * float(np.trace(W))
    return lml, grad


@dataclass(frozen=True, eq=False)
class _Output:
    theta: np.ndarray
    cf: tuple
    alpha: np.ndarray

    @property
    def sf2(self):
        return math.exp(self.theta[0])

    @property
    def ell(self):
        return np.exp(self.theta[1:-1])

    @property
    def sn2(self):
        return math.exp(self.theta[-1])


class GpModel:
    """Fitted multi-output GP. Immutable: refitting returns a new instance."""

    def __init__(self, Z, Y, outputs, z_mean, z_std):
        self.Z = Z
        self.Y = Y
        self.outputs = tuple(outputs)
        self.z_mean = z_mean
        self.z_std = z_std
        self._Zn = (Z - z_mean) / z_std if Z.size else Z

    @classmethod
    def empty(cls, n_in: int, n_out: int) -> "GpModel":
        """A GP with no data: zero mean and zero variance everywhere."""
        return cls(np.zeros((0, n_in)), np.zeros((0, n_out)), (), np.zeros(n_in), np.ones(n_in))

    @property
    def is_empty(self) -> bool:
        return not self.outputs

    @property
    def n_in(self) -> int:
        return self.Z.shape[1]

    @property
    def n_out(self) -> int:
        return self.Y.shape[1]

    def training_data(self):
        """Copies of the raw inputs ``Z`` and residual targets ``Y``."""
        return self.Z.copy(), self.Y.copy()

    def hyperparameters(self):
        return [
            {"signal_var": o.sf2, "lengthscales": o.ell.tolist(), "noise_var": o.sn2} for o in self.outputs
        ]

    def predict(self, Zq):
        """Posterior mean and latent variance, each ``(n_query, n_out)``."""
        Zq = np.atleast_2d(np.asarray(Zq, dtype=float))
        nq = Zq.shape[0]
        if self.is_empty:
            return np.zeros((nq, self.n_out)), np.zeros((nq, self.n_out))
        Zn = (Zq - self.z_mean) / self.z_std
        mean = np.empty((nq, self.n_out))
        var = np.empty((nq, self.n_out))
        for j, o in enumerate(self.outputs):
            Ks = se_kernel(Zn, self._Zn, o.sf2, o.ell)
            mean[:, j] = Ks @ o.alpha
            V = solve_triangular(o.cf[0], Ks.T, lower=True)
            var[:, j] = np.maximum(o.sf2 - np.sum(V * V, axis=0), 0.0)
        return mean, var

    def mean_jacobian(self, z):
        """Posterior mean at one input and its Jacobian ``(n_out, n_in)``."""
        z = np.asarray(z, dtype=float)
        if self.is_empty:
            return np.zeros(self.n_out), np.zeros((self.n_out, self.n_in))
        zn = (z - self.z_mean) / self.z_std
        mean = np.empty(self.n_out)
        jac = np.empty((self.n_out, self.n_in))
        for j, o in enumerate(self.outputs):
            ell = o.ell
            k = se_kernel(zn[None, :], self._Zn, o.sf2, ell)[0]
            mean[j] = k @ o.alpha
            w = k * o.alpha
            jac[j] = -(w @ (zn[None, :] - self._Zn)) / (ell * ell) / self.z_std
        return mean, jac


def _normalizer(Z):
    mu = Z.mean(axis=0)
    sd = Z.std(axis=0)
    return mu, np.where(sd > 1e-12, sd, 1.0)


def _default_theta(y, d):
    v = float(np.var(y)) if y.size > 1 else 1.0
    v = max(v, 1e-10)
    return np.concatenate([[math.log(v)], np.zeros(d), [math.log(max(1e-2 * v, 1e-10))]])


def _bounds(d):
    return [LOG_SF2_BOUNDS] + [LOG_ELL_BOUNDS] * d + [LOG_SN2_BOUNDS]


def _optimize(Zn, y, restarts, rng):
    d = Zn.shape[1]
    bounds = _bounds(d)
    starts = [_default_theta(y, d)]
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    for _ in range(restarts):
        t = starts[0] + rng.normal(0.0, 1.0, size=d + 2)
        starts.append(np.clip(t, lo, hi))

    def objective(theta):
        try:
            lml, g = log_marginal_likelihood(theta, Zn, y)
        except Exception:
            return 1e25, np.zeros_like(theta)
        return -lml, -g

    best = None
    for t0 in starts:
        res = minimize(objective, t0, jac=True, method="L-BFGS-B", bounds=bounds, options={"maxiter": 200})
        if best is None or res.fun < best.fun:
            best = res
    return best.x


def gp_fit(Z, Y, optimize: bool = True, theta=None, restarts: int = 2, seed: int = 0, noise_var=None) -> GpModel:
    """Fit one GP per column of ``Y``.

    ``theta`` fixes log hyperparameters (one row per output, or shared);
    ``noise_var`` pins the noise variance when not optimizing.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    Y = np.asarray(Y, dtype=float).reshape(Z.shape[0], -1)
    z_mean, z_std = _normalizer(Z)
    Zn = (Z - z_mean) / z_std
    N, d = Zn.shape
    rng = np.random.default_rng(seed)
    outputs = []
    for j in range(Y.shape[1]):
        y = Y[:, j]
        if theta is not None:
            th = np.asarray(theta, dtype=float)
            th = th[j] if th.ndim == 2 else th
        elif optimize and N >= 2:
            th = _optimize(Zn, y, restarts, rng)
        else:
            th = _default_theta(y, d)
        if noise_var is not None:
            th = th.copy()
            th[-1] = math.log(noise_var)
        K = se_kernel(Zn, Zn, math.exp(th[0]), np.exp(th[1 : 1 + d])) + math.exp(th[-1]) * np.eye(N)
        cf, _ = chol_factor(K)
        outputs.append(_Output(np.array(th), cf, cho_solve(cf, y)))
    return GpModel(Z.copy(), Y.copy(), outputs, z_mean, z_std)


def gp_predict(model: GpModel, Zq):
    return model.predict(Zq)


class TransitionBuffer:
    """Most recent ``capacity`` transitions ``(x, u, x_next)``."""

    def __init__(self, capacity: int = RESERVOIR):
        self.capacity = capacity
        self.data = deque(maxlen=capacity)
        self.seen = 0

    def add(self, x, u, x_next):
        self.data.append((np.array(x, dtype=float), np.array(u, dtype=float), np.array(x_next, dtype=float)))
        self.seen += 1

    def __len__(self):
        return len(self.data)

    def arrays(self):
        X = np.array([d[0] for d in self.data])
        U = np.array([d[1] for d in self.data])
        Xn = np.array([d[2] for d in self.data])
        return X, U, Xn


def residual_dataset(predict_fn, X, U, Xn):
    """Inputs ``[x, u]`` and targets ``x_next - prior(x, u)``."""
    Z = np.hstack([X, U])
    Y = Xn - np.array([predict_fn(x, u) for x, u in zip(X, U)])
    return Z, Y
