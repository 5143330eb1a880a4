"""Decay laws for benchmarking sequences and weighted fits of measured fidelity curves.

Three reference models are supported:

``exponential``  F = p**m (multi-qubit Clifford or interleaved decays)
``f_single``     joint decay of simultaneous single-qubit sequences under local noise
``additive``     F = (1 - sum(e))**m, the additive-error approximation kept for comparison
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .xeb import FidelityPoint

MODELS = ("exponential", "f_single", "additive")
DEFAULT_M_MIN = 4


class FitError(RuntimeError):
    """Raised when a decay fit cannot be carried out or does not converge."""


def _check_p(p, name="p"):
    arr = np.asarray(p, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {p}")
    return arr


def f_exponential(p: float, m):
    _check_p(p)
    m = np.asarray(m)
    if np.any(m < 0):
        raise ValueError("depth must be nonnegative")
    return np.power(float(p), m)


def _clifford_coefficient(n: int) -> float:
    return 0.75 / (1.0 - 0.25**n)


def p_multi_leading(errors: Sequence[float], n: int | None = None) -> float:
    """Leading-order depolarizing parameter of an n-qubit Clifford reference under local noise."""
    errors = _check_p(errors, "errors")
    n = len(errors) if n is None else n
    return float(1.0 - _clifford_coefficient(n) * errors.sum())


def p_multi_exact(per_qubit_p: Sequence[float], n: int | None = None) -> float:
    """Exact Clifford-twirled parameter ``(prod(1 + 3 p_i) - 1) / (4**n - 1)``."""
    p = _check_p(per_qubit_p)
    n = len(p) if n is None else n
    return float((np.prod(1.0 + 3.0 * p) - 1.0) / (4.0**n - 1.0))


def f_single(per_qubit_p: Sequence[float], m, n: int | None = None):
    """Average fidelity of simultaneous single-qubit Clifford sequences of depth ``m``."""
    p = _check_p(per_qubit_p)
    n = len(p) if n is None else n
    if n != len(p) or not 1 <= n <= 4:
        raise ValueError("need one p_i per qubit and 1 <= n <= 4")
    m = np.asarray(m, dtype=float)
    q = np.power.outer(p, m)  # (n, *m.shape)
    num = 2.0**n * np.prod(2.0 + q, axis=0) + 3.0**n - np.prod(3.0 + q, axis=0) - 4.0**n
    return num / (6.0**n + 3.0**n - 2.0 * 4.0**n)


def f_additive(errors: Sequence[float], m):
    total = float(np.sum(errors))
    if total > 1.0 or total < 0.0:
        raise ValueError("sum of errors must lie in [0, 1]")
    return np.power(1.0 - total, np.asarray(m, dtype=float))


def depolarizing_to_average_fidelity(p: float, d: int) -> float:
    return (d - 1) / d * p + 1.0 / d


def refined_interleaved_fidelity(p_int: float, errors: Sequence[float], n: int | None = None) -> float:
    """Gate depolarizing parameter from an interleaved decay with a single-qubit reference."""
    ref = p_multi_leading(errors, n)
    if ref <= 0.0:
        raise ValueError("reference depolarizing parameter is not positive")
    return p_int / ref


def naive_interleaved_fidelity(p_int: float, errors: Sequence[float]) -> float:
    """Uncorrected estimate that assumes additive single-qubit reference errors."""
    total = float(np.sum(errors))
    if total >= 1.0:
        raise ValueError("sum of errors must be below 1")
    return p_int / (1.0 - total)


# --- fitting -----------------------------------------------------------------


def _pow_deriv(p, m):
    # d/dp p**m, safe at p = 0, m = 0
    return np.where(m > 0, m * np.power(p, np.maximum(m - 1.0, 0.0)), 0.0)


def model_curve(
    model_id: str, params, depths, n: int = 1, shared: bool = False, amplitude: bool = False
) -> np.ndarray:
    """Model values; with ``amplitude`` the exponential reads ``A * p**m``."""
    params = np.asarray(params, dtype=float)
    m = np.asarray(depths, dtype=float)
    if model_id == "exponential":
        return np.power(params[0], m) * (params[1] if amplitude else 1.0)
    if model_id == "additive":
        return np.power(1.0 - params[0], m)
    if model_id == "f_single":
        p = np.full(n, params[0]) if shared else params
        return f_single(np.clip(p, 0.0, 1.0), m, n)
    raise ValueError(f"unknown model {model_id!r}; expected one of {MODELS}")


def model_jacobian(
    model_id: str, params, depths, n: int = 1, shared: bool = False, amplitude: bool = False
) -> np.ndarray:
    """Analytic ``dF/dparams`` with shape ``(len(depths), len(params))``."""
    params = np.asarray(params, dtype=float)
    m = np.asarray(depths, dtype=float)
    if model_id == "exponential":
        if amplitude:
            return np.stack([params[1] * _pow_deriv(params[0], m), np.power(params[0], m)], axis=1)
        return _pow_deriv(params[0], m)[:, None]
    if model_id == "additive":
        return -_pow_deriv(1.0 - params[0], m)[:, None]
    if model_id != "f_single":
        raise ValueError(f"unknown model {model_id!r}")
    p = np.full(n, params[0]) if shared else params
    q = np.power.outer(p, m)
    dq = np.array([_pow_deriv(pi, m) for pi in p])
    cols = []
    for i in range(n):
        others = [j for j in range(n) if j != i]
        a = 2.0**n * np.prod(2.0 + q[others], axis=0)
        b = np.prod(3.0 + q[others], axis=0)
        cols.append((a - b) * dq[i])
    jac = np.array(cols).T / (6.0**n + 3.0**n - 2.0 * 4.0**n)
    return jac.sum(axis=1, keepdims=True) if shared else jac


@dataclass
class DecayFit:
    model_id: str
    params: np.ndarray
    covariance: np.ndarray
    residual_norm: float
    depths_used: list[int]
    n: int = 1
    shared: bool = False
    amplitude: bool = False
    weighted: bool = False
    iterations: int = 0
    param_stderr_bootstrap: np.ndarray | None = field(default=None, repr=False)

    @property
    def stderr(self) -> np.ndarray:
        """Bootstrap standard errors when available, else from the fit covariance."""
        if self.param_stderr_bootstrap is not None:
            return self.param_stderr_bootstrap
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    @property
    def stderr_method(self) -> str:
        return "bootstrap" if self.param_stderr_bootstrap is not None else "fit-covariance"

    def predict(self, depths) -> np.ndarray:
        return model_curve(self.model_id, self.params, depths, self.n, self.shared, self.amplitude)

    @property
    def p(self) -> float:
        return float(self.params[0])


def _initial_p(m: np.ndarray, f: np.ndarray, amplitude: bool = False) -> tuple[float, float]:
    """Log-linear regression on strictly positive points: ``(p, A)``."""
    ok = (f > 0) & (m > 0)
    if not np.any(ok):
        return 0.5, 1.0
    x, y = m[ok], np.log(f[ok])
    if amplitude and len(x) > 1 and np.ptp(x) > 0:
        slope, intercept = np.polyfit(x, y, 1)
    else:
        slope, intercept = np.sum(x * y) / np.sum(x**2), 0.0
    return float(np.clip(np.exp(slope), 1e-6, 1.0)), float(np.exp(intercept))


def _levenberg_marquardt(fun, jac, theta0, y, w, max_iter, tol, upper):
    sw = np.sqrt(w)
    theta = np.clip(np.asarray(theta0, dtype=float), 0.0, upper)
    r = sw * (y - fun(theta))
    cost = r @ r
    lam = 1e-3
    for it in range(1, max_iter + 1):
        J = sw[:, None] * jac(theta)
        A = J.T @ J
        g = J.T @ r
        if np.max(np.abs(g)) <= tol * tol:
            return theta, it, True
        while True:
            damp = lam * np.diag(np.diag(A)) + 1e-300 * np.eye(len(theta))
            try:
                step = np.linalg.solve(A + damp, g)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(A + damp, g, rcond=None)[0]
            trial = np.clip(theta + step, 0.0, upper)
            r_new = sw * (y - fun(trial))
            cost_new = r_new @ r_new
            if cost_new <= cost:
                moved = np.max(np.abs(trial - theta))
                theta, r, prev, cost = trial, r_new, cost, cost_new
                lam = max(lam / 3.0, 1e-12)
                if moved <= tol * (np.max(np.abs(theta)) + tol) or prev - cost <= 1e-30 + 1e-15 * prev:
                    return theta, it, True
                break
            lam *= 4.0
            if lam > 1e16:
                # no descent direction left: at a (possibly constrained) minimum
                return theta, it, True
    return theta, max_iter, False


def fit_decay(
    points: Sequence[FidelityPoint],
    model_id: str = "exponential",
    m_min: int = DEFAULT_M_MIN,
    n: int = 1,
    shared: bool = False,
    initial: Sequence[float] | None = None,
    max_iter: int = 500,
    tol: float = 1e-14,
    amplitude: bool = False,
) -> DecayFit:
    """Weighted nonlinear least squares of a decay model on points with depth >= m_min.

    Points are weighted by ``1/stderr**2`` when every point carries a positive
    stderr, otherwise uniformly. Decay parameters are clamped to [0, 1]. With
    ``amplitude`` the exponential model gains a free prefactor, ``A * p**m``.
    """
    if model_id not in MODELS:
        raise ValueError(f"unknown model {model_id!r}; expected one of {MODELS}")
    if amplitude and model_id != "exponential":
        raise ValueError("a free amplitude is only supported for the exponential model")
    used = sorted((pt for pt in points if pt.depth >= m_min), key=lambda pt: pt.depth)
    if len(used) < 3:
        raise FitError(f"need at least 3 points with depth >= {m_min}, got {len(used)}")
    m = np.array([pt.depth for pt in used], dtype=float)
    y = np.array([pt.fidelity for pt in used], dtype=float)
    se = np.array([np.nan if pt.stderr is None else pt.stderr for pt in used], dtype=float)
    weighted = bool(np.all(np.isfinite(se)) and np.all(se > 0))
    w = 1.0 / se**2 if weighted else np.ones_like(y)

    if model_id == "f_single" and not shared and n > 1:
        if initial is None:
            # a symmetric start is a stationary point of the difference direction
            base = fit_decay(used, "f_single", m_min, n, True, max_iter=max_iter, tol=tol).p
            spread = 0.25 * max(1.0 - base, 1e-6)
            initial = [min(base + spread * (1 if i % 2 else -1) * (1 + i // 2), 1.0) for i in range(n)]
        theta0 = np.asarray(initial, dtype=float)
    elif initial is not None:
        theta0 = np.asarray(initial, dtype=float)
    else:
        p0, a0 = _initial_p(m, y, amplitude)
        theta0 = np.array([1.0 - p0 if model_id == "additive" else p0] + ([a0] if amplitude else []))

    upper = np.ones(len(theta0))
    if amplitude:
        upper[1] = np.inf
    fun = lambda th: model_curve(model_id, th, m, n, shared, amplitude)  # noqa: E731
    jac = lambda th: model_jacobian(model_id, th, m, n, shared, amplitude)  # noqa: E731
    theta, iters, converged = _levenberg_marquardt(fun, jac, theta0, y, w, max_iter, tol, upper)
    resid = np.sqrt(w) * (y - fun(theta))
    if not converged or not np.all(np.isfinite(theta)):
        raise FitError(
            f"{model_id} fit did not converge after {iters} iterations "
            f"(params={theta}, residual norm={np.linalg.norm(resid):.3g}, depths={m.tolist()})"
        )
    J = np.sqrt(w)[:, None] * jac(theta)
    cov = np.linalg.pinv(J.T @ J)
    if not weighted:
        dof = len(y) - len(theta)
        cov = cov * (resid @ resid / dof if dof > 0 else 0.0)
    cov = 0.5 * (cov + cov.T)
    return DecayFit(
        model_id=model_id,
        params=theta,
        covariance=cov,
        residual_norm=float(np.linalg.norm(resid)),
        depths_used=[int(x) for x in m],
        n=n,
        shared=shared,
        amplitude=amplitude,
        weighted=weighted,
        iterations=iters,
    )
