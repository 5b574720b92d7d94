"""Levenberg-Marquardt least squares with Marquardt diagonal scaling."""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import SingularJacobian

_EPS = np.finfo(float).eps


@dataclass
class LMResult:
    x: np.ndarray
    residuals: np.ndarray
    jac: np.ndarray
    cost: float
    iterations: int
    nfev: int
    converged: bool
    hit_max_iter: bool
    message: str
    cost_history: list = field(default_factory=list)

    @property
    def residual_norm(self):
        return float(np.linalg.norm(self.residuals))

    def covariance(self):
        """``(J^T J)^-1`` scaled by the reduced chi-square (zero dof -> unscaled)."""
        m, n = self.jac.shape
        jtj = self.jac.T @ self.jac
        cov = np.linalg.pinv(jtj, rcond=1e-15, hermitian=True)
        dof = m - n
        if dof > 0:
            cov = cov * (2.0 * self.cost / dof)
        return 0.5 * (cov + cov.T)


def numerical_jacobian(fun, x, r0=None):
    """Central-difference Jacobian of ``fun`` at ``x``."""
    x = np.asarray(x, dtype=float)
    step = _EPS ** (1.0 / 3.0) * np.maximum(np.abs(x), 1.0)
    cols = []
    for j in range(x.size):
        dx = np.zeros_like(x)
        dx[j] = step[j]
        cols.append((fun(x + dx) - fun(x - dx)) / (2.0 * step[j]))
    return np.column_stack(cols)


def check_rank(jac, rtol=1e-10):
    norms = np.linalg.norm(jac, axis=0)
    if np.any(norms == 0) or not np.all(np.isfinite(jac)):
        raise SingularJacobian("Jacobian has a zero or non-finite column")
    sv = np.linalg.svd(jac / norms, compute_uv=False)
    if sv.size < jac.shape[1] or sv[-1] <= rtol * sv[0]:
        raise SingularJacobian(
            f"Jacobian is rank deficient (condition ~ {sv[0] / max(sv[-1], 1e-300):.3g})"
        )


def _gauss_newton_probe(A, g, cost, x):
    """Relative cost decrease and largest relative move of the undamped step."""
    try:
        d = np.linalg.lstsq(A, -g, rcond=None)[0]
    except np.linalg.LinAlgError:
        return np.inf, np.inf
    pred = -(g @ d) - 0.5 * (d @ A @ d)
    gain = float(pred / cost) if cost > 0 else 0.0
    move = float(np.max(np.abs(d) / np.maximum(np.abs(x), _EPS)))
    return gain, move


def levenberg_marquardt(
    fun,
    x0,
    jac=None,
    *,
    lambda_init=1e-3,
    lambda_up=10.0,
    lambda_down=10.0,
    max_iter=200,
    gtol=1e-8,
    ftol=1e-12,
    xtol=1e-10,
    lambda_max=1e16,
):
    """Minimise ``0.5 * ||fun(x)||^2``.

    ``jac(x)`` returns the residual Jacobian; when omitted a central difference
    is used. A step is accepted only if it lowers the cost, so the accepted
    cost sequence is non-increasing; the cost is updated by the computed
    reduction so decreases far below the cost's own rounding still register. Convergence is declared when the scaled
    gradient ``max_j |J_j . r| / (||J_j|| ||r_0||)`` drops below ``gtol``
    (``r_0`` the starting residual) or the residual vanishes. When no damped
    step lowers the cost, the fit also counts as converged if the undamped
    Gauss-Newton step predicts a relative cost reduction below ``ftol`` or
    moves every parameter by less than ``xtol`` relative: the optimum is then
    resolved to the rounding noise of the residuals.
    """
    x = np.array(x0, dtype=float)
    jac_fn = jac if jac is not None else (lambda p: numerical_jacobian(fun, p))
    r = np.asarray(fun(x), dtype=float)
    nfev = 1
    if not np.all(np.isfinite(r)):
        raise ValueError("residuals are not finite at the initial point")
    J = np.asarray(jac_fn(x), dtype=float)
    check_rank(J)
    cost = 0.5 * float(r @ r)
    r0_norm = float(np.linalg.norm(r))
    history = [cost]
    lam = lambda_init
    message = "maximum iterations reached"
    converged = False
    it = 0

    def scaled_gradient(J, r):
        if r0_norm == 0.0:
            return 0.0
        col = np.linalg.norm(J, axis=0)
        col[col == 0] = 1.0
        return float(np.max(np.abs(J.T @ r) / col) / r0_norm)

    while it < max_iter:
        if cost == 0.0 or scaled_gradient(J, r) < gtol:
            converged = True
            message = "scaled gradient below tolerance"
            break
        it += 1
        g = J.T @ r
        A = J.T @ J
        diag = np.diag(A).copy()
        diag = np.maximum(diag, _EPS * max(diag.max(), 1e-300))
        accepted = False
        while lam <= lambda_max:
            try:
                delta = np.linalg.solve(A + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                lam *= lambda_up
                continue
            x_new = x + delta
            r_new = np.asarray(fun(x_new), dtype=float)
            nfev += 1
            if not np.all(np.isfinite(r_new)):
                lam *= lambda_up
                continue
            # cost decrease written as a product of differences keeps its
            # precision when the two costs agree to many digits
            reduction = -0.5 * float((r_new - r) @ (r_new + r))
            if reduction > 0.0:
                x, r = x_new, r_new
                cost = max(cost - reduction, 0.0)
                lam = max(lam / lambda_down, 1e-15)
                accepted = True
                break
            lam *= lambda_up
        if not accepted:
            if scaled_gradient(J, r) < gtol:
                converged, message = True, "scaled gradient below tolerance"
            else:
                gain, move = _gauss_newton_probe(A, g, cost, x)
                if gain < ftol or move < xtol:
                    converged, message = True, "optimum resolved to rounding floor"
                else:
                    message = "no cost-reducing step (damping exhausted)"
            break
        J = np.asarray(jac_fn(x), dtype=float)
        history.append(cost)
    else:
        if cost == 0.0 or scaled_gradient(J, r) < gtol:
            converged = True
            message = "scaled gradient below tolerance"

    return LMResult(
        x=x,
        residuals=r,
        jac=J,
        cost=cost,
        iterations=it,
        nfev=nfev,
        converged=converged,
        hit_max_iter=(not converged and it >= max_iter),
        message=message,
        cost_history=history,
    )
