"""Least-squares solvers: pivoted-QR OLS, ridge, and elastic net.

All solvers take a design without an intercept column and fit the
intercept internally by centering.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ..errors import ArgumentError, ConvergenceError, SingularDesignError

__all__ = [
    "LinearFit",
    "ols_fit",
    "ridge_fit",
    "elastic_net_fit",
    "tune_elastic_net",
]


@dataclass(frozen=True)
class LinearFit:
    """Result of a linear regression with intercept.

    Attributes
    ----------
    intercept : float
    coefficients : ndarray of shape (P,)
    residual_variance : float
        RSS / (N - P - 1) for OLS; RSS / N for penalized fits.
    n_observations : int
    coefficient_standard_errors : ndarray of shape (P,) or None
        Present only for unregularized fits.
    intercept_standard_error : float or None
    method : str
        ``"ols"``, ``"ridge"`` or ``"elastic_net"``.
    penalty_weight, l1_ratio : float or None
        Regularization settings, when applicable.
    n_iterations : int
        Coordinate-descent sweeps (0 for closed-form solvers).
    """

    intercept: float
    coefficients: np.ndarray
    residual_variance: float
    n_observations: int
    coefficient_standard_errors: np.ndarray | None = None
    intercept_standard_error: float | None = None
    method: str = "ols"
    penalty_weight: float | None = None
    l1_ratio: float | None = None
    n_iterations: int = 0
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def n_features(self):
        return int(self.coefficients.shape[0])

    def predict(self, design):
        """Evaluate the fitted map on new rows."""
        design = np.asarray(design, dtype=float)
        if design.ndim == 1:
            design = design[None, :]
        return self.intercept + design @ self.coefficients


def _prepare(design, target, weights=None):
    X = np.asarray(design, dtype=float)
    y = np.asarray(target, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ArgumentError("design must be a 2-D matrix", module="numerics")
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise ArgumentError("target length must match design rows", module="numerics")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ArgumentError("design and target must be finite", module="numerics")
    if weights is None:
        w = np.ones(X.shape[0])
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != y.shape or np.any(w < 0) or not np.any(w > 0):
            raise ArgumentError("weights must be non-negative with positive sum",
                                module="numerics")
    return X, y, w


def _weighted_center(X, y, w):
    total = w.sum()
    x_mean = w @ X / total
    y_mean = float(w @ y / total)
    return X - x_mean, y - y_mean, x_mean, y_mean, total


def ols_fit(design, target, weights=None):
    """Ordinary (optionally weighted) least squares with intercept.

    Parameters
    ----------
    design : array-like of shape (N, P)
        Regressors, without an intercept column.
    target : array-like of shape (N,)
    weights : array-like of shape (N,), optional
        Non-negative observation weights.

    Returns
    -------
    LinearFit

    Raises
    ------
    SingularDesignError
        If the centered design is rank deficient. ``columns`` lists the
        indices that pivoted QR placed beyond the numerical rank.
    """
    X, y, w = _prepare(design, target, weights)
    n, p = X.shape
    if n <= p:
        raise ArgumentError(f"need more rows than columns (N={n}, P={p})",
                            module="numerics")
    Xc, yc, x_mean, y_mean, total = _weighted_center(X, y, w)
    sw = np.sqrt(w)
    if p == 0:
        resid = yc
        dof = n - 1
        rss = float(w @ resid**2)
        sigma2 = rss / dof if dof > 0 else 0.0
        return LinearFit(
            intercept=y_mean,
            coefficients=np.zeros(0),
            residual_variance=sigma2,
            n_observations=n,
            coefficient_standard_errors=np.zeros(0),
            intercept_standard_error=float(np.sqrt(sigma2 / total)),
        )
    q, r, piv = scipy.linalg.qr(Xc * sw[:, None], mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(n, p) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol)) if diag[0] > 0 else 0
    if rank < p:
        bad = sorted(int(c) for c in piv[rank:])
        raise SingularDesignError(
            f"design is rank deficient (rank {rank} < {p}); dependent columns {bad}",
            columns=bad,
        )
    qty = q.T @ (yc * sw)
    beta_piv = scipy.linalg.solve_triangular(r, qty)
    beta = np.empty(p)
    beta[piv] = beta_piv
    resid = yc - Xc @ beta
    rss = float(w @ resid**2)
    dof = n - p - 1
    sigma2 = rss / dof if dof > 0 else 0.0
    # diag((X'X)^-1) from the row norms of R^-1, then unpivoted.
    r_inv = scipy.linalg.solve_triangular(r, np.eye(p))
    cov_diag_piv = np.sum(r_inv**2, axis=1)
    cov_diag = np.empty(p)
    cov_diag[piv] = cov_diag_piv
    se = np.sqrt(sigma2 * cov_diag)
    # Var(intercept) = sigma2 (1/sum w + xbar' (Xc'WXc)^-1 xbar)
    proj = r_inv.T @ x_mean[piv]
    intercept_se = float(np.sqrt(sigma2 * (1.0 / total + proj @ proj)))
    return LinearFit(
        intercept=float(y_mean - x_mean @ beta),
        coefficients=beta,
        residual_variance=sigma2,
        n_observations=n,
        coefficient_standard_errors=se,
        intercept_standard_error=intercept_se,
    )


def ridge_fit(design, target, penalty, weights=None):
    """Ridge regression with an unpenalized intercept.

    The penalty is relative: the diagonal of the centered normal matrix
    is inflated by ``penalty`` times its mean, so the shrinkage does not
    depend on the units of the regressors.
    """
    X, y, w = _prepare(design, target, weights)
    if penalty < 0:
        raise ArgumentError("penalty must be non-negative", module="numerics")
    n, p = X.shape
    Xc, yc, x_mean, y_mean, _ = _weighted_center(X, y, w)
    if p == 0:
        beta = np.zeros(0)
    else:
        gram = (Xc * w[:, None]).T @ Xc
        scale = float(np.mean(np.diag(gram)))
        lam = penalty * (scale if scale > 0 else 1.0)
        rhs = (Xc * w[:, None]).T @ yc
        beta = scipy.linalg.solve(gram + lam * np.eye(p), rhs, assume_a="pos")
    resid = yc - Xc @ beta
    return LinearFit(
        intercept=float(y_mean - x_mean @ beta),
        coefficients=np.asarray(beta, dtype=float),
        residual_variance=float(w @ resid**2 / w.sum()),
        n_observations=n,
        method="ridge",
        penalty_weight=float(penalty),
    )


def _soft_threshold(value, threshold):
    if value > threshold:
        return value - threshold
    if value < -threshold:
        return value + threshold
    return 0.0


def _en_objective(beta, gram, cov, yy, penalty_weight, l1_ratio):
    quad = 0.5 * (yy - 2.0 * cov @ beta + beta @ gram @ beta)
    pen = penalty_weight * (l1_ratio * np.abs(beta).sum()
                            + 0.5 * (1.0 - l1_ratio) * beta @ beta)
    return quad + pen


def _coordinate_descent(gram, cov, penalty_weight, l1_ratio, beta0, tol,
                        max_sweeps, trace=None, yy=None):
    p = cov.shape[0]
    beta = beta0.copy()
    l1 = penalty_weight * l1_ratio
    denom = np.diag(gram) + penalty_weight * (1.0 - l1_ratio)
    active = np.diag(gram) > 0
    for sweep in range(1, max_sweeps + 1):
        max_change = 0.0
        for j in range(p):
            if not active[j]:
                beta[j] = 0.0
                continue
            old = beta[j]
            rho = cov[j] - gram[j] @ beta + gram[j, j] * old
            new = _soft_threshold(rho, l1) / denom[j]
            if new != old:
                beta[j] = new
                change = abs(new - old)
                if change > max_change:
                    max_change = change
        if trace is not None:
            trace.append(float(_en_objective(beta, gram, cov, yy,
                                             penalty_weight, l1_ratio)))
        scale = np.max(np.abs(beta)) if p else 0.0
        if max_change <= tol * max(scale, 1e-12) or max_change == 0.0:
            return beta, sweep
    raise ConvergenceError(
        f"coordinate descent did not converge in {max_sweeps} sweeps",
        iterations=max_sweeps,
    )


def _standardize(X, y):
    x_mean = X.mean(axis=0)
    x_scale = X.std(axis=0)
    safe = np.where(x_scale > 0, x_scale, 1.0)
    Z = (X - x_mean) / safe
    Z[:, x_scale == 0] = 0.0
    y_mean = float(y.mean())
    return Z, y - y_mean, x_mean, safe, y_mean


def _to_original_scale(beta_std, x_mean, x_scale, y_mean):
    beta = beta_std / x_scale
    return float(y_mean - x_mean @ beta), beta


def elastic_net_fit(design, target, penalty_weight, l1_ratio, tol=1e-7,
                    max_sweeps=10_000, trace=None, _warm_start=None):
    """Elastic-net regression by cyclic coordinate descent.

    Minimizes ``(1/2N)||y - b0 - Zb||^2 + lambda (alpha |b|_1 + (1-alpha)/2 |b|^2)``
    over standardized columns ``Z``; the intercept is unpenalized.

    Parameters
    ----------
    design : array-like of shape (N, P)
    target : array-like of shape (N,)
    penalty_weight : float
        Overall penalty ``lambda >= 0``.
    l1_ratio : float
        Mixing ``alpha`` in [0, 1]; 1 is the lasso, 0 is ridge.
    tol : float
        Relative tolerance on the largest coefficient update per sweep.
    max_sweeps : int
    trace : list, optional
        If given, the objective after every sweep is appended.

    Returns
    -------
    LinearFit
        Coefficients on the original column scale.

    Raises
    ------
    ConvergenceError
        If ``max_sweeps`` sweeps pass without meeting ``tol``.
    """
    X, y, _ = _prepare(design, target)
    if penalty_weight < 0:
        raise ArgumentError("penalty_weight must be non-negative", module="numerics")
    if not 0.0 <= l1_ratio <= 1.0:
        raise ArgumentError("l1_ratio must lie in [0, 1]", module="numerics")
    n, p = X.shape
    Z, yc, x_mean, x_scale, y_mean = _standardize(X, y)
    gram = Z.T @ Z / n
    cov = Z.T @ yc / n
    yy = float(yc @ yc / n)
    beta0 = np.zeros(p) if _warm_start is None else _warm_start
    if np.isinf(penalty_weight):
        beta_std, sweeps = np.zeros(p), 0
    else:
        beta_std, sweeps = _coordinate_descent(
            gram, cov, float(penalty_weight), float(l1_ratio), beta0, tol,
            max_sweeps, trace=trace, yy=yy)
    intercept, beta = _to_original_scale(beta_std, x_mean, x_scale, y_mean)
    resid = y - intercept - X @ beta
    return LinearFit(
        intercept=intercept,
        coefficients=beta,
        residual_variance=float(resid @ resid / n),
        n_observations=n,
        method="elastic_net",
        penalty_weight=float(penalty_weight),
        l1_ratio=float(l1_ratio),
        n_iterations=sweeps,
        extra={"standardized_coefficients": beta_std},
    )


def tune_elastic_net(design, target, grid_size=100, folds=5, tol=1e-7,
                     max_sweeps=10_000):
    """Pick elastic-net hyperparameters by K-fold cross-validation.

    Both the penalty weight and the l1 ratio range over ``grid_size``
    evenly spaced values in [0, 1]. Folds are interleaved by row index,
    so the split is deterministic. Grid points whose fit fails to
    converge are skipped.

    Returns
    -------
    penalty_weight : float
    l1_ratio : float
    fit : LinearFit
        Refit on all rows at the selected point.
    """
    X, y, _ = _prepare(design, target)
    n, p = X.shape
    if grid_size < 2:
        raise ArgumentError("grid_size must be at least 2", module="numerics")
    if folds < 2:
        raise ArgumentError("folds must be at least 2", module="numerics")
    if n < folds:
        raise ArgumentError(f"cannot split {n} rows into {folds} folds",
                            module="numerics")
    penalties = np.linspace(0.0, 1.0, grid_size)
    ratios = np.linspace(0.0, 1.0, grid_size)
    fold_id = np.arange(n) % folds
    sse = np.zeros((grid_size, grid_size))
    failed = np.zeros((grid_size, grid_size), dtype=bool)
    for k in range(folds):
        train, test = fold_id != k, fold_id == k
        Z, yc, x_mean, x_scale, y_mean = _standardize(X[train], y[train])
        m = Z.shape[0]
        gram = Z.T @ Z / m
        cov = Z.T @ yc / m
        for j, ratio in enumerate(ratios):
            # Warm start along a decreasing penalty path.
            beta = np.zeros(p)
            for i in range(grid_size - 1, -1, -1):
                if failed[i, j]:
                    continue
                try:
                    beta, _ = _coordinate_descent(gram, cov, penalties[i], ratio,
                                                  beta, tol, max_sweeps)
                except ConvergenceError:
                    failed[i, j] = True
                    beta = np.zeros(p)
                    continue
                b0, b = _to_original_scale(beta, x_mean, x_scale, y_mean)
                resid = y[test] - b0 - X[test] @ b
                sse[i, j] += resid @ resid
    sse[failed] = np.inf
    if not np.any(np.isfinite(sse)):
        raise ConvergenceError("no grid point converged", iterations=max_sweeps)
    i, j = np.unravel_index(int(np.argmin(sse)), sse.shape)
    fit = elastic_net_fit(X, y, penalties[i], ratios[j], tol=tol, max_sweeps=max_sweeps)
    fit.extra["cv_mse"] = float(sse[i, j] / n)
    return float(penalties[i]), float(ratios[j]), fit
