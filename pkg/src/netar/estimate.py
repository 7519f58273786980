"""Component-wise least-squares estimation.

Each component r of the series is regressed on its active network
regressors: entry ``i + (j-1)d`` of the lagged regressor vector is
``(e_r' G_j(Ad_{t-j}) e_i) * x_{t-j;i}``, restricted to the index set of
regressors with positive observed modulation mass.  Coefficients outside
the index set are structural zeros.  The normal equations are solved in
centered form (algebraically identical to the raw block system, which is
kept in the test suite as an oracle) with an optional ridge jitter when
the Gram matrix is numerically singular.

The same solver backs the plain VAR benchmark (optionally with a
network-induced sparsity mask) and the per-component model, whose
regressor vector is the 2p-dimensional own-lag / pooled-network pair per
lag.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import log
from typing import List, Optional, Sequence

import numpy as np

from .netdyn import AdjacencySeries, NeighborhoodFn

__all__ = [
    "IndexSet",
    "ComponentFit",
    "ModelFit",
    "EstimationError",
    "build_index_set",
    "index_sets",
    "build_regressors",
    "build_regressors_lnar",
    "fit_component_ls",
    "fit_nar",
    "fit_lnar",
    "fit_var",
    "select_order_bic",
    "eval_theorem2_bound",
    "Theorem2Bound",
]

RIDGE_SCALE = 1e-8
_COND_LIMIT = 1e12


class EstimationError(RuntimeError):
    """Least-squares failure carrying solver diagnostics."""

    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class IndexSet:
    """Active flattened regressor indices for one component.

    Members use the 0-based flattening ``i + j*d`` for source component i
    at lag j+1; the serialized form is 1-based.
    """

    r: int
    members: tuple

    def __len__(self) -> int:
        return len(self.members)

    def one_based(self) -> List[int]:
        return [m + 1 for m in self.members]


@dataclass
class ComponentFit:
    r: int
    index_set: IndexSet
    w: np.ndarray
    mu: float
    resid_var: float
    gamma_y0: np.ndarray
    asymp_cov: np.ndarray
    rss: float
    n_obs: int
    ridge_jitter: float = 0.0
    gram_cond: float = 1.0

    @property
    def std_errors(self) -> np.ndarray:
        """Plug-in standard errors of the coefficient estimates."""
        if self.asymp_cov.size == 0:
            return np.empty(0)
        return np.sqrt(np.clip(np.diag(self.asymp_cov), 0.0, None) / self.n_obs)


@dataclass
class ModelFit:
    family: str
    p: int
    d: int
    g: Optional[tuple]
    components: List[ComponentFit]
    errors: dict = field(default_factory=dict)

    def mu_hat(self) -> np.ndarray:
        """Intercept vector; components that failed to fit show up as nan."""
        mu = np.full(self.d, np.nan)
        for c in self.components:
            mu[c.r] = c.mu
        return mu

    def coefficient_matrices(self) -> List[np.ndarray]:
        """Lag coefficient matrices with structural zeros filled in.

        For the per-component family these are the matrices of the
        embedding into the full model (alpha on the diagonal, beta off
        the diagonal).  Rows of failed components are nan.
        """
        mats = [np.zeros((self.d, self.d)) for _ in range(self.p)]
        for r in self.errors:
            for m in mats:
                m[r] = np.nan
        if self.family == "lnar":
            alpha, beta = self.alpha_beta()
            for j in range(self.p):
                m = np.repeat(beta[j][:, None], self.d, axis=1)
                np.fill_diagonal(m, alpha[j])
                mats[j] = m
            return mats
        for c in self.components:
            for pos, flat in enumerate(c.index_set.members):
                i, j = flat % self.d, flat // self.d
                mats[j][c.r, i] = c.w[pos]
        return mats

    def alpha_beta(self):
        if self.family != "lnar":
            raise ValueError("alpha/beta decomposition only exists for the per-component family")
        alpha = np.zeros((self.p, self.d))
        beta = np.zeros((self.p, self.d))
        for c in self.components:
            for j in range(self.p):
                alpha[j, c.r] = c.w[2 * j]
                beta[j, c.r] = c.w[2 * j + 1]
        return alpha, beta


def _resolve_t_start(p: int, t_start: Optional[int]) -> int:
    if t_start is None:
        return p
    if t_start < p:
        raise ValueError(f"t_start={t_start} must be at least the lag order p={p}")
    return t_start


def _lag_stacks(n: int, ads: AdjacencySeries, g_list, p: int, t_start: int) -> List[np.ndarray]:
    """Per-lag stacks of modulation matrices over the estimation window.

    ``stacks[j-1][row] = G_j(Ad_{t-j})`` for target time t = t_start + row,
    computed once and shared across components.
    """
    if len(ads) < n - 1:
        raise ValueError(
            f"network series too short for the sample: need {n - 1} snapshots, got {len(ads)}"
        )
    stacks = []
    for j in range(1, p + 1):
        g = g_list[j - 1]
        stacks.append(np.stack([g.apply(ads[t]) for t in range(t_start - j, n - j)]))
    return stacks


def index_sets(n: int, ads: AdjacencySeries, g_list: Sequence[NeighborhoodFn], p: int,
               t_start: Optional[int] = None,
               stacks: Optional[List[np.ndarray]] = None) -> List[IndexSet]:
    """Active regressor indices for every component at once."""
    t_start = _resolve_t_start(p, t_start)
    if stacks is None:
        stacks = _lag_stacks(n, ads, g_list, p, t_start)
    d = ads.d
    mass = [np.abs(s).sum(axis=0) for s in stacks]
    out = []
    for r in range(d):
        members = [i + j * d for j in range(p) for i in range(d) if mass[j][r, i] > 0.0]
        out.append(IndexSet(r=r, members=tuple(sorted(members))))
    return out


def build_index_set(n: int, ads: AdjacencySeries, g_list: Sequence[NeighborhoodFn], p: int,
                    r: int, t_start: Optional[int] = None) -> IndexSet:
    return index_sets(n, ads, g_list, p, t_start)[r]


def build_regressors(x: np.ndarray, ads: AdjacencySeries, g_list: Sequence[NeighborhoodFn],
                     p: int, r: int, idx: IndexSet, t_start: Optional[int] = None,
                     stacks: Optional[List[np.ndarray]] = None):
    """Regressor matrix and target for one component of the full model.

    Row for time t holds ``(e_r' G_j(Ad_{t-j}) e_i) x_{t-j;i}`` at the
    positions listed in ``idx``; targets are ``x_{t;r}`` for
    t = t_start..n-1.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d, n = x.shape
    t_start = _resolve_t_start(p, t_start)
    m = n - t_start
    if m <= 0:
        raise ValueError("estimation window is empty")
    if stacks is None:
        stacks = _lag_stacks(n, ads, g_list, p, t_start)
    k = len(idx)
    Y = np.zeros((m, k))
    for col, flat in enumerate(idx.members):
        i, j0 = flat % d, flat // d
        j = j0 + 1
        Y[:, col] = stacks[j0][:, r, i] * x[i, t_start - j: n - j]
    return Y, x[r, t_start:]


def _zero_diag_apply(g: NeighborhoodFn, ad: np.ndarray) -> np.ndarray:
    m = g.apply(ad).copy()
    np.fill_diagonal(m, 0.0)
    return m


def build_regressors_lnar(x: np.ndarray, ads: AdjacencySeries, g_list: Sequence[NeighborhoodFn],
                          p: int, r: int, t_start: Optional[int] = None):
    """2p-column regressors (own lag, pooled network lag) per lag for one component."""
    Y, y = _lnar_design(x, ads, g_list, p, t_start)
    return Y[r], y[r]


def _lnar_design(x, ads, g_list, p, t_start):
    """Shared per-component design matrices; the pooled network series
    G_j(Ad_t) x_t is computed once for all components."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d, n = x.shape
    t_start = _resolve_t_start(p, t_start)
    if len(ads) < n - 1:
        raise ValueError(
            f"network series too short for the sample: need {n - 1} snapshots, got {len(ads)}"
        )
    m = n - t_start
    if m <= 0:
        raise ValueError("estimation window is empty")
    # z[j][:, t] = zero-diagonal G_{j+1}(Ad_t) @ x[:, t]
    z = np.zeros((p, d, n))
    for j in range(p):
        for t in range(t_start - (j + 1), n - (j + 1)):
            if t < 0:
                continue
            z[j][:, t] = _zero_diag_apply(g_list[j], ads[t]) @ x[:, t]
    Y = np.zeros((d, m, 2 * p))
    for j in range(1, p + 1):
        sl = slice(t_start - j, n - j)
        Y[:, :, 2 * (j - 1)] = x[:, sl]
        Y[:, :, 2 * (j - 1) + 1] = z[j - 1][:, sl]
    targets = x[:, t_start:]
    return Y, targets


def fit_component_ls(y: np.ndarray, Y: np.ndarray, r: int, idx: Optional[IndexSet] = None,
                     ridge_scale: float = RIDGE_SCALE) -> ComponentFit:
    """Exact least squares with intercept via centered normal equations.

    Solves Gram * w = cross with Gram = sum (Y - Ybar)(Y - Ybar)' and
    cross = sum (Y - Ybar)(y - ybar), then mu = ybar - w'Ybar.  A
    numerically singular Gram matrix gets a flagged ridge jitter of
    ``ridge_scale * trace / dim``; if that still fails the component
    errors out with diagnostics.
    """
    y = np.asarray(y, dtype=float)
    Y = np.asarray(Y, dtype=float)
    m, k = Y.shape if Y.ndim == 2 else (Y.shape[0], 0)
    if m != y.shape[0]:
        raise ValueError("regressor/target length mismatch")
    if m < k + 1:
        raise EstimationError(
            f"component {r}: {m} observations cannot identify {k} coefficients plus intercept",
            {"n_obs": m, "k": k},
        )
    if idx is None:
        idx = IndexSet(r=r, members=tuple(range(k)))
    ybar = float(y.mean())
    if k == 0:
        rss = float(((y - ybar) ** 2).sum())
        dof = m - 1
        return ComponentFit(
            r=r, index_set=idx, w=np.empty(0), mu=ybar,
            resid_var=rss / dof if dof > 0 else float("nan"),
            gamma_y0=np.empty((0, 0)), asymp_cov=np.empty((0, 0)),
            rss=rss, n_obs=m,
        )
    Ybar = Y.mean(axis=0)
    Yc = Y - Ybar
    gram = Yc.T @ Yc
    cross = Yc.T @ (y - ybar)
    jitter = 0.0
    eigs = np.linalg.eigvalsh((gram + gram.T) / 2.0)
    cond = float(eigs[-1] / max(eigs[0], 1e-300)) if eigs[-1] > 0 else float("inf")
    if eigs[0] <= 0.0 or eigs[-1] / max(eigs[0], 1e-300) > _COND_LIMIT:
        jitter = ridge_scale * float(np.trace(gram)) / k
        if jitter <= 0.0:
            jitter = ridge_scale
        gram = gram + jitter * np.eye(k)
    try:
        w = np.linalg.solve(gram, cross)
    except np.linalg.LinAlgError:
        jitter += ridge_scale * max(float(np.trace(gram)) / k, 1.0)
        gram = gram + jitter * np.eye(k)
        try:
            w = np.linalg.solve(gram, cross)
        except np.linalg.LinAlgError as exc:
            raise EstimationError(
                f"component {r}: Gram matrix singular even after ridge jitter",
                {"trace": float(np.trace(gram)), "k": k, "n_obs": m},
            ) from exc
    if not np.isfinite(w).all():
        raise EstimationError(
            f"component {r}: non-finite least-squares solution",
            {"k": k, "n_obs": m},
        )
    mu = ybar - float(w @ Ybar)
    resid = y - Y @ w - mu
    rss = float(resid @ resid)
    dof = m - k - 1
    resid_var = rss / dof if dof > 0 else float("nan")
    gamma_y0 = gram / m
    asymp_cov = resid_var * np.linalg.inv(gamma_y0)
    return ComponentFit(
        r=r, index_set=idx, w=w, mu=mu, resid_var=resid_var,
        gamma_y0=gamma_y0, asymp_cov=asymp_cov, rss=rss, n_obs=m,
        ridge_jitter=jitter, gram_cond=cond,
    )


def fit_nar(x: np.ndarray, ads: AdjacencySeries, g_list: Sequence[NeighborhoodFn], p: int,
            t_start: Optional[int] = None, allow_partial: bool = False) -> ModelFit:
    """Component-wise fit of the full model over the observed index sets."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d, n = x.shape
    if len(g_list) != p:
        raise ValueError("need one neighborhood function per lag")
    stacks = _lag_stacks(n, ads, g_list, p, _resolve_t_start(p, t_start))
    sets = index_sets(n, ads, g_list, p, t_start, stacks=stacks)
    comps: List[ComponentFit] = []
    errors = {}
    for r in range(d):
        Y, y = build_regressors(x, ads, g_list, p, r, sets[r], t_start, stacks=stacks)
        try:
            comps.append(fit_component_ls(y, Y, r, sets[r]))
        except EstimationError as exc:
            if not allow_partial:
                raise
            errors[r] = str(exc)
    return ModelFit(family="nar", p=p, d=d, g=tuple(g_list), components=comps, errors=errors)


def fit_lnar(x: np.ndarray, ads: AdjacencySeries, g_list: Sequence[NeighborhoodFn], p: int,
             t_start: Optional[int] = None, allow_partial: bool = False) -> ModelFit:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d, n = x.shape
    if len(g_list) != p:
        raise ValueError("need one neighborhood function per lag")
    design, targets = _lnar_design(x, ads, g_list, p, t_start)
    comps: List[ComponentFit] = []
    errors = {}
    for r in range(d):
        idx = IndexSet(r=r, members=tuple(range(2 * p)))
        try:
            comps.append(fit_component_ls(targets[r], design[r], r, idx))
        except EstimationError as exc:
            if not allow_partial:
                raise
            errors[r] = str(exc)
    return ModelFit(family="lnar", p=p, d=d, g=tuple(g_list), components=comps, errors=errors)


def fit_var(x: np.ndarray, p: int, mask: Optional[np.ndarray] = None,
            t_start: Optional[int] = None, allow_partial: bool = False) -> ModelFit:
    """Per-equation VAR least squares, optionally sparsity-masked.

    ``mask`` is a binary (d, d*p) matrix; a zero entry pins the matching
    coefficient to zero (used for network-induced sparsity).  An all-ones
    mask is the unrestricted VAR; an all-zero row yields an
    intercept-only equation whose forecast is the sample mean.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d, n = x.shape
    t_start = _resolve_t_start(p, t_start)
    if mask is None:
        mask = np.ones((d, d * p))
    mask = np.asarray(mask)
    if mask.shape != (d, d * p):
        raise ValueError(f"mask must have shape {(d, d * p)}, got {mask.shape}")
    m = n - t_start
    if m <= 0:
        raise ValueError("estimation window is empty")
    lagged = np.zeros((m, d * p))
    for j in range(1, p + 1):
        lagged[:, (j - 1) * d: j * d] = x[:, t_start - j: n - j].T
    comps: List[ComponentFit] = []
    errors = {}
    for r in range(d):
        members = tuple(int(i) for i in np.flatnonzero(mask[r] != 0))
        idx = IndexSet(r=r, members=members)
        Y = lagged[:, list(members)]
        try:
            comps.append(fit_component_ls(x[r, t_start:], Y, r, idx))
        except EstimationError as exc:
            if not allow_partial:
                raise
            errors[r] = str(exc)
    return ModelFit(family="var", p=p, d=d, g=None, components=comps, errors=errors)


@dataclass
class OrderSelection:
    p: int
    table: dict


def select_order_bic(x: np.ndarray, ads: Optional[AdjacencySeries] = None,
                     g: Optional[NeighborhoodFn] = None, p_max: int = 3,
                     family: str = "nar", mask: Optional[np.ndarray] = None) -> OrderSelection:
    """Order selection on a common estimation window.

    Every candidate order is fitted on the targets t = p_max..n-1 so the
    criteria compare identical observations.  BIC(p) sums per component
    ``m ln(RSS_r / m) + k_r ln m`` with m the common window length and
    k_r the coefficient count including the intercept.  Ties resolve to
    the smaller order.  There is no order-0 candidate; white noise shows
    up as order 1 with near-zero coefficients.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d, n = x.shape
    if p_max < 1:
        raise ValueError("p_max must be at least 1")
    m = n - p_max
    table = {}
    best_p, best_val = None, None
    for p in range(1, p_max + 1):
        try:
            if family == "nar":
                fit = fit_nar(x, ads, [g] * p, p, t_start=p_max)
            elif family == "lnar":
                fit = fit_lnar(x, ads, [g] * p, p, t_start=p_max)
            elif family == "var":
                sub_mask = None
                if mask is not None:
                    sub_mask = np.asarray(mask)[:, : d * p]
                fit = fit_var(x, p, mask=sub_mask, t_start=p_max)
            else:
                raise ValueError(f"unknown family {family!r}")
        except EstimationError:
            # candidate order cannot be identified on this window; skip it
            table[p] = float("inf")
            continue
        val = 0.0
        degenerate = False
        for c in fit.components:
            assert c.n_obs == m, "BIC fits must share one observation window"
            k_r = len(c.index_set) + 1
            if m - k_r < 5:
                # (near-)interpolating fit: the criterion would reward it blindly
                degenerate = True
                break
            val += m * log(max(c.rss / m, 1e-300)) + k_r * log(m)
        if degenerate:
            table[p] = float("inf")
            continue
        table[p] = val
        if best_val is None or val < best_val - 1e-12:
            best_p, best_val = p, val
    if best_p is None:
        raise EstimationError("no candidate order is identifiable on this sample")
    return OrderSelection(p=best_p, table=table)


@dataclass
class Theorem2Bound:
    w_bound: float
    mu_bound: float
    prob_lower: float
    feasible: bool


def eval_theorem2_bound(y: float, q: float, p: int, constants: dict, n: int) -> Theorem2Bound:
    """Plug-in evaluation of the nonasymptotic coefficient error bounds.

    ``constants`` supplies the model constants (keys ``c_lambda``,
    ``c_a``, ``c_delta_y``, ``rho_gamma_inv``, ``mu_y_norm``,
    ``eps_norm``, ``mu_r``) and the tail constants ``c_q``/``c_q_prime``,
    which the theory leaves unspecified.  Returns an infeasible marker
    when the denominator is not positive.  The probability lower bound is
    floored at zero (a negative value is vacuous).
    """
    c_lam = constants["c_lambda"]
    c_a = constants["c_a"]
    c_dy = constants["c_delta_y"]
    rho_inv = constants["rho_gamma_inv"]
    mu_y = constants["mu_y_norm"]
    eps_norm = constants["eps_norm"]
    mu_r = constants["mu_r"]
    c_q = constants.get("c_q", 1.0)
    c_qp = constants.get("c_q_prime", 1.0)
    if not 0.0 < c_lam < 1.0:
        raise ValueError("c_lambda must lie in (0, 1)")
    if y == 0.0:
        return Theorem2Bound(w_bound=0.0, mu_bound=0.0, prob_lower=0.0, feasible=True)
    denom = rho_inv - y * 2.0 * p * c_dy * (2.0 * c_a / (1.0 - c_lam) + 2.0 * mu_y + y * c_dy)
    if denom <= 0.0:
        return Theorem2Bound(w_bound=float("inf"), mu_bound=float("inf"),
                             prob_lower=0.0, feasible=False)
    w_bound = y * np.sqrt(2.0 * p) * c_dy * (eps_norm + c_dy * y + mu_r + mu_y) / denom
    mu_bound = (mu_y + y * c_dy) * w_bound + y * c_dy
    m = n - p
    cq_val = 1.0 - c_q * m ** (1.0 - q) * y ** (-q) - (c_qp + 2.0) * np.exp(-c_q * m * y * y)
    prob_lower = float(max(cq_val, 0.0) ** 4)
    return Theorem2Bound(w_bound=float(w_bound), mu_bound=float(mu_bound),
                         prob_lower=prob_lower, feasible=True)
