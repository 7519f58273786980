"""Model specifications and process simulation.

Two autoregressive families are supported.  The full network
autoregression of order p,

    X_t = sum_j (A_j * G_j(Ad_{t-j})) X_{t-j} + eps_t      (elementwise *)

and its per-component simplification with own-lag coefficients
``alpha[j, r]`` and a single pooled network coefficient ``beta[j, r]``
per lag.  Both reduce to an order-1 recursion on the stacked state via
the companion form, which is also used for the stationarity diagnostics
and the moving-average coefficient matrices.

Array convention: a simulated path ``x`` has shape ``(d, n)`` and
``x[:, t]`` is modulated by the snapshot ``ads[t - j]`` at lag ``j``, so
series and network share one time axis (the network snapshot at array
index ``t`` sits between observations ``t`` and ``t + 1``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from .netdyn import AdjacencySeries, NeighborhoodFn

__all__ = [
    "NarSpec",
    "LnarSpec",
    "InnovationSpec",
    "CompanionForm",
    "build_companion",
    "check_stationarity_nar",
    "check_stationarity_lnar",
    "snapshot_spectral_radii",
    "simulate_nar",
    "simulate_lnar",
    "simulate_gnlp_truncated",
    "ma_infinity_coeffs",
]

STATIONARITY_TOL = 1e-8


@dataclass(frozen=True)
class NarSpec:
    """Order-p network autoregression: coefficient matrices plus one G per lag."""

    p: int
    A: tuple
    G: tuple

    def __init__(self, p: int, A: Sequence, G: Sequence[NeighborhoodFn]):
        A = tuple(np.asarray(a, dtype=float) for a in A)
        G = tuple(G)
        if len(A) != p or len(G) != p:
            raise ValueError(f"need exactly p={p} coefficient matrices and neighborhood functions")
        d = A[0].shape[0]
        for a in A:
            if a.shape != (d, d):
                raise ValueError("all coefficient matrices must be square of common dimension")
        object.__setattr__(self, "p", int(p))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "G", G)

    @property
    def d(self) -> int:
        return self.A[0].shape[0]


@dataclass(frozen=True)
class LnarSpec:
    """Per-component network autoregression with d(2p+1) free parameters.

    ``alpha[j, r]`` weights the component's own lag, ``beta[j, r]`` the
    pooled network regressor ``e_r' G_j(Ad_{t-j}) X_{t-j}``.  The applied
    neighborhood output has its diagonal zeroed so the own lag is never
    double counted.
    """

    p: int
    alpha: np.ndarray
    beta: np.ndarray
    G: tuple

    def __init__(self, p: int, alpha, beta, G: Sequence[NeighborhoodFn]):
        alpha = np.atleast_2d(np.asarray(alpha, dtype=float))
        beta = np.atleast_2d(np.asarray(beta, dtype=float))
        if alpha.shape != beta.shape or alpha.shape[0] != p:
            raise ValueError("alpha and beta must both have shape (p, d)")
        if len(G) != p:
            raise ValueError("need one neighborhood function per lag")
        object.__setattr__(self, "p", int(p))
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "G", tuple(G))

    @property
    def d(self) -> int:
        return self.alpha.shape[1]

    @property
    def c_lambda(self) -> float:
        """max_r sum_j (|alpha_{j,r}| + |beta_{j,r}|), the stationarity constant."""
        return float((np.abs(self.alpha) + np.abs(self.beta)).sum(axis=0).max())

    def coefficient_matrix(self, j: int) -> np.ndarray:
        """Lag-j coefficient matrix of the embedding into the full model.

        Row r carries alpha on the diagonal and beta everywhere else.
        """
        d = self.d
        m = np.repeat(self.beta[j][:, None], d, axis=1)
        np.fill_diagonal(m, self.alpha[j])
        return m

    def to_nar(self) -> NarSpec:
        """Exact embedding: A_j rows (alpha, beta, ..) with G'_j = I + zero-diag G_j."""
        A = [self.coefficient_matrix(j) for j in range(self.p)]
        G = [NeighborhoodFn.identity_plus(g) for g in self.G]
        return NarSpec(self.p, A, G)


def _sigma_from_any(sigma, d: int) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim == 1:
        if sigma.shape[0] != d:
            raise ValueError("diagonal sigma length must match mu")
        return np.diag(sigma)
    if sigma.shape != (d, d):
        raise ValueError("sigma must be (d, d) or a length-d diagonal")
    return sigma


class InnovationSpec:
    """Gaussian innovations with mean ``mu`` and covariance ``sigma``.

    The symmetric factor of sigma is computed once (a Cholesky failure
    reports the covariance as not positive definite).  Draws are made per
    time point and per component in a fixed row-major order, so paths are
    reproducible from the seed alone.
    """

    def __init__(self, mu, sigma):
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        sigma = _sigma_from_any(sigma, mu.shape[0])
        if not np.allclose(sigma, sigma.T, atol=1e-10):
            raise ValueError("sigma must be symmetric")
        try:
            chol = np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError as exc:
            raise ValueError("sigma is not positive definite") from exc
        self.mu = mu
        self.sigma = sigma
        self._chol = chol

    @property
    def d(self) -> int:
        return self.mu.shape[0]

    @staticmethod
    def standard(d: int) -> "InnovationSpec":
        return InnovationSpec(np.zeros(d), np.eye(d))

    @staticmethod
    def banded1(mu, main, off1, scale: float = 1.0) -> "InnovationSpec":
        """Tridiagonal covariance from its main and first off-diagonal."""
        main = np.asarray(main, dtype=float)
        off1 = np.asarray(off1, dtype=float)
        d = main.shape[0]
        sigma = np.diag(main) + np.diag(off1, 1) + np.diag(off1, -1)
        return InnovationSpec(mu, scale * sigma)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """(n, d) innovation draws, one row per time point."""
        z = rng.standard_normal((n, self.d))
        return self.mu + z @ self._chol.T


@dataclass
class CompanionForm:
    """Stacked order-1 representation of an order-p specification.

    ``tilde_a`` holds the coefficient blocks in the first block row and
    identities on the sub-diagonal; :meth:`assemble` builds the matching
    modulation matrix from the lagged snapshots (newest first) so that the
    elementwise product drives ``(dp)``-dimensional recursion.
    """

    tilde_a: np.ndarray
    d: int
    p: int
    g: tuple
    lnar_blocks: bool = False

    def assemble(self, ad_lags: Sequence[np.ndarray]) -> np.ndarray:
        """Modulation matrix for snapshots ``(Ad_{t-1}, ..., Ad_{t-p})``."""
        if len(ad_lags) != self.p:
            raise ValueError(f"need {self.p} lagged snapshots, got {len(ad_lags)}")
        d, p = self.d, self.p
        out = np.zeros((d * p, d * p))
        for j, (g, ad) in enumerate(zip(self.g, ad_lags)):
            out[:d, j * d:(j + 1) * d] = g.apply(ad)
        for j in range(p - 1):
            out[(j + 1) * d:(j + 2) * d, j * d:(j + 1) * d] = np.eye(d)
        return out


def build_companion(spec: Union[NarSpec, LnarSpec]) -> CompanionForm:
    if isinstance(spec, LnarSpec):
        nar = spec.to_nar()
        form = build_companion(nar)
        form.lnar_blocks = True
        return form
    d, p = spec.d, spec.p
    tilde = np.zeros((d * p, d * p))
    for j, a in enumerate(spec.A):
        tilde[:d, j * d:(j + 1) * d] = a
    for j in range(p - 1):
        tilde[(j + 1) * d:(j + 2) * d, j * d:(j + 1) * d] = np.eye(d)
    return CompanionForm(tilde_a=tilde, d=d, p=p, g=spec.G)


def _companion_of(mats: Sequence[np.ndarray]) -> np.ndarray:
    d = mats[0].shape[0]
    p = len(mats)
    out = np.zeros((d * p, d * p))
    for j, m in enumerate(mats):
        out[:d, j * d:(j + 1) * d] = m
    for j in range(p - 1):
        out[(j + 1) * d:(j + 2) * d, j * d:(j + 1) * d] = np.eye(d)
    return out


def spectral_radius(m: np.ndarray) -> float:
    try:
        return float(np.abs(np.linalg.eigvals(m)).max())
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("eigenvalue solver failed on the companion matrix") from exc


@dataclass(frozen=True)
class NarStationarity:
    holds: bool
    rho: float


@dataclass(frozen=True)
class LnarStationarity:
    holds: bool
    c_lambda: float
    certified: bool
    rho_bound: float


def check_stationarity_nar(spec: NarSpec, tol: float = STATIONARITY_TOL) -> NarStationarity:
    """Spectral-radius check on the companion matrix of elementwise |A_j|.

    The modulation matrices have entries bounded by 1 in magnitude, so
    rho < 1 for the absolute-value companion guarantees a stationary
    causal solution regardless of the network.  The boundary counts as
    failure (strict inequality required).
    """
    rho = spectral_radius(_companion_of([np.abs(a) for a in spec.A]))
    return NarStationarity(holds=bool(rho < 1.0 - tol), rho=rho)


def check_stationarity_lnar(spec: LnarSpec) -> LnarStationarity:
    """Row-sum stationarity check for the per-component model.

    Requires every neighborhood function to carry an infinity-norm
    certificate; the reported ``rho_bound = c_lambda**(1/p)`` bounds the
    spectral radius of the absolute stacked coefficient matrix for every
    admissible snapshot.
    """
    certified = all(g.infty_norm_certified() for g in spec.G)
    c = spec.c_lambda
    return LnarStationarity(
        holds=bool(certified and c < 1.0),
        c_lambda=c,
        certified=certified,
        rho_bound=float(c ** (1.0 / spec.p)),
    )


def snapshot_spectral_radii(spec: Union[NarSpec, LnarSpec], ads: AdjacencySeries) -> np.ndarray:
    """rho(tilde_A * tilde_G(snapshot)) per snapshot, the sampled form of the
    alternative stationarity condition on the stacked process."""
    form = build_companion(spec)
    p = form.p
    out = np.empty(len(ads))
    for t in range(len(ads)):
        lags = [ads[t] for _ in range(p)]
        out[t] = spectral_radius(form.tilde_a * form.assemble(lags))
    return out


def _check_network_cover(ads: AdjacencySeries, total: int, what: str) -> None:
    if len(ads) < total:
        raise ValueError(
            f"{what}: network series too short, need at least {total} snapshots, got {len(ads)}"
        )


def _modulation(g: NeighborhoodFn, ad: np.ndarray, zero_diag: bool) -> np.ndarray:
    m = g.apply(ad)
    if zero_diag:
        m = m.copy()
        np.fill_diagonal(m, 0.0)
    return m


def simulate_nar(spec: NarSpec, ads: AdjacencySeries, innov: InnovationSpec,
                 n: int, burn_in: int = 500, seed=None,
                 rng: Optional[np.random.Generator] = None,
                 allow_explosive: bool = False) -> np.ndarray:
    """Simulate the full model by exact recursion; returns the last n columns.

    Pre-sample values are zero and washed out by the burn-in.  The network
    series must cover the whole run (``burn_in + n`` snapshots aligned to
    the output axis).  Raises for non-stationary specifications unless
    ``allow_explosive`` is set, in which case every step is checked for
    finiteness.
    """
    if not allow_explosive:
        st = check_stationarity_nar(spec)
        if not st.holds:
            raise ValueError(
                f"spec fails the stationarity check (rho={st.rho:.6f}); "
                "pass allow_explosive=True to override"
            )
    if innov.d != spec.d:
        raise ValueError("innovation dimension does not match spec")
    total = burn_in + n
    _check_network_cover(ads, total, "simulate_nar")
    if rng is None:
        rng = np.random.default_rng(seed)
    eps = innov.sample(rng, total)
    d, p = spec.d, spec.p
    x = np.zeros((d, total))
    for t in range(total):
        acc = eps[t].copy()
        for j in range(1, p + 1):
            if t - j < 0:
                break
            acc += (spec.A[j - 1] * spec.G[j - 1].apply(ads[t - j])) @ x[:, t - j]
        x[:, t] = acc
        if allow_explosive and not np.isfinite(acc).all():
            raise FloatingPointError(f"simulation became non-finite at step {t}")
    return x[:, burn_in:]


def simulate_lnar(spec: LnarSpec, ads: AdjacencySeries, innov: InnovationSpec,
                  n: int, burn_in: int = 500, seed=None,
                  rng: Optional[np.random.Generator] = None,
                  allow_explosive: bool = False) -> np.ndarray:
    """Simulate the per-component model; same contract as :func:`simulate_nar`.

    The recursion is run in its componentwise form
    ``x_r = sum_j alpha_{j,r} x_{t-j;r} + beta_{j,r} (G_j x_{t-j})_r + eps_r``
    with zero-diagonal modulation, which coincides elementwise with the
    full-model embedding.
    """
    if not allow_explosive:
        st = check_stationarity_lnar(spec)
        if st.certified and not st.holds:
            raise ValueError(
                f"spec fails the stationarity check (c_lambda={st.c_lambda:.6f}); "
                "pass allow_explosive=True to override"
            )
    if innov.d != spec.d:
        raise ValueError("innovation dimension does not match spec")
    total = burn_in + n
    _check_network_cover(ads, total, "simulate_lnar")
    if rng is None:
        rng = np.random.default_rng(seed)
    eps = innov.sample(rng, total)
    d, p = spec.d, spec.p
    x = np.zeros((d, total))
    for t in range(total):
        acc = eps[t].copy()
        for j in range(1, p + 1):
            if t - j < 0:
                break
            xl = x[:, t - j]
            g = _modulation(spec.G[j - 1], ads[t - j], zero_diag=True)
            acc += spec.alpha[j - 1] * xl + spec.beta[j - 1] * (g @ xl)
        x[:, t] = acc
        if allow_explosive and not np.isfinite(acc).all():
            raise FloatingPointError(f"simulation became non-finite at step {t}")
    return x[:, burn_in:]


CoefficientFn = Union[NeighborhoodFn, Callable[..., np.ndarray], None]


def simulate_gnlp_truncated(coeff_fns: Sequence[CoefficientFn], ads: AdjacencySeries,
                            innov: InnovationSpec, n: int, seed=None,
                            rng: Optional[np.random.Generator] = None,
                            burn_in: int = 0) -> np.ndarray:
    """Simulate a truncated network linear (moving-average) process.

    ``coeff_fns[j-1]`` produces the lag-j coefficient matrix; it may be a
    :class:`NeighborhoodFn` (applied to the lag-j snapshot), a callable
    receiving the snapshots ``(Ad_{t-1}, ..., Ad_{t-j})`` newest first, or
    None for a zero lag.  The result is exact for finite-order
    moving averages:

        X_t = sum_j f_j(Ad_{t-1}, ..., Ad_{t-j}) eps_{t-j} + eps_t.
    """
    total = burn_in + n
    J = len(coeff_fns)
    _check_network_cover(ads, total, "simulate_gnlp_truncated")
    if rng is None:
        rng = np.random.default_rng(seed)
    eps = innov.sample(rng, total)
    d = innov.d
    x = np.zeros((d, total))
    for t in range(total):
        acc = eps[t].copy()
        for j in range(1, J + 1):
            fn = coeff_fns[j - 1]
            if fn is None or t - j < 0:
                continue
            if isinstance(fn, NeighborhoodFn):
                b = fn.apply(ads[t - j])
            else:
                lags = [ads[t - s] for s in range(1, j + 1)]
                b = np.asarray(fn(*lags), dtype=float)
            acc += b @ eps[t - j]
        x[:, t] = acc
    return x[:, burn_in:]


def ma_infinity_coeffs(spec: Union[NarSpec, LnarSpec], ads: AdjacencySeries, t: int,
                       J: int, check_bound: bool = True) -> List[np.ndarray]:
    """Moving-average coefficient matrices B_{t,0..J} of the causal solution.

    ``B_{t,j}`` is the top-left d x d block of the product of the first j
    stacked coefficient-modulation matrices along the path, so that
    ``X_t = sum_j B_{t,j} eps_{t-j}``.  ``B_{t,0}`` is the identity.  When
    ``check_bound`` is set, each coefficient is verified against the
    spectral-norm envelope ``||B_{t,j}||_2 <= || |tilde_A|^j ||_2``.
    """
    if J < 0:
        raise ValueError("J must be nonnegative")
    form = build_companion(spec)
    d, p = form.d, form.p
    if t - J - p + 1 < 0:
        raise ValueError("network series does not reach back far enough for the requested truncation")
    coeffs = [np.eye(d)]
    prod = np.eye(d * p)
    abs_tilde = np.abs(form.tilde_a)
    abs_pow = np.eye(d * p)
    sel = np.zeros((d * p, d))
    sel[:d, :] = np.eye(d)
    for j in range(1, J + 1):
        # factor s = j of the stacked product assembles (Ad_{t-j}, ..., Ad_{t-j-p+1})
        u = t - j + 1
        snap = [ads[u - s] for s in range(1, p + 1)]
        step = form.tilde_a * form.assemble(snap)
        prod = prod @ step
        coeffs.append(sel.T @ prod @ sel)
        if check_bound:
            abs_pow = abs_pow @ abs_tilde
            lhs = np.linalg.norm(coeffs[-1], 2)
            rhs = np.linalg.norm(abs_pow, 2)
            if lhs > rhs + 1e-9:
                raise AssertionError(
                    f"moving-average coefficient at lag {j} violates its norm envelope "
                    f"({lhs:.3e} > {rhs:.3e})"
                )
    return coeffs
