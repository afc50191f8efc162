"""Restricted-isometry estimates for column products, sparse recovery, and the weighting ratio."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ContractError
from .walks import column_product

FAMILIES = ("rademacher", "gaussian")
DOMAINS = ("full", "multiset", "distinct")


@dataclass(frozen=True)
class RipReport:
    r: int
    K: int
    n: int
    s: int
    trials: int
    measured_epsilon: float
    seed: int


@dataclass(frozen=True)
class RecoveryResult:
    support_correct: bool
    relative_l2_error: float
    iterations: int
    x: np.ndarray
    support: tuple[int, ...]


def sample_embedding_matrix(r: int, K: int, family: str = "rademacher", seed: int = 0) -> np.ndarray:
    """r x K matrix with entries +-1/sqrt(r) or Normal(0, 1/r)."""
    if r < 1 or K < 1:
        raise ContractError("r and K must be positive")
    rng = np.random.default_rng(seed)
    if family == "rademacher":
        return rng.choice([-1.0, 1.0], size=(r, K)) / math.sqrt(r)
    if family == "gaussian":
        return rng.standard_normal((r, K)) / math.sqrt(r)
    raise ContractError(f"unknown family {family!r}; expected one of {FAMILIES}")


def index_tuples(K: int, n: int, domain: str = "full") -> list[tuple[int, ...]]:
    """Column index tuples of an n-way product, lexicographic.

    ``full`` keeps every ordered tuple. ``multiset`` keeps non-decreasing
    tuples, one per set of column multiplicities (ordered tuples that are
    permutations of each other give identical columns). ``distinct`` keeps
    strictly increasing tuples, which also drops repeated factors; for
    Rademacher W a repeated factor squares to a constant column.
    """
    if domain == "full":
        return list(itertools.product(range(K), repeat=n))
    if domain == "multiset":
        return list(itertools.combinations_with_replacement(range(K), n))
    if domain == "distinct":
        return list(itertools.combinations(range(K), n))
    raise ContractError(f"unknown domain {domain!r}; expected one of {DOMAINS}")


def product_matrix(W: np.ndarray, n: int, domain: str = "full", rescale: bool = True) -> np.ndarray:
    """n-way column product of W restricted to ``domain``.

    With ``rescale`` the product is multiplied by ``r^((n-1)/2)`` so that
    products of +-1/sqrt(r) columns have unit norm.
    """
    r, K = W.shape
    if domain == "full":
        M = column_product(W, n)
    else:
        cols = index_tuples(K, n, domain)
        M = np.stack([np.prod(W[:, list(t)], axis=1) for t in cols], axis=1)
    if rescale:
        M = M * r ** ((n - 1) / 2)
    return M


def fold_to_domain(x_full: np.ndarray, K: int, n: int, domain: str) -> np.ndarray:
    """Map a vector over ordered tuples onto ``domain`` by summing permutations.

    Columns of a full product that are permutations of each other coincide, so
    ``product_matrix(W, n, 'full') @ x == product_matrix(W, n, 'multiset') @ fold``.
    For ``distinct`` the entries on tuples with repeats are dropped.
    """
    if domain == "full":
        return np.asarray(x_full, dtype=float).copy()
    pos = {t: k for k, t in enumerate(index_tuples(K, n, domain))}
    out = np.zeros(len(pos))
    for t, val in zip(itertools.product(range(K), repeat=n), x_full):
        key = tuple(sorted(t))
        if key in pos:
            out[pos[key]] += val
    return out


def _sparse_unit(rng: np.random.Generator, N: int, s: int) -> np.ndarray:
    x = np.zeros(N)
    x[rng.choice(N, size=s, replace=False)] = rng.standard_normal(s)
    return x / np.linalg.norm(x)


def estimate_rip_constant(M: np.ndarray, s: int, trials: int = 200, seed: int = 0,
                          n: int = 1) -> RipReport:
    """Largest norm distortion over ``trials`` random s-sparse unit vectors.

    This is a lower bound on the RIP constant of M; compare with
    :func:`exact_rip_constant` when the support count is small.
    """
    r, N = M.shape
    if s < 1 or s > N:
        raise ContractError(f"sparsity {s} must lie in [1, {N}]")
    rng = np.random.default_rng(seed)
    eps = 0.0
    for _ in range(trials):
        x = _sparse_unit(rng, N, s)
        eps = max(eps, abs(np.linalg.norm(M @ x) - 1.0))
    return RipReport(r, N, n, s, trials, float(eps), seed)


def exact_rip_constant(M: np.ndarray, s: int, max_supports: int = 200_000) -> float:
    """RIP constant by enumerating every support of size s.

    On a support S the norm ratio ranges over ``[sqrt(lmin), sqrt(lmax)]`` of
    the Gram matrix ``M_S^T M_S``.
    """
    N = M.shape[1]
    if s < 1 or s > N:
        raise ContractError(f"sparsity {s} must lie in [1, {N}]")
    if math.comb(N, s) > max_supports:
        raise ContractError(f"{math.comb(N, s)} supports exceed the enumeration limit")
    G = M.T @ M
    eps = 0.0
    for S in itertools.combinations(range(N), s):
        ev = np.linalg.eigvalsh(G[np.ix_(S, S)])
        lo, hi = math.sqrt(max(ev[0], 0.0)), math.sqrt(max(ev[-1], 0.0))
        eps = max(eps, hi - 1.0, 1.0 - lo)
    return float(eps)


def omp_recover(M: np.ndarray, y: np.ndarray, s: int, x_true: np.ndarray | None = None,
                tol: float = 1e-12) -> RecoveryResult:
    """Orthogonal matching pursuit with at most s atoms.

    Each iteration adds the column most correlated with the residual and refits
    by least squares on the selected support. Stops early once the residual
    vanishes. Without ``x_true`` the support check is reported as true.
    """
    if s < 0:
        raise ContractError("sparsity must be non-negative")
    y = np.asarray(y, dtype=float)
    N = M.shape[1]
    norms = np.linalg.norm(M, axis=0)
    norms[norms == 0] = 1.0
    support: list[int] = []
    coef = np.zeros(0)
    resid = y.copy()
    y_norm = np.linalg.norm(y)
    it = 0
    while it < s and np.linalg.norm(resid) > tol * max(1.0, y_norm):
        corr = np.abs(M.T @ resid) / norms
        corr[support] = -1.0
        support.append(int(np.argmax(corr)))
        sub = M[:, support]
        if np.linalg.matrix_rank(sub) < len(support):
            raise np.linalg.LinAlgError(f"selected columns {support} are linearly dependent")
        coef, *_ = np.linalg.lstsq(sub, y, rcond=None)
        resid = y - sub @ coef
        it += 1
    x = np.zeros(N)
    x[support] = coef
    if x_true is None:
        return RecoveryResult(True, 0.0, it, x, tuple(sorted(support)))
    true_support = set(np.flatnonzero(x_true).tolist())
    denom = max(1e-12, float(np.linalg.norm(x_true)))
    err = float(np.linalg.norm(x - x_true)) / denom if np.any(x_true) else float(np.linalg.norm(x))
    kept = {k for k in support if x[k] != 0}
    return RecoveryResult(kept == true_support, err, it, x, tuple(sorted(support)))


def random_weighted_counts(rng: np.random.Generator, N: int, s: int, max_count: int = 5) -> np.ndarray:
    """s-sparse vector shaped like ``Lambda c``: positive counts times weights in (0, 1)."""
    x = np.zeros(N)
    idx = rng.choice(N, size=s, replace=False)
    x[idx] = rng.integers(1, max_count + 1, size=s) * rng.uniform(0.05, 1.0, size=s)
    return x


def recovery_rate(r: int, K: int, n: int, s: int, trials: int = 100, family: str = "rademacher",
                  domain: str = "distinct", seed: int = 0) -> float:
    """Fraction of trials where OMP finds the exact support of a weighted count vector."""
    hits = 0
    for t in range(trials):
        M = product_matrix(sample_embedding_matrix(r, K, family, seed + t), n, domain)
        rng = np.random.default_rng([seed, t])
        x = random_weighted_counts(rng, M.shape[1], s)
        res = omp_recover(M, M @ x, s, x_true=x)
        hits += res.support_correct and res.relative_l2_error <= 1e-6
    return hits / trials


def rip_sweep(rs=(64, 256, 1024), K: int = 6, n: int = 2, s: int = 4, family: str = "rademacher",
              domain: str = "distinct", matrices: int = 20, vectors: int = 200,
              recovery_trials: int = 100, seed: int = 0) -> list[dict]:
    """One row per r: the median distortion over ``matrices`` draws of W plus an OMP recovery rate."""
    rows = []
    for r in rs:
        eps = [estimate_rip_constant(product_matrix(sample_embedding_matrix(r, K, family, seed + t), n, domain),
                                     s, vectors, seed=seed + t, n=n).measured_epsilon
               for t in range(matrices)]
        rows.append({
            "family": family, "r": r, "K": K, "n": n, "s": s, "trials": matrices,
            "measured_epsilon": float(np.median(eps)),
            "recovery_rate": recovery_rate(r, K, n, s, recovery_trials, family, domain, seed)
            if recovery_trials else float("nan"),
        })
    return rows


class BRatio(NamedTuple):
    B0: float
    Bmin_upper: float
    bound: float

    @property
    def ratio(self) -> float:
        return self.Bmin_upper / self.B0


def b_ratio_experiment(rho: int, s: int, Upsilon: float, upsilon: float,
                       b: float = 1.0, c: float = 1.0) -> BRatio:
    """Closed forms for the unweighted and weighted error factors of a sparse scenario.

    ``rho`` of ``s`` features are important: the target puts weight b on them
    and the weighting scales them by Upsilon, the rest by upsilon.
    """
    if not (1 <= rho <= s):
        raise ContractError("need 1 <= rho <= s")
    if min(Upsilon, upsilon, b, c) <= 0:
        raise ContractError("Upsilon, upsilon, b and c must be positive")
    B0 = b * c * math.sqrt(rho * s)
    Bmin = math.sqrt(rho * (Upsilon * c) ** 2 + (s - rho) * (c * upsilon) ** 2) * math.sqrt(rho * (b / Upsilon) ** 2)
    bound = math.sqrt(rho / s + (1 - rho / s) * (upsilon / Upsilon) ** 2)
    if Bmin / B0 > bound + 1e-12:
        raise ContractError(f"ratio {Bmin / B0} exceeds bound {bound}")
    return BRatio(B0, Bmin, bound)


def b_ratio_vectors(rho: int, s: int, Upsilon: float, upsilon: float,
                    b: float = 1.0, c: float = 1.0) -> BRatio:
    """The same quantities from explicit vectors: ``||c|| ||beta||`` against ``||Lambda c|| ||Lambda^-1 beta||``."""
    counts = np.full(s, c)
    beta = np.zeros(s)
    beta[:rho] = b
    lam = np.full(s, upsilon)
    lam[:rho] = Upsilon
    B0 = np.linalg.norm(counts) * np.linalg.norm(beta)
    Bw = np.linalg.norm(lam * counts) * np.linalg.norm(beta / lam)
    bound = math.sqrt(rho / s + (1 - rho / s) * (upsilon / Upsilon) ** 2)
    return BRatio(float(B0), float(Bw), bound)
