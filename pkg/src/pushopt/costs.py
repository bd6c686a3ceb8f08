"""Local cost functions, ensembles for the two benchmark cases, minimizers.

Two cost kinds are supported:

* ``quadratic``: f(x) = x' P x / 2 + q' x with P symmetric psd,
* ``regularized_ls``: f(x) = (||A x - b||^2 + delta ||x||^2) / 2.

Both have affine gradients and a constant Hessian (P, resp. A'A + delta I),
so smoothness and strong-convexity constants are the extreme Hessian
eigenvalues, computed with the shared power-iteration kernel.

Aggregate quantities (the minimizer, its strong convexity ``mu_agg`` and
the harmonic rates built from it) always refer to the average cost
f = (1/n) sum_k f_k.  The minimizer is the same under the sum convention;
only the constants differ by the factor n, and every formula downstream is
stated for the average form.

Ensemble generators:

* case1: regularized least squares, entries of A_j (m x d) and b_j drawn
  i.i.d. uniform on the unit interval; every local cost is strongly convex
  (mu_k >= delta).
* case2: rank-deficient quadratics P_j = R_j R_j' with R_j (d x m_rank),
  m_rank < d, entries uniform on the unit interval; individual costs are
  merely convex but the aggregate Hessian must be positive definite
  (resampled from the next substream otherwise).
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    FailedAggregatePDError,
    SingularSystemError,
    ValidationError,
)
from .linalg import pi_norm, symmetric_extremes

KIND_QUADRATIC = "quadratic"
KIND_REGLS = "regularized_ls"

_SYM_TOL = 1e-12
_PSD_TOL = 1e-10


@dataclass(frozen=True)
class LocalCost:
    """One agent's cost with its smoothness/strong-convexity constants.

    ``hess`` is the constant Hessian and ``lin`` the gradient at zero, so
    grad f(x) = hess @ x + lin for either kind.
    """

    kind: str
    d: int
    L: float
    mu: float
    hess: np.ndarray
    lin: np.ndarray
    P: np.ndarray = None
    q: np.ndarray = None
    A: np.ndarray = None
    b: np.ndarray = None
    delta_reg: float = None

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise DimensionMismatchError(f"point of shape {x.shape}, cost dimension {self.d}")
        if self.kind == KIND_QUADRATIC:
            return self.P @ x + self.q
        return self.A.T @ (self.A @ x - self.b) + self.delta_reg * x


def quadratic_cost(P, q, tol=1e-10):
    """Cost x'Px/2 + q'x.  P must be symmetric positive semidefinite."""
    P = np.asarray(P, dtype=float)
    q = np.asarray(q, dtype=float)
    d = q.shape[0]
    if P.shape != (d, d):
        raise DimensionMismatchError(f"P shape {P.shape} vs linear term of length {d}")
    if np.max(np.abs(P - P.T)) > _SYM_TOL:
        raise ValidationError("quadratic matrix must be symmetric")
    L, mu = convexity_constants_from(P, tol=tol)
    if mu < -_PSD_TOL:
        raise ValidationError(f"quadratic matrix has negative eigenvalue {mu}")
    return LocalCost(
        kind=KIND_QUADRATIC, d=d, L=L, mu=max(mu, 0.0),
        hess=P, lin=q.copy(), P=P, q=q,
    )


def least_squares_cost(A, b, delta_reg, tol=1e-10):
    """Cost (||Ax - b||^2 + delta ||x||^2) / 2 with delta > 0."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or b.shape != (A.shape[0],):
        raise DimensionMismatchError(f"data shapes {A.shape}, {b.shape} incompatible")
    if delta_reg < 0.0:
        raise ValidationError("regularization weight must be nonnegative")
    d = A.shape[1]
    hess = A.T @ A + delta_reg * np.eye(d)
    L, mu = convexity_constants_from(hess, tol=tol)
    return LocalCost(
        kind=KIND_REGLS, d=d, L=L, mu=mu,
        hess=hess, lin=-(A.T @ b), A=A, b=b, delta_reg=float(delta_reg),
    )


def gradient(cost, x):
    """Gradient of a local cost at x."""
    return cost.gradient(x)


def convexity_constants(cost, tol=1e-10):
    """(L, mu): extreme eigenvalues of the cost's Hessian."""
    return convexity_constants_from(cost.hess, tol=tol)


def convexity_constants_from(H, tol=1e-10):
    lam_max, lam_min = symmetric_extremes(H, tol=tol)
    return float(lam_max), float(lam_min)


@dataclass(frozen=True)
class CostEnsemble:
    """n local costs of equal dimension plus aggregate constants.

    ``hess_stack``/``lin_stack`` cache the per-agent Hessians and
    gradients-at-zero for vectorized evaluation; ``agg_hess`` is the
    Hessian of the average cost and ``mu_agg`` its smallest eigenvalue.
    """

    case_tag: str
    costs: tuple
    n: int
    d: int
    L_max: float
    L_bar: float
    mu_agg: float
    agg_hess: np.ndarray
    hess_stack: np.ndarray
    lin_stack: np.ndarray


def cost_ensemble(costs, case_tag):
    """Assemble and validate an ensemble for one of the two benchmark cases."""
    if case_tag not in ("case1", "case2"):
        raise ValidationError(f"unknown case tag {case_tag!r}")
    costs = tuple(costs)
    if not costs:
        raise ValidationError("ensemble needs at least one cost")
    d = costs[0].d
    if any(c.d != d for c in costs):
        raise DimensionMismatchError("all costs must share one dimension")
    n = len(costs)
    hess_stack = np.stack([c.hess for c in costs])
    lin_stack = np.stack([c.lin for c in costs])
    agg_hess = hess_stack.mean(axis=0)
    _, mu_agg = convexity_constants_from(agg_hess)
    L_values = np.array([c.L for c in costs])
    if case_tag == "case1" and any(c.mu <= 0.0 for c in costs):
        raise ValidationError("case1 requires every local cost strongly convex")
    if mu_agg <= _PSD_TOL * max(float(L_values.max()), 1.0):
        raise FailedAggregatePDError(
            f"aggregate Hessian not positive definite (mu_agg={mu_agg})"
        )
    return CostEnsemble(
        case_tag=case_tag,
        costs=costs,
        n=n,
        d=d,
        L_max=float(L_values.max()),
        L_bar=float(L_values.mean()),
        mu_agg=float(mu_agg),
        agg_hess=agg_hess,
        hess_stack=hess_stack,
        lin_stack=lin_stack,
    )


def make_case1_ensemble(n, d, m, delta_reg, seed):
    """Regularized least-squares ensemble with unit-interval random data."""
    if n < 1 or d < 1 or m < 1:
        raise ValidationError("n, d, m must all be >= 1")
    if delta_reg <= 0.0:
        raise ValidationError("case1 requires delta_reg > 0")
    rng = np.random.default_rng(seed)
    costs = []
    for _ in range(n):
        A = rng.random((m, d))
        b = rng.random(m)
        costs.append(least_squares_cost(A, b, delta_reg))
    return cost_ensemble(costs, "case1")


def make_case2_ensemble(n, d, m_rank, seed, max_attempts=100):
    """Rank-deficient quadratic ensemble with a positive definite aggregate.

    Resamples from the substream ``seed + attempt`` until the aggregate
    Hessian passes the positive-definiteness check.
    """
    if not (1 <= m_rank < d):
        raise ValidationError(f"need 1 <= m_rank < d, got m_rank={m_rank}, d={d}")
    if n < 1:
        raise ValidationError("n must be >= 1")
    for attempt in range(max_attempts):
        rng = np.random.default_rng(seed + attempt)
        costs = []
        for _ in range(n):
            R = rng.random((d, m_rank))
            q = rng.random(d)
            costs.append(quadratic_cost(R @ R.T, q))
        try:
            return cost_ensemble(costs, "case2")
        except FailedAggregatePDError:
            continue
    raise FailedAggregatePDError(
        f"no positive definite aggregate in {max_attempts} attempts "
        f"(n={n}, d={d}, m_rank={m_rank})"
    )


def grad_stack(ensemble, u):
    """Gradients of all local costs at their own blocks of u, stacked (n, d)."""
    u = np.asarray(u, dtype=float)
    if u.shape != (ensemble.n, ensemble.d):
        raise DimensionMismatchError(
            f"stacked point {u.shape} vs ensemble ({ensemble.n}, {ensemble.d})"
        )
    return np.einsum("jab,jb->ja", ensemble.hess_stack, u) + ensemble.lin_stack


def grad0_pi_norm(ensemble, pi):
    """Pi-weighted norm of the stacked gradient at the origin."""
    return pi_norm(ensemble.lin_stack, pi)


def ensemble_minimizer(ensemble, tol=1e-9):
    """Minimizer of the average cost by a dense solve of the normal equations.

    The solution is validated by the aggregate gradient residual
    ``||sum_j grad f_j(x*)|| <= tol * (1 + ||x*||)``.
    """
    rhs = -ensemble.lin_stack.mean(axis=0)
    try:
        x_star = np.linalg.solve(ensemble.agg_hess, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"aggregate Hessian is singular: {exc}") from None
    total_grad = grad_stack(ensemble, np.tile(x_star, (ensemble.n, 1))).sum(axis=0)
    if np.linalg.norm(total_grad) > tol * (1.0 + np.linalg.norm(x_star)):
        raise SingularSystemError(
            f"minimizer residual {np.linalg.norm(total_grad)} above tolerance"
        )
    return x_star


def scale_ensemble(ensemble, factor):
    """The ensemble with every cost multiplied by ``factor``.

    Scaled costs are returned in quadratic form (factor * hess,
    factor * lin), which represents factor * f_j up to an additive
    constant.  Powers of two scale the stored constants exactly.
    """
    if factor <= 0.0:
        raise ValidationError("scale factor must be positive")
    costs = [quadratic_cost(factor * c.hess, factor * c.lin) for c in ensemble.costs]
    return cost_ensemble(costs, ensemble.case_tag)


def ensemble_to_dict(ensemble):
    """Serialize with per-cost payloads plus the constants for cross-checks."""
    payload = {"case_tag": ensemble.case_tag, "n": ensemble.n, "d": ensemble.d, "costs": []}
    for c in ensemble.costs:
        entry = {"kind": c.kind, "L": float(c.L), "mu": float(c.mu)}
        if c.kind == KIND_QUADRATIC:
            entry["P"] = [float(v) for v in c.P.ravel()]
            entry["q"] = [float(v) for v in c.q]
        else:
            entry["A"] = [float(v) for v in c.A.ravel()]
            entry["m"] = int(c.A.shape[0])
            entry["b"] = [float(v) for v in c.b]
            entry["delta_reg"] = float(c.delta_reg)
        payload["costs"].append(entry)
    return payload


def ensemble_from_dict(payload, tol=1e-8):
    """Rebuild an ensemble, recomputing L_k and mu_k and verifying the stored values."""
    try:
        case_tag = payload["case_tag"]
        d = int(payload["d"])
        entries = payload["costs"]
        if int(payload["n"]) != len(entries):
            raise ValidationError("stored n disagrees with the number of costs")
        costs = []
        for entry in entries:
            if entry["kind"] == KIND_QUADRATIC:
                P = np.asarray(entry["P"], dtype=float).reshape(d, d)
                q = np.asarray(entry["q"], dtype=float)
                cost = quadratic_cost(P, q)
            elif entry["kind"] == KIND_REGLS:
                m = int(entry["m"])
                A = np.asarray(entry["A"], dtype=float).reshape(m, d)
                b = np.asarray(entry["b"], dtype=float)
                cost = least_squares_cost(A, b, float(entry["delta_reg"]))
            else:
                raise ValidationError(f"unknown cost kind {entry['kind']!r}")
            for name, stored, recomputed in (("L", entry["L"], cost.L), ("mu", entry["mu"], cost.mu)):
                if abs(stored - recomputed) > tol * max(1.0, abs(recomputed)):
                    raise ValidationError(
                        f"stored {name}={stored} disagrees with recomputed {recomputed}"
                    )
            costs.append(cost)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed ensemble payload: {exc}") from None
    return cost_ensemble(costs, case_tag)
