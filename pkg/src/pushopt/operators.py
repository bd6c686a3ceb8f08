"""Fixed-point operator of gradient-push, its contraction data, and bounds.

Gradient-push in its mixed-state form updates a stacked state w by

    w(t+1) = W_mix( w(t) - alpha * grad F( w(t) / y(t) ) ),

where y(t) are the push-sum weights.  Replacing y_j(t) by its limit
n pi_j gives a time-invariant operator (``gradient_push_operator``); the
difference is a perturbation (``push_sum_perturbation``) that vanishes
geometrically with the mixing rate rho.  For admissible stepsizes the
operator is a contraction in the pi-weighted norm, with a unique fixed
point that sits within O(alpha) of the replicated minimizer.  This module
computes:

* the certified stepsize ceiling and contraction rate for both benchmark
  cost cases,
* the measured operator Lipschitz constant for quadratic-Hessian costs,
* the fixed point by Picard iteration with an a-posteriori stopping bound,
* the empirical push-sum constants (coefficient of the 1/y gap and the
  largest inverse weight),
* the convergence envelope for runs, the fixed-point radius, the
  optimality-gap and consensus-error bounds, and the stricter stepsize
  threshold from earlier analyses kept for comparison.
"""

import math
from dataclasses import dataclass

import numpy as np

from .costs import grad0_pi_norm, grad_stack
from .errors import (
    DegenerateMixingError,
    DimensionMismatchError,
    InvalidRateError,
    NoConvergenceError,
    NonpositiveYError,
    NonQuadraticError,
    NotContractiveError,
    NumericError,
    ValidationError,
)
from .linalg import induced_pi_norm, pi_norm


@dataclass(frozen=True)
class OperatorContext:
    """A mixing network, a cost ensemble, and a stepsize, checked for fit."""

    net: object
    ensemble: object
    alpha: float

    def __post_init__(self):
        if self.net.n != self.ensemble.n:
            raise DimensionMismatchError(
                f"network has {self.net.n} agents, ensemble {self.ensemble.n}"
            )
        if self.alpha <= 0.0:
            raise InvalidRateError(f"stepsize must be positive, got {self.alpha}")


@dataclass(frozen=True)
class FixedPoint:
    """A solved fixed point with its accuracy diagnostics."""

    alpha: float
    w: np.ndarray
    w_bar: np.ndarray
    residual: float
    consensus_error: float
    iterations: int


@dataclass(frozen=True)
class ContractionCertificate:
    """Every constant needed to predict a gradient-push run.

    ``contraction_rate`` is the slope C of the certified Lipschitz bound
    1 - C * alpha; ``lipschitz_at_ceiling`` is the measured operator
    Lipschitz constant at the stepsize ceiling (the case2 certificate is
    built from it, for case1 it is informational).  ``gamma_lmax`` and
    ``gamma_lbar`` are the harmonic rates mu*L/(mu+L) built from the
    largest resp. mean smoothness constant; they enter different bounds
    and are deliberately kept apart.  ``legacy_threshold`` is None when
    the network mixes exactly in one step (rho == 0), where the older
    threshold imposes no restriction.
    """

    case_tag: str
    eps: float
    alpha0: float
    contraction_rate: float
    alpha: float
    lipschitz_alpha: float
    lipschitz_at_ceiling: float
    eta_ceiling: float
    consensus_coeff: float
    perturbation_coeff: float
    inv_y_max: float
    perturbation_product: float
    radius: float
    grad0_norm: float
    gap_bound: float
    consensus_bound: float
    legacy_threshold: float
    gamma_lmax: float
    gamma_lbar: float
    rho: float
    pi_min: float
    L_max: float
    L_bar: float
    mu_agg: float

    def __post_init__(self):
        if not self.alpha0 > 0.0:
            raise NumericError(f"stepsize ceiling {self.alpha0} must be positive")
        prod = self.contraction_rate * self.alpha0
        if not (0.0 < prod <= 1.0):
            raise NumericError(f"rate * ceiling = {prod} outside (0, 1]")
        if self.perturbation_product < 1.0:
            raise NumericError("perturbation product below one")
        for name in ("radius", "gap_bound", "consensus_bound", "grad0_norm"):
            if getattr(self, name) < 0.0:
                raise NumericError(f"{name} must be nonnegative")


def mix_stack(net, w):
    """One synchronous exchange: block i of the result is sum_j W[i,j] w_j."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != net.n:
        raise DimensionMismatchError(f"stacked state {w.shape} vs {net.n} agents")
    return net.W @ w


def gradient_push_operator(ctx, w):
    """The limit operator: mix the state after a gradient step at w_j/(n pi_j)."""
    w = np.asarray(w, dtype=float)
    net, ens = ctx.net, ctx.ensemble
    if w.shape != (net.n, ens.d):
        raise DimensionMismatchError(f"state {w.shape} vs ({net.n}, {ens.d})")
    u = w / (net.n * net.pi)[:, None]
    return net.W @ (w - ctx.alpha * grad_stack(ens, u))


def push_sum_perturbation(ctx, y, w):
    """Mixed gap between gradients at the limit weights and at the current ones.

    Scaled by alpha, this is exactly the difference between the true
    mixed-state update with weights y and the limit operator.
    """
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    net, ens = ctx.net, ctx.ensemble
    if y.shape != (net.n,):
        raise DimensionMismatchError(f"weights {y.shape} vs {net.n} agents")
    if np.any(y <= 0.0):
        raise NonpositiveYError("push-sum weights must stay positive")
    g_limit = grad_stack(ens, w / (net.n * net.pi)[:, None])
    g_now = grad_stack(ens, w / y[:, None])
    return net.W @ (g_limit - g_now)


def stepsize_ceiling(net, ensemble, eps=None):
    """Largest certified stepsize for the ensemble's case.

    case1: min_k 2 n pi_k / (L_k + mu_k); case2: min_k 2 n pi_k / (L_k + eps)
    for a fixed eps > 0 (needed because individual case2 costs may have
    mu_k = 0).
    """
    n, pi = net.n, net.pi
    L = np.array([c.L for c in ensemble.costs])
    if ensemble.case_tag == "case1":
        mu = np.array([c.mu for c in ensemble.costs])
        return float(np.min(2.0 * n * pi / (L + mu)))
    if eps is None or eps <= 0.0:
        raise ValidationError("case2 requires eps > 0")
    return float(np.min(2.0 * n * pi / (L + eps)))


def operator_matrix(ctx):
    """Block matrix of the limit operator's linear part.

    Block (k, j) = W[k, j] * (I_d - alpha / (n pi_j) * H_j) with H_j the
    Hessian of cost j; the 1/(n pi_j) factor reflects that the gradient is
    taken at w_j / (n pi_j).  Only defined for quadratic-Hessian costs.
    """
    net, ens = ctx.net, ctx.ensemble
    if any(c.kind not in ("quadratic", "regularized_ls") for c in ens.costs):
        raise NonQuadraticError("operator matrix needs costs with constant Hessians")
    scale = ctx.alpha / (net.n * net.pi)
    S = np.eye(ens.d)[None, :, :] - scale[:, None, None] * ens.hess_stack
    return net.W[:, :, None, None] * S[None, :, :, :]


def operator_lipschitz(ctx, tol=1e-10):
    """Measured Lipschitz constant of the limit operator in the weighted norm."""
    return induced_pi_norm(operator_matrix(ctx), ctx.net.pi, tol=tol)


def contraction_constant(net, ensemble, eps=None):
    """(stepsize ceiling, contraction rate C) with Lip <= 1 - C * alpha.

    case1 uses the closed form min_k mu_k L_k / (n (mu_k + L_k) pi_k);
    case2 measures the Lipschitz constant at the ceiling and converts it.
    """
    alpha0 = stepsize_ceiling(net, ensemble, eps)
    if ensemble.case_tag == "case1":
        L = np.array([c.L for c in ensemble.costs])
        mu = np.array([c.mu for c in ensemble.costs])
        C = float(np.min(mu * L / (net.n * (mu + L) * net.pi)))
        return alpha0, C
    eta = operator_lipschitz(OperatorContext(net, ensemble, alpha0))
    if eta >= 1.0:
        raise NotContractiveError(
            f"operator at the ceiling measured Lipschitz {eta} >= 1; "
            "aggregate cost is likely not strongly convex"
        )
    return alpha0, (1.0 - eta) / alpha0


def solve_fixed_point(ctx, tol=1e-12, max_iter=1_000_000, lipschitz=None):
    """Picard iteration from zero with an a-posteriori stopping bound.

    Stops once ``step * L / (1 - L) <= tol`` where L is the measured
    operator Lipschitz constant, which converts the tolerance into a
    guaranteed weighted distance to the fixed point.
    """
    net, ens = ctx.net, ctx.ensemble
    lip = operator_lipschitz(ctx) if lipschitz is None else lipschitz
    if lip >= 1.0:
        raise NotContractiveError(f"no contraction at alpha={ctx.alpha}: Lipschitz {lip}")
    factor = lip / (1.0 - lip) if lip > 0.0 else 0.0
    w = np.zeros((net.n, ens.d))
    iterations = 0
    for iterations in range(1, max_iter + 1):
        w_next = gradient_push_operator(ctx, w)
        step = pi_norm(w_next - w, net.pi)
        w = w_next
        if step * factor <= tol:
            break
    else:
        raise NoConvergenceError(
            f"fixed point not reached in {max_iter} iterations at alpha={ctx.alpha}"
        )
    residual = pi_norm(gradient_push_operator(ctx, w) - w, net.pi)
    w_bar = w.mean(axis=0)
    consensus = pi_norm(w - np.outer(net.n * net.pi, w_bar), net.pi)
    return FixedPoint(
        alpha=ctx.alpha,
        w=w,
        w_bar=w_bar,
        residual=float(residual),
        consensus_error=float(consensus),
        iterations=iterations,
    )


def estimate_consensus_constants(net, horizon=500, noise_floor=1e-14):
    """Empirical push-sum constants over a finite horizon.

    Runs y(t+1) = W y(t) from the all-ones vector and returns

    * ``coeff``: the largest observed ratio |1/y_j(t) - 1/(n pi_j)| / rho^t
      over t <= horizon, skipping deviations below ``noise_floor`` (those
      are rounding noise; dividing them by rho^t would blow the estimate
      up once the iteration has converged to machine precision),
    * ``inv_y_max``: the largest inverse weight seen over the horizon.

    The horizon must be long enough that deviations over its last ten
    steps all sit below the noise floor, so nothing meaningful is cut off.
    On slowly mixing networks with small mass entries the deviations can
    plateau slightly above the default floor (the limit weights are only
    known to eigenvector accuracy); raise ``noise_floor`` accordingly.
    """
    if horizon < 1:
        raise ValidationError("horizon must be >= 1")
    n, pi, rho = net.n, net.pi, net.rho
    inv_target = 1.0 / (n * pi)
    y = np.ones(n)
    coeff = 0.0
    inv_y_max = 0.0
    rho_pow = 1.0
    tail = []
    for t in range(horizon + 1):
        if t > 0:
            y = net.W @ y
            if np.any(y <= 0.0):
                raise NonpositiveYError("push-sum weights lost positivity")
        dev = np.abs(1.0 / y - inv_target)
        inv_y_max = max(inv_y_max, float(np.max(1.0 / y)))
        peak = float(dev.max())
        if t > horizon - 10:
            tail.append(peak)
        live = dev[dev >= noise_floor]
        if live.size and rho_pow > 0.0:
            coeff = max(coeff, float(live.max() / rho_pow))
        rho_pow *= rho
    if tail and max(tail) >= noise_floor:
        raise NoConvergenceError(
            f"push-sum gap still {max(tail):.3e} near t={horizon}; increase the "
            "horizon, or raise noise_floor if the gap has plateaued at this "
            "network's eigenvector-accuracy floor"
        )
    return coeff, inv_y_max


def perturbation_product(alpha, coeff, rate, rho, truncation=1e-16):
    """Product prod_j (1 + alpha * coeff * rho^j / (1 - rate * alpha)).

    Truncated once a factor's excess over one drops below ``truncation``.
    The result is checked against the closed-form cap
    exp(alpha * coeff / ((1 - rate * alpha) (1 - rho))).
    """
    if not (0.0 <= rho < 1.0):
        raise InvalidRateError(f"mixing rate {rho} outside [0, 1)")
    if coeff < 0.0:
        raise InvalidRateError("perturbation coefficient must be nonnegative")
    if rate * alpha >= 1.0 or alpha <= 0.0:
        raise InvalidRateError(f"need 0 < alpha and rate * alpha < 1, got {rate * alpha}")
    term = alpha * coeff / (1.0 - rate * alpha)
    log_cap = term / (1.0 - rho)
    # accumulate in log space so extreme coefficients cannot overflow the
    # running product before the cap check
    log_value = 0.0
    while term >= truncation:
        log_value += math.log1p(term)
        term *= rho
    if log_value > log_cap * (1.0 + 1e-12) + 1e-15:
        raise NumericError(
            f"perturbation product exp({log_value}) above its cap exp({log_cap})"
        )
    return math.exp(log_value)


def _radius(net, ensemble, rate):
    return pi_norm(mix_stack(net, ensemble.lin_stack), net.pi) / rate


def convergence_envelope(cert, initial_gap, t, branch_tol=1e-12):
    """Bound on the weighted distance to the fixed point after t + 1 steps.

    Evaluates V (1 - C a)^(t+1) * initial_gap plus the geometric remainder
    driven by the push-sum perturbation; the degenerate remainder branch is
    used when 1 - C * alpha matches rho to within ``branch_tol``.
    """
    if t < 0:
        raise ValidationError("iteration index must be >= 0")
    a, C, rho = cert.alpha, cert.contraction_rate, cert.rho
    V, b, R = cert.perturbation_product, cert.perturbation_coeff, cert.radius
    decay = 1.0 - C * a
    head = V * decay ** (t + 1) * initial_gap
    base = a * b * R * rho**t
    if abs(decay - rho) <= branch_tol:
        remainder = t * V * base + base
    else:
        remainder = (a * b * R * V * decay) / (decay - rho) * (decay**t - rho**t) + base
    return float(head + remainder)


def optimality_gap_bound(net, ensemble, cert, alpha):
    """Bound on the weighted distance between the fixed point and n pi x x*.

    Linear in alpha:  (a rho / (1 - rho)) (1 + (L / gamma) sqrt(sum 1/pi))
    (L R / (n pi_min) + ||grad F(0)||), with gamma the harmonic rate built
    from the mean smoothness constant.
    """
    if ensemble.mu_agg <= 0.0:
        raise ValidationError("bound needs a strongly convex aggregate cost")
    L = ensemble.L_max
    gamma = cert.gamma_lbar
    root = math.sqrt(float(np.sum(1.0 / net.pi)))
    inner = L * cert.radius / (net.n * net.pi_min) + cert.grad0_norm
    return float(alpha * net.rho / (1.0 - net.rho) * (1.0 + L / gamma * root) * inner)


def consensus_gap_bound(net, ensemble, cert, alpha):
    """Bound on the weighted consensus error of the fixed point."""
    inner = ensemble.L_max * cert.radius / (net.n * net.pi_min) + cert.grad0_norm
    return float(alpha * net.rho / (1.0 - net.rho) * inner)


def legacy_stepsize_threshold(net, ensemble, inv_y_max):
    """Stepsize threshold from the earlier quadratic-in-smoothness analysis.

    With beta the aggregate strong convexity, L the largest smoothness,
    gamma = beta L / (beta + L) and q = n gamma / (4 L inv_y_max):

        q (1 - rho) / (L rho (inv_y_max q + inv_y_max ||1 - n pi||_pi
                              + sqrt(sum_j 1/pi_j)))

    ``||1 - n pi||_pi`` is the pi-weighted norm of the n-vector 1 - n pi.
    Undefined (no restriction) when rho == 0.
    """
    if net.rho == 0.0:
        raise DegenerateMixingError(
            "threshold is undefined for rho == 0 (one-step mixing imposes no limit)"
        )
    beta = ensemble.mu_agg
    if beta <= 0.0:
        raise ValidationError("threshold needs a strongly convex aggregate cost")
    L = ensemble.L_max
    gamma = beta * L / (beta + L)
    q = net.n * gamma / (4.0 * L * inv_y_max)
    ones_gap = pi_norm(np.ones(net.n) - net.n * net.pi, net.pi)
    root = math.sqrt(float(np.sum(1.0 / net.pi)))
    return float(q * (1.0 - net.rho) / (L * net.rho * (inv_y_max * q + inv_y_max * ones_gap + root)))


def certify(net, ensemble, eps=None, alpha=None, horizon=500):
    """Assemble the full contraction certificate at the working stepsize.

    ``alpha`` defaults to the stepsize ceiling.  All stored bounds
    (perturbation product, optimality gap, consensus gap) are evaluated at
    that working stepsize; the per-alpha bound functions remain available
    for sweeps.
    """
    alpha0, C = contraction_constant(net, ensemble, eps)
    if alpha is None:
        alpha = alpha0
    if alpha <= 0.0:
        raise InvalidRateError("working stepsize must be positive")
    eta = operator_lipschitz(OperatorContext(net, ensemble, alpha0))
    lip_alpha = eta if alpha == alpha0 else operator_lipschitz(
        OperatorContext(net, ensemble, alpha)
    )
    coeff, inv_y_max = estimate_consensus_constants(net, horizon=horizon)
    b = coeff * ensemble.L_max
    V = perturbation_product(alpha, b, C, net.rho)
    radius = _radius(net, ensemble, C)
    grad0 = grad0_pi_norm(ensemble, net.pi)
    beta = ensemble.mu_agg
    gamma_lmax = beta * ensemble.L_max / (beta + ensemble.L_max)
    gamma_lbar = beta * ensemble.L_bar / (beta + ensemble.L_bar)
    try:
        legacy = legacy_stepsize_threshold(net, ensemble, inv_y_max)
    except DegenerateMixingError:
        legacy = None
    partial = ContractionCertificate(
        case_tag=ensemble.case_tag,
        eps=eps,
        alpha0=alpha0,
        contraction_rate=C,
        alpha=alpha,
        lipschitz_alpha=lip_alpha,
        lipschitz_at_ceiling=eta,
        eta_ceiling=eta if ensemble.case_tag == "case2" else None,
        consensus_coeff=coeff,
        perturbation_coeff=b,
        inv_y_max=inv_y_max,
        perturbation_product=V,
        radius=radius,
        grad0_norm=grad0,
        gap_bound=0.0,
        consensus_bound=0.0,
        legacy_threshold=legacy,
        gamma_lmax=gamma_lmax,
        gamma_lbar=gamma_lbar,
        rho=net.rho,
        pi_min=net.pi_min,
        L_max=ensemble.L_max,
        L_bar=ensemble.L_bar,
        mu_agg=beta,
    )
    gap = optimality_gap_bound(net, ensemble, partial, alpha)
    consensus = consensus_gap_bound(net, ensemble, partial, alpha)
    return ContractionCertificate(
        **{
            **partial.__dict__,
            "gap_bound": gap,
            "consensus_bound": consensus,
        }
    )


def certificate_to_dict(cert):
    """Scalar fields of a certificate, JSON-ready."""
    out = {}
    for key, value in cert.__dict__.items():
        if isinstance(value, float):
            out[key] = float(value)
        else:
            out[key] = value
    return out


def fixed_point_to_dict(fp):
    """Scalar diagnostics plus the stacked fixed-point blocks."""
    return {
        "alpha": float(fp.alpha),
        "residual": float(fp.residual),
        "consensus_error": float(fp.consensus_error),
        "iterations": int(fp.iterations),
        "w_bar": [float(v) for v in fp.w_bar],
        "w": [[float(v) for v in row] for row in fp.w],
    }
