"""Gradient-push, Push-DIGing, and the warm-start hybrid schedule.

All three algorithms run synchronous rounds over a fixed column-stochastic
mixing matrix: every agent updates from the previous round's values, so a
round is a plain matrix product on stacked (n, d) states.

Gradient-push round (state x, mixed state w, weights y, ratios z):

    w <- W x;  y <- W y;  z <- w / y;  x <- w - alpha * grad F(z)

Push-DIGing round (state x, weights y, ratios z, tracked gradients v):

    x <- W x - alpha v;  y <- W y;  z <- x / y;
    v <- W v + grad F(z_new) - grad F(z_old)

The hybrid schedule runs gradient-push with a large stepsize for a warm
start, then hands (w, y, z, grad F(z)) to Push-DIGing for exact
convergence.

Runs never abort on numeric blow-up: once any block norm of the state
exceeds the divergence threshold (or turns non-finite) the trace is
flagged and truncated, so stepsize sweeps that cross the stability
boundary still complete.
"""

from dataclasses import dataclass, field

import numpy as np

from .costs import grad_stack
from .errors import DimensionMismatchError, ValidationError
from .linalg import pi_norm

DIVERGENCE_THRESHOLD = 1e12

PHASE_GP = "gp"
PHASE_PD = "pd"

TRACE_HEADER = ("t", "phase", "sum_z_err", "w_fp_err", "w_opt_err", "diverged")


@dataclass(frozen=True)
class GradientPushState:
    t: int
    x: np.ndarray
    w: np.ndarray
    z: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class PushDigingState:
    t: int
    x: np.ndarray
    z: np.ndarray
    v: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class RunRefs:
    """Reference points a trace is measured against (either may be absent)."""

    x_star: np.ndarray = None
    w_fixed: np.ndarray = None


@dataclass(frozen=True)
class RunRecord:
    t: int
    phase: str
    sum_z_err: float
    w_fp_err: float
    w_opt_err: float
    diverged: bool


@dataclass
class RunTrace:
    """Per-iteration metrics of a run; ``final_state`` is not serialized."""

    records: list = field(default_factory=list)
    final_state: object = None

    @property
    def diverged(self):
        return any(r.diverged for r in self.records)

    def column(self, name):
        return [getattr(r, name) for r in self.records]

    def last(self):
        return self.records[-1]


def _check_shapes(net, ensemble, x0):
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (net.n, ensemble.d):
        raise DimensionMismatchError(
            f"initial state {x0.shape} vs ({net.n}, {ensemble.d})"
        )
    return x0


def init_gp_state(net, ensemble, x0):
    """State before the first exchange: w and z coincide with x, weights at one."""
    x0 = _check_shapes(net, ensemble, x0)
    return GradientPushState(t=0, x=x0.copy(), w=x0.copy(), z=x0.copy(), y=np.ones(net.n))


def gp_step(net, ensemble, alpha, state):
    """One gradient-push round, in the exact update order w, y, z, x."""
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        w = net.W @ state.x
        y = net.W @ state.y
        z = w / y[:, None]
        x = w - alpha * grad_stack(ensemble, z)
    return GradientPushState(t=state.t + 1, x=x, w=w, z=z, y=y)


def init_pd_state(net, ensemble, x0):
    """Default Push-DIGing start: ratios equal the state, v tracks the gradient."""
    x0 = _check_shapes(net, ensemble, x0)
    return PushDigingState(
        t=0, x=x0.copy(), z=x0.copy(), v=grad_stack(ensemble, x0), y=np.ones(net.n)
    )


def pd_step(net, ensemble, alpha, state):
    """One Push-DIGing round; v mixes the old gradients, then swaps new for old."""
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        x = net.W @ state.x - alpha * state.v
        y = net.W @ state.y
        z = x / y[:, None]
        v = net.W @ state.v + grad_stack(ensemble, z) - grad_stack(ensemble, state.z)
    return PushDigingState(t=state.t + 1, x=x, z=z, v=v, y=y)


def _blocks_exceeded(state, arrays):
    for a in arrays:
        norms = np.sqrt((a * a).sum(axis=1))
        if not np.all(np.isfinite(norms)) or np.max(norms) > DIVERGENCE_THRESHOLD:
            return True
    return False


def gp_diverged(state):
    return _blocks_exceeded(state, (state.x, state.w, state.z))


def pd_diverged(state):
    return _blocks_exceeded(state, (state.x, state.z, state.v))


def _metrics(net, mixed, z, refs):
    """(sum_z_err, w_fp_err, w_opt_err) against the available references."""
    sum_z = fp = opt = None
    with np.errstate(over="ignore", invalid="ignore"):
        if refs.x_star is not None:
            diff = z - refs.x_star[None, :]
            sum_z = float(np.sqrt((diff * diff).sum(axis=1)).sum())
            target = np.outer(net.n * net.pi, refs.x_star)
            opt = float(pi_norm(mixed - target, net.pi))
        if refs.w_fixed is not None:
            fp = float(pi_norm(mixed - refs.w_fixed, net.pi))
    return sum_z, fp, opt


def gp_run(net, ensemble, alpha, x0, iters, refs=None):
    """Run gradient-push for ``iters`` rounds, recording metrics each round.

    The t=0 record measures the initial state (mixed state taken equal to
    x0).  Stops early, with the offending record flagged, once any block
    norm crosses the divergence threshold.
    """
    if iters < 0:
        raise ValidationError("iteration count must be >= 0")
    refs = refs or RunRefs()
    state = init_gp_state(net, ensemble, x0)
    trace = RunTrace()
    _record(trace, net, state.w, state.z, refs, t=0, phase=PHASE_GP, diverged=gp_diverged(state))
    for _ in range(iters):
        if trace.records[-1].diverged:
            break
        state = gp_step(net, ensemble, alpha, state)
        _record(trace, net, state.w, state.z, refs, t=state.t, phase=PHASE_GP,
                diverged=gp_diverged(state))
    trace.final_state = state
    return trace


def pd_run(net, ensemble, alpha, init, iters, refs=None, record_initial=True):
    """Run Push-DIGing for ``iters`` rounds from an explicit initial state.

    In mixed-phase traces the Push-DIGing state variable x plays the role
    of the mixed state for the optimality metric; the fixed-point metric is
    left empty since the fixed point belongs to the gradient-push operator.
    """
    if iters < 0:
        raise ValidationError("iteration count must be >= 0")
    refs = refs or RunRefs()
    refs_pd = RunRefs(x_star=refs.x_star, w_fixed=None)
    state = init
    trace = RunTrace()
    if record_initial:
        _record(trace, net, state.x, state.z, refs_pd, t=state.t, phase=PHASE_PD,
                diverged=pd_diverged(state))
    for _ in range(iters):
        if trace.records and trace.records[-1].diverged:
            break
        state = pd_step(net, ensemble, alpha, state)
        _record(trace, net, state.x, state.z, refs_pd, t=state.t, phase=PHASE_PD,
                diverged=pd_diverged(state))
    trace.final_state = state
    return trace


def _record(trace, net, mixed, z, refs, t, phase, diverged):
    sum_z, fp, opt = _metrics(net, mixed, z, refs)
    trace.records.append(
        RunRecord(t=t, phase=phase, sum_z_err=sum_z, w_fp_err=fp, w_opt_err=opt,
                  diverged=bool(diverged))
    )


def hybrid_run(net, ensemble, alpha_gp, alpha_pd, gp_iters, total_iters, x0,
               refs=None, fresh_pd_weights=False):
    """Gradient-push warm start handed off to Push-DIGing.

    The handoff takes the mixed state w, the weights y and the ratios z of
    the last gradient-push round, and initializes the tracked gradients at
    grad F(z).  ``fresh_pd_weights`` restarts the weights at one instead of
    inheriting them (non-default; the inherited weights are already mixed).
    """
    if not (0 <= gp_iters <= total_iters):
        raise ValidationError(f"need 0 <= gp_iters <= total_iters, got {gp_iters}, {total_iters}")
    refs = refs or RunRefs()
    if gp_iters == total_iters:
        return gp_run(net, ensemble, alpha_gp, x0, total_iters, refs)
    if gp_iters == 0:
        init = init_pd_state(net, ensemble, x0)
        return pd_run(net, ensemble, alpha_pd, init, total_iters, refs)
    head = gp_run(net, ensemble, alpha_gp, x0, gp_iters, refs)
    gp_state = head.final_state
    handoff = PushDigingState(
        t=gp_state.t,
        x=gp_state.w.copy(),
        z=gp_state.z.copy(),
        v=grad_stack(ensemble, gp_state.z),
        y=np.ones(net.n) if fresh_pd_weights else gp_state.y.copy(),
    )
    tail = pd_run(net, ensemble, alpha_pd, handoff, total_iters - gp_iters, refs,
                  record_initial=False)
    trace = RunTrace(records=head.records + tail.records, final_state=tail.final_state)
    return trace


def _fmt(value):
    if value is None:
        return ""
    return f"{value:.17g}"


def trace_to_csv(trace, path):
    """Write the canonical trace CSV (17 significant digits, empty for missing)."""
    lines = [",".join(TRACE_HEADER)]
    for r in trace.records:
        lines.append(
            ",".join(
                (str(r.t), r.phase, _fmt(r.sum_z_err), _fmt(r.w_fp_err),
                 _fmt(r.w_opt_err), str(int(r.diverged)))
            )
        )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
