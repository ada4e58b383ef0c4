"""Synchronous round engine over the complete communication graph.

A run is two-phase per round: first every message of round t is
materialized (honest agents broadcast one (estimate, gradient) pair to
everyone; faulty agents emit a possibly different pair per receiver), then
every honest agent applies its update. Nothing about the schedule, the
metrics stride, or the adversary's strategy can leak randomness across
consumers: all draws come from substreams keyed by purpose and round, so a
scenario (including its seed) maps to exactly one trajectory, bit for bit.

Runs never refuse theoretically doomed configurations. A non-positive
fault-tolerance margin or a failed redundancy check is reported as a
warning on the result, and the rounds proceed regardless; observing those
regimes is the point.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .costs import CostEnsemble, SpectralConstants, aggregate_minimizer, check_redundancy_sufficient, spectral_constants
from .errors import SimulationAbort
from .filters import Hypercube, Point, as_point
from .metrics import RoundTrace, check_zeta, consensus_diameter, lyapunov_v, max_distance
from .protocol import (
    MESSAGE_COORD_LIMIT,
    AdversaryStrategy,
    HonestAgentState,
    ObservedRound,
    RoundMessage,
    StepSchedule,
    adversary_emit,
    eta,
    honest_round,
)
from .seeds import PURPOSE_ADVERSARY, PURPOSE_INIT, CounterStream, substream

DEFAULT_TRACE_TARGET = 10000  # default stride keeps traces near this many rows


@dataclass(frozen=True)
class Scenario:
    """Complete declarative description of one run."""

    n: int
    f: int
    d: int
    xi: float
    ensemble: CostEnsemble
    faulty_ids: frozenset[int]
    adversary: AdversaryStrategy
    schedule: StepSchedule
    horizon: int
    seed: int
    init: str | np.ndarray = "uniform"  # "uniform" or an (n, d) array of start points
    record_every: int | None = None

    def __post_init__(self):
        if self.n < 2 * self.f + 1:
            raise ValueError(f"need n >= 2f+1, got n={self.n}, f={self.f}")
        if self.f < 0:
            raise ValueError(f"fault count must be non-negative, got {self.f}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        box = self.box  # validates xi and d
        if self.ensemble.n != self.n:
            raise ValueError(f"ensemble has {self.ensemble.n} costs for n={self.n} agents")
        if self.ensemble.d != self.d:
            raise ValueError(f"ensemble dimension {self.ensemble.d} != scenario dimension {self.d}")
        faulty = frozenset(int(i) for i in self.faulty_ids)
        if not faulty <= set(range(self.n)):
            raise ValueError(f"faulty ids must lie in 0..{self.n - 1}")
        if len(faulty) > self.f:
            raise ValueError(f"{len(faulty)} faulty ids exceed the declared bound f={self.f}")
        if self.ensemble.honest_set != set(range(self.n)) - faulty:
            raise ValueError("ensemble honest set must be the complement of faulty_ids")
        object.__setattr__(self, "faulty_ids", faulty)
        if isinstance(self.init, str):
            if self.init != "uniform":
                raise ValueError(f"init must be 'uniform' or explicit points, got {self.init!r}")
        else:
            pts = np.asarray(self.init, dtype=np.float64)
            if pts.shape != (self.n, self.d):
                raise ValueError(f"explicit init must have shape ({self.n}, {self.d}), got {pts.shape}")
            for i in range(self.n):
                if not box.contains(as_point(pts[i])):
                    raise ValueError(f"initial estimate of agent {i} lies outside the box")
            object.__setattr__(self, "init", pts)
        if self.record_every is not None and self.record_every < 1:
            raise ValueError(f"record_every must be >= 1, got {self.record_every}")

    @property
    def box(self) -> Hypercube:
        return Hypercube(xi=self.xi, d=self.d)

    @property
    def stride(self) -> int:
        if self.record_every is not None:
            return self.record_every
        return max(1, self.horizon // DEFAULT_TRACE_TARGET)


@dataclass
class RunResult:
    """Everything a finished run reports."""

    final_estimates: dict[int, Point]
    trace: list[RoundTrace]
    constants: SpectralConstants
    redundancy_ok: bool
    x_star: Point
    duration: float
    warnings: list[str] = field(default_factory=list)


def _initial_estimates(scenario: Scenario, honest_ids: list[int]) -> dict[int, Point]:
    if isinstance(scenario.init, np.ndarray):
        return {i: scenario.init[i].copy() for i in honest_ids}
    # per-agent substreams: agent i's draw does not depend on who else exists
    return {
        i: substream(scenario.seed, PURPOSE_INIT, i).uniform(-scenario.xi, scenario.xi, size=scenario.d)
        for i in honest_ids
    }


def _admit(msg: RoundMessage, t: int, sender: int, receiver: int, d: int) -> RoundMessage:
    est = np.asarray(msg.estimate, dtype=np.float64)
    grad = np.asarray(msg.grad, dtype=np.float64)
    if est.shape != (d,) or grad.shape != (d,):
        raise SimulationAbort(t, f"message {sender}->{receiver} has wrong dimension")
    for name, vec in (("estimate", est), ("gradient", grad)):
        # NaN fails the <= comparison, so one test covers both conditions
        if not (np.abs(vec) <= MESSAGE_COORD_LIMIT).all():
            raise SimulationAbort(
                t,
                f"{name} from agent {sender} to {receiver} exceeds the admission bound {MESSAGE_COORD_LIMIT:g}",
            )
    return RoundMessage(est, grad)


def run(scenario: Scenario) -> RunResult:
    """Execute the scenario's horizon and return the trace and final state.

    Deterministic: the same scenario (same seed included) yields an
    identical RunResult. The trace records every `stride`-th round plus the
    final one; each row measures the state entering that round together
    with the filtered gradients computed from that round's messages.
    """
    started = time.perf_counter()
    box = scenario.box
    constants = spectral_constants(scenario.ensemble, scenario.f, box)
    warnings: list[str] = []
    try:
        redundancy_ok = check_redundancy_sufficient(scenario.ensemble, scenario.f)
    except ValueError as exc:
        redundancy_ok = False
        warnings.append(f"redundancy check not applicable: {exc}")
    x_star = aggregate_minimizer(scenario.ensemble)
    if not box.contains(x_star):
        warnings.append("honest aggregate minimizer lies outside the box; projection will bias the runs")
    if constants.alpha <= 0.0:
        warnings.append(
            f"fault-tolerance margin alpha = {constants.alpha:.6g} <= 0; convergence is not guaranteed"
        )
    if not redundancy_ok:
        warnings.append("ensemble is not redundant; validity toward the honest minimizer is not guaranteed")
    if not constants.zeta_exact:
        warnings.append("zeta is an analytic upper bound, not the exact box maximum")

    honest_ids = sorted(set(range(scenario.n)) - scenario.faulty_ids)
    faulty_ids = sorted(scenario.faulty_ids)
    states = {
        i: HonestAgentState(id=i, estimate=x0, cost=scenario.ensemble.costs[i])
        for i, x0 in _initial_estimates(scenario, honest_ids).items()
    }
    stride = scenario.stride
    horizon = scenario.horizon
    trace: list[RoundTrace] = []
    adversary_stream = CounterStream(scenario.adversary.seed, PURPOSE_ADVERSARY)

    for t in range(horizon + 1):
        eta_t = eta(scenario.schedule, t)
        estimates = {i: states[i].estimate for i in honest_ids}
        gradients = {i: states[i].cost.gradient(states[i].estimate) for i in honest_ids}

        est_matrix = np.stack([estimates[i] for i in honest_ids])
        grad_matrix = np.stack([gradients[i] for i in honest_ids])
        if not np.isfinite(grad_matrix).all():
            raise SimulationAbort(t, "an honest gradient overflowed")

        # phase 1: materialize every message of round t
        observed = ObservedRound(est_matrix, grad_matrix, box, constants.zeta)
        broadcast = {j: RoundMessage(estimates[j], gradients[j]) for j in honest_ids}
        faulty_msgs = {
            (s, r): _admit(
                adversary_emit(scenario.adversary, t, s, r, observed, stream=adversary_stream),
                t, s, r, scenario.d,
            )
            for s in faulty_ids
            for r in honest_ids
        }

        # phase 2: every honest agent updates on its complete inbox
        outcomes = {}
        for i in honest_ids:
            inbox = {j: broadcast[j] for j in honest_ids if j != i}
            for s in faulty_ids:
                inbox[s] = faulty_msgs[(s, i)]
            try:
                outcomes[i] = honest_round(states[i], inbox, eta_t, scenario.f, box, own_grad=gradients[i])
            except ValueError as exc:
                raise SimulationAbort(t, f"agent {i}: {exc}") from exc

        if t % stride == 0 or t == horizon:
            diameter_inf, diameter_l2 = consensus_diameter(est_matrix)
            filtered = {i: outcomes[i].filtered_gradient for i in honest_ids}
            cge_norm_max = max(float(np.linalg.norm(h)) for h in filtered.values())
            trace.append(
                RoundTrace(
                    t=t,
                    eta=eta_t,
                    diameter_inf=diameter_inf,
                    diameter_l2=diameter_l2,
                    v=lyapunov_v(est_matrix, x_star),
                    max_dist=max_distance(est_matrix, x_star),
                    cge_norm_max=cge_norm_max,
                    zeta_violated=not check_zeta(filtered, constants.zeta),
                )
            )
        if t == horizon:
            break
        for i in honest_ids:
            states[i].estimate = outcomes[i].estimate

    return RunResult(
        final_estimates={i: states[i].estimate for i in honest_ids},
        trace=trace,
        constants=constants,
        redundancy_ok=redundancy_ok,
        x_star=x_star,
        duration=time.perf_counter() - started,
        warnings=warnings,
    )
