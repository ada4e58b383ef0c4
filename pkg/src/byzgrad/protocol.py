"""Agent behaviors: the honest update rule and the Byzantine senders.

An honest agent's round has a fixed shape: fuse the received estimates with
its own (coordinate-wise trim then average), filter the n gradients (its
own plus the n-1 received) by eliminating the f largest norms and summing
the rest, take a step against the filtered gradient, and clamp back into
the box. Faulty agents are free of any such shape; they may send each
receiver a different, arbitrary (estimate, gradient) pair, and the concrete
strategies below are omniscient within the round: they see every honest
estimate and gradient of round t before emitting.

Adversary strategies (names appear verbatim in scenario files):

    sign_flip       estimate = honest mean; gradient = -(honest mean gradient)
    norm_inflate    estimate = honest mean; gradient = scale * honest mean gradient
    coord_extreme   estimate at the box corner farthest per coordinate from
                    the honest median; gradient = 0
    random_in_box   estimate uniform in the box; gradient uniform in
                    [-zeta, zeta]^d
    collude_target  estimate = the agreed target point (or uniform in the
                    box per receiver when estimates: random_in_box);
                    gradient = (honest mean estimate - target) rescaled to
                    norm zeta, the strongest pull toward the target that
                    still claims to respect the gradient bound

Randomized strategies draw from a stream keyed by (seed, round, sender,
receiver), so a message is a pure function of those coordinates.
"""

from bisect import bisect_left
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, NamedTuple

import numpy as np

from .filters import Hypercube, Point, as_point, cge_f
from .seeds import PURPOSE_ADVERSARY, CounterStream, substream

# Coordinates of admitted messages must not exceed this magnitude. Faulty
# values are otherwise unconstrained; the cap only keeps arithmetic finite.
MESSAGE_COORD_LIMIT = 1e12

ADVERSARY_KINDS = ("sign_flip", "norm_inflate", "coord_extreme", "random_in_box", "collude_target")
ESTIMATE_MODES = ("target", "random_in_box")


class RoundMessage(NamedTuple):
    """The (estimate, gradient) pair one agent sends another in one round."""

    estimate: Point
    grad: Point


@dataclass(frozen=True)
class ObservedRound:
    """What an omniscient adversary sees before emitting in round t."""

    estimates: np.ndarray  # (honest count, d), ordered by honest agent id
    gradients: np.ndarray  # (honest count, d), same order
    box: Hypercube
    zeta: float

    @cached_property
    def estimate_mean(self) -> Point:
        return self.estimates.mean(axis=0)

    @cached_property
    def gradient_mean(self) -> Point:
        return self.gradients.mean(axis=0)

    @cached_property
    def estimate_median(self) -> Point:
        return np.median(self.estimates, axis=0)


class RoundOutcome(NamedTuple):
    estimate: Point          # the agent's next estimate, inside the box
    fused: Point             # trimmed-mean fusion of the round's estimates
    filtered_gradient: Point  # the summed survivors of gradient elimination


@dataclass
class HonestAgentState:
    """An honest agent's id, current estimate, and local cost."""

    id: int
    estimate: Point
    cost: object  # anything with .gradient(x) -> Point


@dataclass(frozen=True)
class StepSchedule:
    """Diminishing step sizes eta_t = eta0 / (t+1)^p.

    `harmonic` fixes p = 1; `polynomial` takes p in (0.5, 1]. Either way
    the sequence is non-increasing, sums to infinity, and has a finite sum
    of squares.
    """

    kind: str
    eta0: float
    p: float = 1.0

    def __post_init__(self):
        if self.kind not in ("harmonic", "polynomial"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not (0.0 < self.eta0 < np.inf):
            raise ValueError(f"eta0 must be positive and finite, got {self.eta0}")
        if self.kind == "harmonic":
            object.__setattr__(self, "p", 1.0)
        elif not (0.5 < self.p <= 1.0):
            raise ValueError(f"polynomial exponent must lie in (0.5, 1], got {self.p}")


def eta(schedule: StepSchedule, t: int) -> float:
    """Step size at iteration t >= 0."""
    if t < 0:
        raise ValueError(f"iteration must be non-negative, got {t}")
    if schedule.kind == "harmonic":
        return schedule.eta0 / (t + 1)
    return schedule.eta0 / (t + 1) ** schedule.p


@dataclass(frozen=True)
class AdversaryStrategy:
    """A named faulty-sender behavior plus its parameters.

    `seed` roots the strategy's randomness; scenario assembly sets it to
    the run seed so replays are exact.
    """

    kind: str
    scale: float | None = None       # norm_inflate
    target: Point | None = None      # collude_target
    estimates: str = "target"        # collude_target: target | random_in_box
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ADVERSARY_KINDS:
            raise ValueError(f"unknown adversary kind {self.kind!r}; known: {ADVERSARY_KINDS}")
        if self.kind == "norm_inflate":
            if self.scale is None or not np.isfinite(self.scale):
                raise ValueError("norm_inflate needs a finite scale")
        if self.kind == "collude_target":
            if self.target is None:
                raise ValueError("collude_target needs a target point")
            object.__setattr__(self, "target", as_point(self.target))
            if self.estimates not in ESTIMATE_MODES:
                raise ValueError(f"estimates mode must be one of {ESTIMATE_MODES}")


def adversary_emit(
    strategy: AdversaryStrategy,
    round_: int,
    sender: int,
    receiver: int,
    observed: ObservedRound,
    stream: CounterStream | None = None,
) -> RoundMessage:
    """Produce the message a faulty `sender` gives `receiver` in `round_`.

    `stream` is an optional reusable CounterStream for the strategy's seed;
    passing one skips per-message generator construction without changing
    any drawn value.
    """
    box, zeta = observed.box, observed.zeta
    kind = strategy.kind

    if kind == "sign_flip":
        return RoundMessage(observed.estimate_mean, -observed.gradient_mean)

    if kind == "norm_inflate":
        return RoundMessage(observed.estimate_mean, strategy.scale * observed.gradient_mean)

    if kind == "coord_extreme":
        # the corner with median <= 0 per coordinate maximizes |corner - median|
        estimate = np.where(observed.estimate_median <= 0.0, box.xi, -box.xi)
        return RoundMessage(estimate, np.zeros(box.d))

    if stream is not None:
        rng = stream.at(round_, sender, receiver)
    else:
        rng = substream(strategy.seed, PURPOSE_ADVERSARY, round_, sender, receiver)

    if kind == "random_in_box":
        estimate = rng.uniform(-box.xi, box.xi, size=box.d)
        grad = rng.uniform(-zeta, zeta, size=box.d)
        return RoundMessage(estimate, grad)

    # collude_target
    pull = observed.estimate_mean - strategy.target
    norm = float(np.linalg.norm(pull))
    grad = (zeta / norm) * pull if norm > 0.0 else np.zeros(box.d)
    if strategy.estimates == "random_in_box":
        estimate = rng.uniform(-box.xi, box.xi, size=box.d)
    else:
        estimate = strategy.target
    return RoundMessage(estimate, grad)


def honest_round(
    state: HonestAgentState,
    inbox: Mapping[int, RoundMessage],
    eta_t: float,
    f: int,
    box: Hypercube,
    own_grad: Point | None = None,
) -> RoundOutcome:
    """One honest agent's full round: fuse, filter, step, project.

    `inbox` holds the n-1 messages of a synchronous round, keyed by sender.
    `own_grad`, when given, must equal state.cost.gradient(state.estimate);
    the round engine passes the value it already broadcast.

    Degenerate cases: a single-agent system (empty inbox, f = 0) reduces to
    plain projected gradient descent, and at the minimum system size
    n = 2f + 1 the trim discards all n-1 received values, so the fusion
    keeps only the agent's own estimate.
    """
    x = state.estimate
    d = x.size
    senders = sorted(inbox)
    n = len(senders) + 1
    if f < 0:
        raise ValueError(f"fault count must be non-negative, got {f}")
    if state.id in inbox:
        raise ValueError(f"agent {state.id}: inbox contains a message from itself")
    if n - 1 < 2 * f:
        raise ValueError(f"agent {state.id}: {n - 1} received messages cannot be trimmed with f = {f}")

    if own_grad is None:
        own_grad = state.cost.gradient(x)
    if n == 1:
        fused = x.copy()
        filtered = cge_f(own_grad[None, :], 0)
    else:
        received = np.empty((n - 1, d))
        all_grads = np.empty((n, d))
        slot = bisect_left(senders, state.id)
        all_grads[slot] = own_grad
        for row, j in enumerate(senders):
            msg = inbox[j]
            if msg.estimate.size != d or msg.grad.size != d:
                raise ValueError(f"agent {state.id}: message from {j} has wrong dimension")
            received[row] = msg.estimate
            all_grads[row if row < slot else row + 1] = msg.grad
        # fused estimate: per coordinate, trim f from each end of the
        # received values, then average the survivors with our own value
        kept = np.sort(received, axis=0)[f : n - 1 - f]
        fused = np.concatenate((x[None, :], kept), axis=0).mean(axis=0)
        # gradients enter elimination in agent-id order, ours in its own slot
        filtered = cge_f(all_grads, f)

    stepped = fused - eta_t * filtered
    return RoundOutcome(np.clip(stepped, -box.xi, box.xi), fused, filtered)


def honest_step(
    state: HonestAgentState,
    inbox: Mapping[int, RoundMessage],
    eta_t: float,
    f: int,
    box: Hypercube,
) -> Point:
    """The next estimate of an honest agent; see `honest_round`."""
    return honest_round(state, inbox, eta_t, f, box).estimate
