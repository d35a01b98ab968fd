"""Magnetized inverse vertex-reinforced jump process.

Sequential passes, one per vertex in a chosen order: during pass i the
walker starts at the i-th vertex, every edge touching the walker's current
position decays exponentially (closed form between events, no integration
error), and the walker jumps along edge e = (x, y) with rate

    beta_e(t) * <sigma_start sigma_y>_t / <sigma_start sigma_x>_t,

the brackets being exact Ising two-point functions under the current
weights.  A pass almost surely ends with the walker sitting at its start
vertex while the adjacent weights decay to zero; those limits seed the
next pass.  The total crossing counts over all passes are distributed as a
sourceless random current with the original weights.

Events are sampled by thinning.  Away from the start vertex the envelope
over a short horizon bounds numerators at the horizon start and the
denominator at the horizon end (weights only decrease, and ferromagnetic
two-point functions are monotone in the weights); at the start vertex the
denominator is exactly one, so the decaying weight sum itself is a
globally integrable envelope and "no further jumps ever" is decided by an
exact Bernoulli draw rather than a threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import json
import math

import numpy as np

from .errors import (
    CapacityError,
    DegenerateStateError,
    EnvelopeViolationError,
    InvariantViolationError,
    RunawayError,
    ValidationError,
)
from .exact import ising_enumerator
from .network import Network, incidence_parity_check
from .sampling import SeedSpec

THINNING_HORIZON = 0.5
BOOKKEEPING_HORIZON = 60.0  # e^{-60} < 1e-26, far below the reporting bound
WEIGHT_CLAMP = 1e-300
CORRELATION_FLOOR = 1e-300
EVENT_CAP = 10_000_000
DEFAULT_MAX_VERTICES = 12
ENVELOPE_SLACK = 1e-9


@dataclass
class JumpEvent:
    pass_index: int
    time: float
    from_vertex: int
    to_vertex: int
    edge: int


@dataclass
class VrjpState:
    """Walker state: current pass, position, clock, weights, crossings.

    ``horizon_weights`` is filled when a pass completes: the closed-form
    decay of the start vertex's edges at the bookkeeping horizon, reported
    alongside the exact zero limits handed to the next pass.
    """

    pass_index: int
    position: int
    clock: float
    weights: np.ndarray
    order: tuple[int, ...]
    crossings: np.ndarray
    horizon_weights: np.ndarray | None = None


def _adjacency(net: Network) -> list[list[tuple[int, int]]]:
    adj: list[list[tuple[int, int]]] = [[] for _ in range(net.vertex_count)]
    for e, (u, v) in enumerate(net.edges):
        adj[u].append((e, v))
        if v != u:
            adj[v].append((e, u))
    return adj


def _clamp(weights: np.ndarray) -> None:
    tiny = weights < WEIGHT_CLAMP
    if np.any(tiny):
        weights[tiny] = 0.0


def jump_rate(net: Network, state: VrjpState, edge: int) -> float:
    """Exact jump rate along one incident edge at the state's clock time."""
    if not (0 <= edge < net.edge_count):
        raise ValidationError(f"edge {edge} out of range")
    u, v = net.edges[edge]
    x = state.position
    if x not in (u, v):
        raise ValidationError(f"edge {edge} is not incident to position {x}")
    y = v if x == u else u
    start = state.order[state.pass_index - 1]
    corr = ising_enumerator(net).correlations(state.weights, start)
    denom = float(corr[x])
    if denom < CORRELATION_FLOOR:
        raise DegenerateStateError(
            "two-point denominator underflowed; weights collapsed"
        )
    return float(state.weights[edge]) * float(corr[y]) / denom


def run_pass(net: Network, state: VrjpState, seed: SeedSpec) -> tuple[VrjpState, list[JumpEvent]]:
    """Simulate one pass to completion and return the chained state.

    The returned state's weights carry the exact limits (zero on edges at
    the start vertex, last decayed values elsewhere); the bookkeeping
    decay at a finite horizon is reported in ``horizon_weights``.
    """
    start = state.order[state.pass_index - 1]
    if state.position != start or state.clock != 0.0:
        raise ValidationError("run_pass expects a fresh pass state (at x_i, clock 0)")
    rng = seed.rng()
    enum = ising_enumerator(net)
    adjacency = _adjacency(net)
    weights = np.asarray(state.weights, dtype=float).copy()
    crossings = state.crossings.copy()
    events: list[JumpEvent] = []
    position = start
    t = 0.0
    steps = 0

    def correlations() -> np.ndarray:
        return enum.correlations(weights, start)

    while True:
        steps += 1
        if steps > EVENT_CAP:
            raise RunawayError(f"pass exceeded {EVENT_CAP} thinning steps")
        adj = adjacency[position]
        adj_edges = [e for e, _ in adj]

        if position == start:
            total = float(weights[adj_edges].sum()) if adj_edges else 0.0
            draw = rng.exponential(1.0)
            if draw >= total:
                horizon = weights.copy()
                horizon[adj_edges] = horizon[adj_edges] * math.exp(-BOOKKEEPING_HORIZON)
                final = weights
                final[adj_edges] = 0.0
                new_state = VrjpState(
                    pass_index=state.pass_index,
                    position=position,
                    clock=t,
                    weights=final,
                    order=state.order,
                    crossings=crossings,
                    horizon_weights=horizon,
                )
                return new_state, events
            decay = 1.0 - draw / total
            t -= math.log(decay)
            weights[adj_edges] *= decay
            _clamp(weights)
            envelope = float(weights[adj_edges].sum())
            if envelope <= 0.0:
                continue  # underflow: next iteration terminates the pass
            corr = correlations()
            rates = np.array([weights[e] * corr[y] for e, y in adj])
            lam = float(rates.sum())
            if lam > envelope * (1.0 + ENVELOPE_SLACK):
                raise EnvelopeViolationError(
                    f"rate {lam} exceeded start-vertex envelope {envelope}"
                )
            if rng.random() * envelope < lam:
                position, t = _jump(rng, adj, rates, lam, crossings, events,
                                    state.pass_index, position, t)
            continue

        # away from the start vertex: horizon-limited thinning
        if not adj_edges or not np.any(weights[adj_edges] > 0.0):
            raise DegenerateStateError(
                f"walker stranded at vertex {position} with no positive incident weight"
            )
        corr_now = correlations()
        end_weights = weights.copy()
        end_weights[adj_edges] *= math.exp(-THINNING_HORIZON)
        denom_end = float(enum.correlations(end_weights, start)[position])
        if denom_end < CORRELATION_FLOOR:
            raise DegenerateStateError(
                "two-point denominator underflowed at horizon end"
            )
        envelope = float(
            sum(weights[e] * corr_now[y] for e, y in adj) / denom_end
        )
        if envelope <= 0.0:
            raise DegenerateStateError(
                f"zero escape envelope away from the start vertex ({position})"
            )
        remaining = THINNING_HORIZON
        while True:
            steps += 1
            if steps > EVENT_CAP:
                raise RunawayError(f"pass exceeded {EVENT_CAP} thinning steps")
            gap = rng.exponential(1.0) / envelope
            if gap > remaining:
                weights[adj_edges] *= math.exp(-remaining)
                _clamp(weights)
                t += remaining
                break
            weights[adj_edges] *= math.exp(-gap)
            _clamp(weights)
            t += gap
            remaining -= gap
            corr_s = correlations()
            denom_s = float(corr_s[position])
            if denom_s < CORRELATION_FLOOR:
                raise DegenerateStateError("two-point denominator underflowed")
            rates = np.array([weights[e] * corr_s[y] / denom_s for e, y in adj])
            lam = float(rates.sum())
            if lam > envelope * (1.0 + ENVELOPE_SLACK):
                raise EnvelopeViolationError(
                    f"rate {lam} exceeded horizon envelope {envelope}"
                )
            if rng.random() * envelope < lam:
                position, t = _jump(rng, adj, rates, lam, crossings, events,
                                    state.pass_index, position, t)
                break


def _jump(rng, adj, rates, lam, crossings, events, pass_index, position, t):
    pick = rng.random() * lam
    acc = 0.0
    chosen = len(adj) - 1
    for idx, r in enumerate(rates):
        acc += float(r)
        if pick < acc:
            chosen = idx
            break
    edge, target = adj[chosen]
    crossings[edge] += 1
    events.append(JumpEvent(pass_index, t, position, target, edge))
    return target, t


def run_vrjp(
    net: Network,
    order,
    seed: SeedSpec,
    max_vertices: int = DEFAULT_MAX_VERTICES,
) -> np.ndarray:
    """Total crossings of all passes: one sourceless current sample."""
    current, _ = run_vrjp_with_events(net, order, seed, max_vertices)
    return current


def run_vrjp_with_events(
    net: Network,
    order,
    seed: SeedSpec,
    max_vertices: int = DEFAULT_MAX_VERTICES,
) -> tuple[np.ndarray, list[JumpEvent]]:
    order = tuple(int(x) for x in order)
    if sorted(order) != list(range(net.vertex_count)):
        raise ValidationError(f"order {order} is not a permutation of the vertices")
    if net.vertex_count > max_vertices:
        raise CapacityError(
            f"{net.vertex_count} vertices exceeds the exact two-point cap "
            f"({max_vertices}); raise max_vertices explicitly if you mean it"
        )
    state = VrjpState(
        pass_index=1,
        position=order[0],
        clock=0.0,
        weights=net.beta_array.copy(),
        order=order,
        crossings=np.zeros(net.edge_count, dtype=np.int64),
    )
    all_events: list[JumpEvent] = []
    for i in range(1, net.vertex_count + 1):
        state.pass_index = i
        state.position = order[i - 1]
        state.clock = 0.0
        state, events = run_pass(net, state, seed.child(i - 1))
        all_events.extend(events)
    if not incidence_parity_check(net, state.crossings, mode="current"):
        raise InvariantViolationError("jump-process output is not sourceless")
    return state.crossings, all_events


def dump_run_jsonl(path, current: np.ndarray, events: list[JumpEvent]) -> None:
    """One jump event per line, then the final current configuration."""
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(json.dumps({
                "pass": ev.pass_index, "time": ev.time,
                "from": ev.from_vertex, "to": ev.to_vertex, "edge": ev.edge,
            }) + "\n")
        fh.write(json.dumps({"current": [int(x) for x in current]}) + "\n")
