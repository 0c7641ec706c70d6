"""Primitive merge-pruning and the epoch loop that drives it to a sparsity target.

Each epoch walks the hidden layers in forward order. A layer's candidate
pairs are rebuilt and re-sorted, then the first k pairs (k = batch fraction
of the layer's alive units) are evaluated one by one: the candidate's output
impact is propagated to the output layer, blended into the running total,
scored, and accepted or rejected by the annealed rule. Accepted pairs are
pruned immediately; bounds are refreshed once per layer after its batch.
The temperature is the remaining fraction of the global target, recomputed
after every layer.

Pruning is masking: parameters are zeroed in place and the unit is flagged
dead. Physical removal is ``model.compact``'s job at save time, which keeps
unit indices stable for the bounds map and the trace.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .annealing import AnnealState, EnergyWeights, decide, energy
from .intervals import BoundsMap, build_bounds_map, propagate_impact, pruning_impact, refresh_bounds
from .model import Network, validate_network
from .saliency import saliency_list

MODES = ("stochastic", "one_shot")
TEMPERATURE_FLOOR = 1e-6
TRACE_COLUMNS = (
    "epoch",
    "layer",
    "nominee",
    "delegate",
    "saliency",
    "energy_prev",
    "energy_new",
    "temperature",
    "acceptance_rate",
    "random_draw",
    "decision",
)


@dataclass(frozen=True)
class PruningConfig:
    target: float
    batch_fraction: float
    weights: EnergyWeights
    seed: int = 0
    max_epochs: int = 1000
    mode: str = "stochastic"

    def __post_init__(self):
        if not 0.0 < self.target < 1.0:
            raise ValueError(f"target must be in (0, 1), got {self.target}")
        if not 0.0 < self.batch_fraction <= 1.0:
            raise ValueError(f"batch_fraction must be in (0, 1], got {self.batch_fraction}")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    def echo(self) -> dict:
        return {
            "target": self.target,
            "batch_fraction": self.batch_fraction,
            "alpha": self.weights.alpha,
            "beta": self.weights.beta,
            "phi": self.weights.phi,
            "seed": self.seed,
            "max_epochs": self.max_epochs,
            "mode": self.mode,
        }


@dataclass(frozen=True)
class PruneEvent:
    epoch: int
    layer: int
    nominee: int
    delegate: int
    saliency: float
    energy_prev: Optional[float]
    energy_new: Optional[float]
    temperature: Optional[float]
    acceptance_rate: Optional[float]
    random_draw: Optional[float]
    decision: str


@dataclass(frozen=True)
class EpochSummary:
    epoch: int
    pruned_in_epoch: int
    pruned_total: int
    temperature: float


@dataclass
class PruneTrace:
    """Audit log of one pruning run; replaying its accepted events reproduces the result."""

    config: dict
    events: list[PruneEvent] = field(default_factory=list)
    epochs: list[EpochSummary] = field(default_factory=list)
    completed: bool = True
    sparsity: float = 0.0

    def accepted(self) -> list[PruneEvent]:
        return [e for e in self.events if e.decision == "accepted"]

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            for e in self.events:
                writer.writerow(
                    [
                        e.epoch,
                        e.layer,
                        e.nominee,
                        e.delegate,
                        _cell(e.saliency),
                        _cell(e.energy_prev),
                        _cell(e.energy_new),
                        _cell(e.temperature),
                        _cell(e.acceptance_rate),
                        _cell(e.random_draw),
                        e.decision,
                    ]
                )


def _cell(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def prune_pair(net: Network, layer: int, i: int, j: int) -> Network:
    """Merge unit ``i`` of ``layer`` into delegate ``j`` and mask it out, in place.

    The delegate's outgoing weights absorb the nominee's; the nominee's
    incoming weights, bias, and outgoing weights are zeroed and it is flagged
    dead.
    """
    if not 0 <= layer < len(net.layers) - 1:
        raise ValueError(f"layer {layer} is not prunable (output layer or out of range)")
    cur = net.layers[layer]
    if i == j or not (0 <= i < cur.units and 0 <= j < cur.units):
        raise ValueError(f"invalid unit pair ({i}, {j}) at layer {layer}")
    if not (cur.alive[i] and cur.alive[j]):
        raise ValueError(f"unit pair ({i}, {j}) at layer {layer} involves a dead unit")
    nxt = net.layers[layer + 1]
    nxt.weights[j, :] += nxt.weights[i, :]
    nxt.weights[i, :] = 0.0
    cur.weights[:, i] = 0.0
    cur.bias[i] = 0.0
    cur.alive[i] = False
    return net


def hidden_unit_quotas(net: Network, target: float) -> dict[int, int]:
    """Per-hidden-layer number of units to prune: the target fraction of the
    layer's alive units, capped so at least one unit survives as a delegate."""
    quotas = {}
    for l in net.hidden_indices:
        alive = int(net.layers[l].alive.sum())
        quotas[l] = min(math.ceil(target * alive), max(alive - 1, 0))
    return quotas


def hidden_sparsity(net: Network) -> float:
    """Fraction of hidden units currently masked dead."""
    total = net.total_hidden_units()
    if total == 0:
        return 0.0
    return 1.0 - net.alive_hidden_units() / total


@dataclass
class _Progress:
    pruned_total: int
    units_targeted: int

    def temperature(self) -> float:
        return max(1.0 - self.pruned_total / self.units_targeted, TEMPERATURE_FLOOR)

    def target_met(self) -> bool:
        return self.pruned_total >= self.units_targeted


def run_epoch(net, bounds, state, cfg, layer_targets, *, epoch=0, progress=None):
    """One pass over all hidden layers; returns ``(net, bounds, state, events)``.

    ``layer_targets`` maps hidden layer index to the number of prunes the
    layer may still take. Pairs whose nominee or delegate died earlier in the
    epoch are skipped without counting against the batch size k.
    """
    if progress is None:
        progress = _Progress(0, max(sum(layer_targets.values()), 1))
    events: list[PruneEvent] = []
    for l in net.hidden_indices:
        if progress.target_met():
            break
        remaining = layer_targets.get(l, 0)
        alive_idx = np.flatnonzero(net.layers[l].alive)
        if remaining <= 0 or alive_idx.size < 2:
            continue
        k = math.ceil(cfg.batch_fraction * alive_idx.size)
        candidates = saliency_list(net, l)
        state.energy_prev = 0.0
        considered = 0
        accepted_here = 0
        for pair in candidates:
            if considered >= k or accepted_here >= remaining or progress.target_met():
                break
            alive = net.layers[l].alive
            if not (alive[pair.nominee] and alive[pair.delegate]):
                events.append(
                    PruneEvent(
                        epoch, l, pair.nominee, pair.delegate, pair.saliency,
                        None, None, state.temperature, None, None, "skipped_dead",
                    )
                )
                continue
            considered += 1
            impact = pruning_impact(net, bounds, l, pair.nominee, pair.delegate)
            out_impact = propagate_impact(net, bounds, l + 1, impact)
            tentative = state.cumulative_impact + out_impact
            energy_new = energy(tentative, cfg.weights)
            energy_prev = state.energy_prev
            verdict = decide(state, energy_new)
            events.append(
                PruneEvent(
                    epoch, l, pair.nominee, pair.delegate, pair.saliency,
                    energy_prev, energy_new, state.temperature,
                    verdict.acceptance_rate, verdict.random_draw,
                    "accepted" if verdict.accepted else "rejected",
                )
            )
            if verdict.accepted:
                prune_pair(net, l, pair.nominee, pair.delegate)
                state.cumulative_impact = tentative
                accepted_here += 1
                progress.pruned_total += 1
        if accepted_here:
            bounds = refresh_bounds(net, bounds, l)
        state.temperature = progress.temperature()
    return net, bounds, state, events


class PruningRun:
    """Stepwise driver for a stochastic pruning run, one epoch per ``step()``.

    Lets callers interleave work between epochs (periodic evaluation); ``run``
    is the plain run-to-completion wrapper around it.
    """

    def __init__(self, net: Network, cfg: PruningConfig):
        if cfg.mode != "stochastic":
            raise ValueError("PruningRun drives stochastic mode only")
        validate_network(net)
        self.cfg = cfg
        self.net = net.copy()
        self.start_alive = {l: int(self.net.layers[l].alive.sum()) for l in self.net.hidden_indices}
        total_alive = sum(self.start_alive.values())
        if total_alive < 2:
            raise ValueError("network has no prunable hidden units")
        self.quotas = hidden_unit_quotas(self.net, cfg.target)
        self.progress = _Progress(0, max(math.ceil(cfg.target * total_alive), 1))
        self.trace = PruneTrace(config=cfg.echo())
        try:
            self.bounds = build_bounds_map(self.net)
        except Exception as exc:
            self.trace.completed = False
            exc.partial_trace = self.trace
            raise
        self.state = AnnealState.fresh(cfg.seed, self.net.output_dim)
        self.epoch = 0
        self._stalled = False

    def done(self) -> bool:
        return (
            self.progress.target_met()
            or self.epoch >= self.cfg.max_epochs
            or self._stalled
        )

    def step(self) -> EpochSummary:
        """Run one epoch; on interval explosion the partial trace is attached
        to the raised error."""
        layer_targets = {
            l: self.quotas[l] - (self.start_alive[l] - int(self.net.layers[l].alive.sum()))
            for l in self.net.hidden_indices
        }
        before = self.progress.pruned_total
        try:
            _, self.bounds, self.state, events = run_epoch(
                self.net, self.bounds, self.state, self.cfg, layer_targets,
                epoch=self.epoch, progress=self.progress,
            )
        except Exception as exc:
            self.trace.completed = False
            self.trace.sparsity = hidden_sparsity(self.net)
            exc.partial_trace = self.trace
            raise
        self.trace.events.extend(events)
        summary = EpochSummary(
            self.epoch, self.progress.pruned_total - before,
            self.progress.pruned_total, self.state.temperature,
        )
        self.trace.epochs.append(summary)
        self.epoch += 1
        if self.progress.pruned_total == before and not self.progress.target_met():
            # No layer can make progress anymore: every quota is met or unpairable.
            self._stalled = True
        return summary

    def finish(self) -> tuple[Network, PruneTrace]:
        self.trace.completed = self.progress.target_met()
        self.trace.sparsity = hidden_sparsity(self.net)
        return self.net, self.trace


def run(net: Network, cfg: PruningConfig) -> tuple[Network, PruneTrace]:
    """Prune a copy of ``net`` to the configured sparsity target.

    Repeats epochs until the pruned fraction reaches the target or
    ``max_epochs`` is hit; an unreachable target yields a partial result with
    ``trace.completed`` false.
    """
    if cfg.mode == "one_shot":
        return one_shot_baseline(net, cfg.target)
    session = PruningRun(net, cfg)
    while not session.done():
        session.step()
    return session.finish()


def one_shot_baseline(net: Network, target: float) -> tuple[Network, PruneTrace]:
    """Greedy single-pass baseline: per layer, sort candidates once and prune the
    lowest-saliency pairs until the layer hits the target fraction.

    Fully deterministic; consumes no randomness and computes no energies.
    A zero target returns an unchanged copy.
    """
    if not 0.0 <= target < 1.0:
        raise ValueError(f"target must be in [0, 1), got {target}")
    validate_network(net)
    work = net.copy()
    quotas = hidden_unit_quotas(work, target)
    trace = PruneTrace(config={"target": target, "mode": "one_shot"})
    pruned_total = 0
    for l in work.hidden_indices:
        if quotas[l] <= 0 or int(work.layers[l].alive.sum()) < 2:
            continue
        pruned_here = 0
        for pair in saliency_list(work, l):
            if pruned_here >= quotas[l]:
                break
            alive = work.layers[l].alive
            if not (alive[pair.nominee] and alive[pair.delegate]):
                trace.events.append(
                    PruneEvent(0, l, pair.nominee, pair.delegate, pair.saliency,
                               None, None, None, None, None, "skipped_dead")
                )
                continue
            prune_pair(work, l, pair.nominee, pair.delegate)
            trace.events.append(
                PruneEvent(0, l, pair.nominee, pair.delegate, pair.saliency,
                           None, None, None, None, None, "accepted")
            )
            pruned_here += 1
        pruned_total += pruned_here
    # Quotas are capped at alive-1, so the greedy walk always reaches them.
    trace.completed = True
    trace.epochs.append(EpochSummary(0, pruned_total, pruned_total, 0.0))
    trace.sparsity = hidden_sparsity(work)
    return work, trace


def replay(net: Network, trace: PruneTrace) -> Network:
    """Apply a trace's accepted prunes to a fresh copy of the original network."""
    work = net.copy()
    for e in trace.accepted():
        prune_pair(work, e.layer, e.nominee, e.delegate)
    return work
