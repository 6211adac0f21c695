"""Deterministic discrete-event kernel.

Time is integer picoseconds.  Events are ordered by ``(time, seq)`` where
``seq`` is a global insertion counter, so simultaneous pulses are
delivered first-in first-out and a run is exactly replayable.

Every cell output port is a net with at most one sink; fan-out is done by
splitter cells in the netlist.  The trace records pulses per net.
"""

from __future__ import annotations

import heapq
import io
from collections import Counter
from dataclasses import dataclass, field

from .cells import UNCONSUMED_STATE, Cell, Hazard, make_cell

DEFAULT_MAX_EVENTS = 10**8


class SimulationError(RuntimeError):
    pass


class CausalityError(SimulationError):
    """An event was scheduled before the current time."""


class RunawayError(SimulationError):
    """The event-count ceiling was exceeded."""


@dataclass
class Trace:
    """Delivered pulses as ``(time, seq, net index)``, in delivery order."""

    net_names: list[str]
    pulses: list[tuple[int, int, int]] = field(default_factory=list)

    def counts(self) -> Counter:
        names = self.net_names
        return Counter(names[n] for _, _, n in self.pulses)

    def times(self, net: str) -> list[int]:
        idx = self.net_names.index(net)
        return [t for t, _, n in self.pulses if n == idx]

    def by_net(self) -> dict[str, list[int]]:
        out: dict[str, list[int]] = {}
        names = self.net_names
        for t, _, n in self.pulses:
            out.setdefault(names[n], []).append(t)
        return out

    def __len__(self):
        return len(self.pulses)


class Kernel:
    """One simulation instance over a netlist.

    Not thread-safe; build one kernel per worker.  ``reset()`` returns all
    cells to their power-on state so a kernel can run many programs.
    """

    def __init__(self, netlist, max_events: int = DEFAULT_MAX_EVENTS):
        self.netlist = netlist
        self.max_events = max_events
        self.cells: dict[str, Cell] = {
            cid: make_cell(spec.kind, cid, **spec.params) for cid, spec in netlist.cells.items()
        }
        self.hazards: list[Hazard] = []
        for cell in self.cells.values():
            cell.hazards = self.hazards

        # nets: every cell output port, plus one pseudo-net per external input
        self.net_names: list[str] = []
        self._sinks: list[tuple[Cell | None, str | None]] = []
        self._net_index: dict[str, int] = {}
        for cid, cell in self.cells.items():
            out_nets = {}
            for port in cell.outputs:
                sink = netlist.nets.get((cid, port))
                out_nets[port] = self._add_net(f"{cid}.{port}", sink)
            cell.out_nets = out_nets
        for name, sink in netlist.inputs.items():
            self._add_net(name, sink)
        self._watch: set[int] | None = None
        self.reset()

    def _add_net(self, name, sink):
        idx = len(self.net_names)
        self.net_names.append(name)
        self._net_index[name] = idx
        if sink is None:
            self._sinks.append((None, None))
        else:
            self._sinks.append((self.cells[sink[0]], sink[1]))
        return idx

    def net(self, name: str) -> int:
        return self._net_index[name]

    def reset(self) -> None:
        for cell in self.cells.values():
            cell.reset()
        self.hazards.clear()
        self.now = 0
        self._queue: list[tuple[int, int, int]] = []
        self._seq = 0
        self.scheduled = 0
        self.delivered = 0
        self.trace = Trace(self.net_names)

    def watch(self, nets=None) -> None:
        """Record only the named nets (``None`` records everything)."""
        self._watch = None if nets is None else {self._net_index[n] for n in nets}

    def schedule(self, at: int, target: str, port: str | None = None) -> None:
        """Schedule a pulse on an external input, or on ``target.port`` directly."""
        if port is None:
            idx = self._net_index[target]
        else:
            name = f"{target}.{port}@ext"
            idx = self._net_index.get(name)
            if idx is None:
                if port not in self.cells[target].inputs:
                    raise KeyError(f"{target} has no input port {port!r}")
                idx = self._add_net(name, (target, port))
        self._push(at, idx)

    def _push(self, at: int, net: int) -> None:
        if at < self.now:
            raise CausalityError(f"event at t={at} scheduled at t={self.now}")
        heapq.heappush(self._queue, (at, self._seq, net))
        self._seq += 1
        self.scheduled += 1

    def run(self, until: int | None = None) -> Trace:
        queue = self._queue
        sinks = self._sinks
        pop = heapq.heappop
        push = heapq.heappush
        record = self.trace.pulses.append
        watch = self._watch
        limit = self.max_events - self.delivered
        seq = self._seq
        n = 0
        horizon = until if until is not None else 1 << 62
        try:
            while queue:
                if queue[0][0] > horizon:
                    break
                ev = pop(queue)
                t = ev[0]
                n += 1
                if n > limit:
                    raise RunawayError(f"more than {self.max_events} events; runaway oscillation?")
                net = ev[2]
                if watch is None or net in watch:
                    record(ev)
                cell, port = sinks[net]
                if cell is None:
                    continue
                emitted = cell.fire(port, t)
                if emitted:
                    out_nets = cell.out_nets
                    for oport, te in emitted:
                        if te <= t:
                            raise CausalityError(f"{cell!r} emitted at {te} for input at {t}")
                        push(queue, (te, seq, out_nets[oport]))
                        seq += 1
                self.now = t
        finally:
            added = seq - self._seq
            self._seq = seq
            self.scheduled += added
            self.delivered += n
        return self.trace

    def unconsumed(self) -> list[Hazard]:
        """Cells still holding unread state, as unconsumed-state hazards."""
        return [Hazard(self.now, c.name, UNCONSUMED_STATE) for c in self.cells.values() if c.pending()]

    @property
    def pending_events(self) -> int:
        return len(self._queue)


def write_vcd(trace: Trace, out, nets=None, scope: str = "top") -> None:
    """Write pulses as a VCD: one 1-bit wire per net, high for one ps per pulse.

    Dotted net names become nested scopes, so ``slice0.ha1.sum`` is wire
    ``sum`` in scope ``top.slice0.ha1``.
    """
    from vcd import VCDWriter

    names = list(nets) if nets is not None else list(trace.net_names)
    per_net = trace.by_net()
    changes: list[tuple[int, int, int]] = []
    for i, name in enumerate(names):
        high = set(per_net.get(name, ()))
        for t in sorted(high):
            if t - 1 not in high:
                changes.append((t, i, 1))
            if t + 1 not in high:
                changes.append((t + 1, i, 0))
    changes.sort()
    with VCDWriter(out, timescale="1 ps", date="", version="wavealu") as writer:
        handles = []
        for name in names:
            path, _, leaf = name.replace("@", "_").rpartition(".")
            where = f"{scope}.{path}" if path else scope
            handles.append(writer.register_var(where, leaf, "wire", size=1, init=0))
        for t, i, v in changes:
            writer.change(handles[i], t, v)


def vcd_text(trace: Trace, nets=None) -> str:
    buf = io.StringIO()
    write_vcd(trace, buf, nets)
    return buf.getvalue()
