"""Behavioral models of the SFQ cells used by the ALU and its testbed.

A cell reacts to one pulse on one input port at a time and answers with
the pulses it emits, as ``(output port, time)`` pairs.  Timing problems
(pulses merging, a second set before the read-out, data racing a clock)
are recorded as :class:`Hazard` entries on the cell's hazard list rather
than raised, so a run can report everything that went wrong.

Two behaviours carry the wave pipeline and are worth knowing about:

* :class:`HalfAdder` emits its carry the moment the second operand pulse
  arrives, without waiting for the clock.  Only the sum is clocked.
* :class:`InstructionSwitch` routes data pulses combinationally according
  to flags armed by control pulses; the trailing clock only clears flags.

The dual-port RS flip-flop is a behavioural stand-in; no schematic-level
fidelity is claimed for it.
"""

from __future__ import annotations

from pathlib import Path
from typing import NamedTuple

MERGER_COLLISION = "merger-collision"
DOUBLE_SET = "double-set"
CLOCK_OVERRUN = "clock-overrun"
UNCONSUMED_STATE = "unconsumed-state"

NEVER = -(1 << 62)


class Hazard(NamedTuple):
    at: int
    cell: str
    kind: str


class UnknownPortError(KeyError):
    pass


class Cell:
    kind = "Cell"
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()

    def __init__(self, name: str, delay: int = 1, **params):
        self.name = name
        self.delay = _positive(name, "delay", delay)
        self.params = params
        self.hazards: list[Hazard] = []
        self.reset()

    def reset(self) -> None:
        pass

    def fire(self, port: str, t: int):
        raise NotImplementedError

    def pending(self) -> bool:
        """True if the cell holds state that no read-out has consumed."""
        return False

    def min_delay(self) -> int:
        return self.delay

    def _hazard(self, t: int, kind: str) -> None:
        self.hazards.append(Hazard(t, self.name, kind))

    def _bad_port(self, port: str):
        raise UnknownPortError(f"{self.kind} {self.name!r} has no input port {port!r}")

    def __repr__(self) -> str:
        return f"{self.kind}({self.name!r})"


def _positive(name: str, key: str, value) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
        raise ValueError(f"{name}: {key} must be a positive integer, got {value!r}")
    return value


class DelayLine(Cell):
    """Pure delay; stands for both JTLs and passive transmission lines."""

    kind = "DelayLine"
    inputs = ("in",)
    outputs = ("out",)

    def fire(self, port, t):
        if port != "in":
            self._bad_port(port)
        return (("out", t + self.delay),)


class Splitter(Cell):
    kind = "Splitter"
    inputs = ("in",)
    outputs = ("out1", "out2")

    def fire(self, port, t):
        if port != "in":
            self._bad_port(port)
        te = t + self.delay
        return (("out1", te), ("out2", te))


class Merger(Cell):
    """Two-input confluence buffer.

    Pulses closer than ``window`` on the two inputs fuse into one output
    pulse and raise a merger-collision hazard.
    """

    kind = "Merger"
    inputs = ("a", "b")
    outputs = ("out",)

    def __init__(self, name, delay=3, window=2, **params):
        self.window = window
        super().__init__(name, delay, **params)

    def reset(self):
        self.last_a = NEVER
        self.last_b = NEVER

    def fire(self, port, t):
        if port == "a":
            self.last_a = t
            other = self.last_b
        elif port == "b":
            self.last_b = t
            other = self.last_a
        else:
            self._bad_port(port)
        if t - other < self.window:
            self._hazard(t, MERGER_COLLISION)
            return ()
        return (("out", t + self.delay),)


class DFF(Cell):
    """Destructive read-out flip-flop: data sets, clock reads and clears."""

    kind = "DFF"
    inputs = ("d", "clk")
    outputs = ("out",)

    def __init__(self, name, delay=5, init=0, window=2, check_pending=True, **params):
        self.init = int(bool(init))
        self.window = window
        self.check_pending = check_pending
        super().__init__(name, delay, **params)

    def reset(self):
        self.state = self.init
        self.last_clk = NEVER

    def fire(self, port, t):
        if port == "clk":
            self.last_clk = t
            if self.state:
                self.state = 0
                return (("out", t + self.delay),)
            return ()
        if port != "d":
            self._bad_port(port)
        if t - self.last_clk < self.window:
            self._hazard(t, CLOCK_OVERRUN)
        if self.state:
            self._hazard(t, DOUBLE_SET)
        self.state = 1
        return ()

    def pending(self):
        return self.check_pending and bool(self.state)


class ToggleMonitor(Cell):
    """Toggle-type SFQ/dc converter: every pulse flips a dc level."""

    kind = "ToggleMonitor"
    inputs = ("in",)
    outputs = ()

    def reset(self):
        self.level = 0
        self.count = 0

    def fire(self, port, t):
        if port != "in":
            self._bad_port(port)
        self.level ^= 1
        self.count += 1
        return ()


class RSFlipFlopDualPort(Cell):
    """Set/reset storage with complementary read-out ports.

    Reset reads the stored bit: a pulse on ``out`` if it was set, on
    ``outn`` if it was not.
    """

    kind = "RSFlipFlopDualPort"
    inputs = ("set", "reset")
    outputs = ("out", "outn")

    def reset(self):
        self.armed = 0

    def fire(self, port, t):
        if port == "set":
            if self.armed:
                self._hazard(t, DOUBLE_SET)
            self.armed = 1
            return ()
        if port != "reset":
            self._bad_port(port)
        if self.armed:
            self.armed = 0
            return (("out", t + self.delay),)
        return (("outn", t + self.delay),)

    def pending(self):
        return bool(self.armed)


class MullerC(Cell):
    """Join: fires once both inputs have seen a pulse since the last output.

    A repeated pulse on an input that is already armed is absorbed.
    """

    kind = "MullerC"
    inputs = ("a", "b")
    outputs = ("out",)

    def reset(self):
        self.seen_a = 0
        self.seen_b = 0

    def fire(self, port, t):
        if port == "a":
            self.seen_a = 1
        elif port == "b":
            self.seen_b = 1
        else:
            self._bad_port(port)
        if self.seen_a and self.seen_b:
            self.seen_a = self.seen_b = 0
            return (("out", t + self.delay),)
        return ()

    def pending(self):
        return bool(self.seen_a or self.seen_b)


class ClockedXOR(Cell):
    kind = "ClockedXOR"
    inputs = ("a", "b", "clk")
    outputs = ("out",)

    def __init__(self, name, delay=6, window=2, **params):
        self.window = window
        super().__init__(name, delay, **params)

    def reset(self):
        self.parity = 0
        self.seen = 0
        self.last_clk = NEVER

    def fire(self, port, t):
        if port == "clk":
            self.last_clk = t
            odd = self.parity
            self.parity = self.seen = 0
            if odd:
                return (("out", t + self.delay),)
            return ()
        if port != "a" and port != "b":
            self._bad_port(port)
        if t - self.last_clk < self.window:
            self._hazard(t, CLOCK_OVERRUN)
        self.parity ^= 1
        self.seen = 1
        return ()

    def pending(self):
        return bool(self.seen)


class HalfAdder(Cell):
    """Clocked sum, asynchronous carry.

    The carry leaves ``carry_delay`` after the second operand pulse; the
    clock emits the sum ``sum_delay`` later iff exactly one operand came.
    """

    kind = "HalfAdder"
    inputs = ("a", "b", "clk")
    outputs = ("sum", "carry")

    def __init__(self, name, sum_delay=7, carry_delay=5, window=2, **params):
        self.sum_delay = _positive(name, "sum_delay", sum_delay)
        self.carry_delay = _positive(name, "carry_delay", carry_delay)
        self.window = window
        super().__init__(name, min(sum_delay, carry_delay), **params)

    def reset(self):
        self.a = 0
        self.b = 0
        self.last_clk = NEVER

    def fire(self, port, t):
        if port == "clk":
            self.last_clk = t
            one = self.a ^ self.b
            self.a = self.b = 0
            if one:
                return (("sum", t + self.sum_delay),)
            return ()
        if port == "a":
            if self.a:
                self._hazard(t, DOUBLE_SET)
                return ()
            self.a = 1
        elif port == "b":
            if self.b:
                self._hazard(t, DOUBLE_SET)
                return ()
            self.b = 1
        else:
            self._bad_port(port)
        if t - self.last_clk < self.window:
            self._hazard(t, CLOCK_OVERRUN)
        if self.a and self.b:
            return (("carry", t + self.carry_delay),)
        return ()

    def pending(self):
        return bool(self.a or self.b)


class InstructionSwitch(Cell):
    """Reconfigurable 2x2 router between the two half-adder rows.

    Control pulses arm the xor/and/carry flags and are passed on to the
    next slice after ``fwd_delay``.  With the flags armed, ``p`` goes to
    ``d`` (xor), ``g`` goes to ``d`` (and) and to ``c`` (carry); with no
    flag armed every data pulse is absorbed.  The clock clears the flags.

    ``fault="and-inverted"`` makes the and flag read inverted, for fault
    injection.
    """

    kind = "InstructionSwitch"
    inputs = ("set_xor", "set_and", "set_carry", "p", "g", "clk")
    outputs = ("d", "c", "fwd_xor", "fwd_and", "fwd_carry")

    def __init__(self, name, route_delay=4, fwd_delay=6, fault=None, **params):
        self.route_delay = _positive(name, "route_delay", route_delay)
        self.fwd_delay = _positive(name, "fwd_delay", fwd_delay)
        if fault not in (None, "and-inverted"):
            raise ValueError(f"{name}: unknown fault {fault!r}")
        self.fault = fault
        super().__init__(name, min(route_delay, fwd_delay), **params)

    def reset(self):
        self.f_xor = 0
        self.f_and = 0
        self.f_carry = 0

    def _and_flag(self):
        return self.f_and ^ (self.fault == "and-inverted")

    def fire(self, port, t):
        if port == "p":
            if self.f_xor:
                return (("d", t + self.route_delay),)
            return ()
        if port == "g":
            te = t + self.route_delay
            if self._and_flag():
                if self.f_carry:
                    return (("d", te), ("c", te))
                return (("d", te),)
            if self.f_carry:
                return (("c", te),)
            return ()
        if port == "clk":
            self.f_xor = self.f_and = self.f_carry = 0
            return ()
        if port == "set_xor":
            if self.f_xor:
                self._hazard(t, DOUBLE_SET)
            self.f_xor = 1
            return (("fwd_xor", t + self.fwd_delay),)
        if port == "set_and":
            if self.f_and:
                self._hazard(t, DOUBLE_SET)
            self.f_and = 1
            return (("fwd_and", t + self.fwd_delay),)
        if port == "set_carry":
            if self.f_carry:
                self._hazard(t, DOUBLE_SET)
            self.f_carry = 1
            return (("fwd_carry", t + self.fwd_delay),)
        self._bad_port(port)


KINDS: dict[str, type[Cell]] = {
    cls.kind: cls
    for cls in (
        DelayLine,
        Splitter,
        Merger,
        DFF,
        ToggleMonitor,
        RSFlipFlopDualPort,
        MullerC,
        ClockedXOR,
        HalfAdder,
        InstructionSwitch,
    )
}

# Library default delays in ps; builders override them from the delay config.
DEFAULT_DELAYS = {
    "DelayLine": {"delay": 5},
    "Splitter": {"delay": 3},
    "Merger": {"delay": 3},
    "DFF": {"delay": 5},
    "ToggleMonitor": {"delay": 1},
    "RSFlipFlopDualPort": {"delay": 5},
    "MullerC": {"delay": 5},
    "ClockedXOR": {"delay": 6},
    "HalfAdder": {"sum_delay": 7, "carry_delay": 5},
    "InstructionSwitch": {"route_delay": 4, "fwd_delay": 6},
}


def make_cell(kind: str, name: str, **params) -> Cell:
    try:
        cls = KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown cell kind {kind!r}") from None
    return cls(name, **{**DEFAULT_DELAYS.get(kind, {}), **params})


def step(cell: Cell, port: str, t: int) -> tuple[list[tuple[str, int]], list[Hazard]]:
    """Deliver one pulse and return ``(emissions, hazards raised by it)``."""
    before = len(cell.hazards)
    emissions = list(cell.fire(port, t) or ())
    return emissions, cell.hazards[before:]


def reset(cell: Cell) -> None:
    cell.reset()


class CostTable(dict):
    """Josephson-junction count per cell kind."""

    @classmethod
    def parse(cls, text: str, source: str = "<costs>") -> "CostTable":
        table = cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2 or not parts[1].isdigit():
                raise ValueError(f"{source}:{lineno}: expected 'kind count', got {raw.strip()!r}")
            kind, count = parts[0], int(parts[1])
            if kind not in KINDS:
                raise ValueError(f"{source}:{lineno}: unknown cell kind {kind!r}")
            table[kind] = count
        return table

    @classmethod
    def load(cls, path=None) -> "CostTable":
        path = Path(path) if path else Path(__file__).with_name("data") / "jj_costs.txt"
        return cls.parse(path.read_text(), str(path))

    def dumps(self) -> str:
        return "".join(f"{kind} {count}\n" for kind, count in self.items())
