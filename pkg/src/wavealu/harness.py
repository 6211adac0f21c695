"""Test programs for the simulated chip, and comparison with the golden model.

A program loads up to three frames into the input buffer, then clocks
the ALU.  In low-speed mode every clock is an ``alu_clk`` pulse; in
high-speed mode an ``hf_trigger`` pulse first makes the on-chip
generator emit four clocks at the HF period, and the slow clocks only
read the output buffer.

Output pulses are attributed to the internal clock that produced them
from the static latencies the netlist builder recorded, so every output
word has an exact clock index.  Clock indices count ``alu_clk`` pulses
from 1; the four HF clocks are reported as -1 to -4.
"""

from __future__ import annotations

import bisect
import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .cells import Hazard
from .isa import ControlWord, evaluate
from .kernel import Kernel, Trace, vcd_text
from .netlist import Netlist, validate
from .netlist.testbed import N_BANKS, frame_word

log = logging.getLogger(__name__)

LOW_SPEED = "low_speed"
HIGH_SPEED = "high_speed"

# first readout clock of frame 0, per mode
FIRST_READOUT = {LOW_SPEED: 5, HIGH_SPEED: 1}
LOW_SPEED_CLOCKS = 7
SLOW_CLOCKS_AFTER_HF = 3
HF_CLOCK_PULSES = 6
HF_PERIOD_2_8GHZ = 357
DEFAULT_PERIOD = 100
SERIAL_PERIOD = 100

Case = tuple[ControlWord, int, int]


# a carry reached a half adder outside its own wave's clock interval
CARRY_OUT_OF_WAVE = "carry-out-of-wave"
# two clock waves entered a slice closer than the slice's occupancy
WAVE_OVERLAP = "wave-overlap"


class ProgramError(ValueError):
    pass


class HazardError(RuntimeError):
    pass


class NotAttainable(RuntimeError):
    """No period in the searched range runs clean and correct."""


@dataclass
class TestProgram:
    frames: Sequence[Case]
    mode: str = LOW_SPEED
    alu_period: int = DEFAULT_PERIOD
    hf_period: int = HF_PERIOD_2_8GHZ
    clocks: int | None = None
    load: str = "serial"
    serial_period: int = SERIAL_PERIOD
    hf_pulses: int = HF_CLOCK_PULSES

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if len(self.frames) > N_BANKS:
            raise ProgramError(f"at most {N_BANKS} frames fit the input buffer")
        if self.mode not in (LOW_SPEED, HIGH_SPEED):
            raise ProgramError(f"unknown mode {self.mode!r}")
        if self.alu_period <= 0 or self.hf_period <= 0 or self.serial_period <= 0:
            raise ProgramError("clock periods must be positive")
        if self.load not in ("serial", "direct"):
            raise ProgramError(f"unknown load method {self.load!r}")

    @property
    def n_clocks(self) -> int:
        if self.clocks is not None:
            return self.clocks
        return LOW_SPEED_CLOCKS if self.mode == LOW_SPEED else SLOW_CLOCKS_AFTER_HF


@dataclass
class RunReport:
    outputs: list[tuple[int, int]]
    activity: dict[int, int]
    monitors: dict[str, list[tuple[int, int]]]
    monitor_clocks: dict[str, list[int]]
    counts: dict[str, int]
    hazards: list[Hazard]
    latency: int | None
    stray: list[tuple[str, int]] = field(default_factory=list)
    trace: Trace | None = None
    extras: dict = field(default_factory=dict)
    min_clean_period: int | None = None

    @property
    def clean(self) -> bool:
        return not self.hazards and not self.stray

    @property
    def words(self) -> list[int]:
        return [w for _, w in self.outputs]


class Bench:
    """A kernel over a testbed netlist, reusable across programs."""

    def __init__(self, netlist: Netlist, check: bool = True, record: bool = True):
        if netlist.meta.get("role") != "testbed":
            raise ProgramError("programs run on a netlist from build_testbed")
        if check:
            findings = validate(netlist)
            if findings:
                raise ProgramError(f"netlist has {len(findings)} structural findings: {findings[0]}")
        self.netlist = netlist
        self.meta = netlist.meta
        self.n_bits = netlist.meta["bits"]
        self.kernel = Kernel(netlist)
        self.record = record
        ep = lambda name: "%s.%s" % netlist.outputs[name]  # noqa: E731
        self.out_nets = {name: ep(name) for name in netlist.outputs}
        self.net_to_port = {v: k for k, v in self.out_nets.items()}
        self._carry_nets = self._wave_nets(netlist)
        self._entry_nets = [(i, self._source_net(netlist, (f"slice{i}.h", "in"))) for i in range(self.n_bits)]
        self._occupancy = self.meta["alu_meta"]["offsets"]["occupancy"]
        if not record:
            extra = [n for entry in self._carry_nets for n in entry[2:]]
            extra += [net for _, net in self._entry_nets]
            self.kernel.watch(list(self.out_nets.values()) + extra)

    @staticmethod
    def _source_net(netlist: Netlist, sink) -> str:
        src = netlist.driver(sink)
        return src if isinstance(src, str) else f"{src[0]}.{src[1]}"

    def _wave_nets(self, netlist: Netlist):
        """Per slice i >= 1: (i, carry-in net, own HA2 clock net, previous HA2 clock net)."""
        cfg = self.meta["cfg"]
        clk = {}
        for (src, port), (dst, dport) in netlist.nets.items():
            if dst.endswith(".ha2") and dst.startswith("slice"):
                clk.setdefault(dst, {})[dport] = f"{src}.{port}"
        out = []
        for i in range(1, self.n_bits):
            lag = cfg.carry_ptl_at(i - 1) + cfg.delay("Merger") + cfg.delay("HalfAdder", "carry_delay")
            out.append((i, lag, clk[f"slice{i}.ha2"]["b"], clk[f"slice{i}.ha2"]["clk"], clk[f"slice{i - 1}.ha2"]["clk"]))
        return out

    def _wave_hazards(self, by_net) -> list[Hazard]:
        found = []
        for i, net in self._entry_nets:
            times = by_net.get(net, [])
            for prev, t in zip(times, times[1:]):
                if t - prev <= self._occupancy:
                    found.append(Hazard(t, f"slice{i}", WAVE_OVERLAP))
        for i, lag, carry, own, prev in self._carry_nets:
            own_clk = by_net.get(own, [])
            prev_clk = by_net.get(prev, [])
            for tc in by_net.get(carry, ()):
                k = bisect.bisect_left(prev_clk, tc - lag)
                late = k >= len(own_clk) or tc >= own_clk[k]
                early = k > 0 and k - 1 < len(own_clk) and tc <= own_clk[k - 1]
                if late or early:
                    found.append(Hazard(tc, f"slice{i}.ha2", CARRY_OUT_OF_WAVE))
        return found

    # stimulus -----------------------------------------------------------

    def _load(self, frames: Sequence[Case], method: str, t0: int, ts: int) -> int:
        nf = self.meta["frame_bits"]
        words = [frame_word(c.pack(), a, b, self.n_bits) for c, a, b in frames]
        for c, a, b in frames:
            limit = 1 << self.n_bits
            if not (0 <= a < limit and 0 <= b < limit):
                raise ProgramError(f"operands {a}, {b} do not fit {self.n_bits} bits")
        if method == "direct":
            cells = self.kernel.cells
            for k, word in enumerate(words):
                for j in range(nf):
                    cells[f"in{k}.f{j}"].state = (word >> j) & 1
            return t0
        sched = self.kernel.schedule
        for step in range(nf):
            t = t0 + step * ts
            sched(t, "serial_clk")
            bit = nf - 1 - step
            for k, word in enumerate(words):
                if (word >> bit) & 1:
                    sched(t + ts // 2, f"d{k}")
        # one more period lets the last shift settle
        return t0 + (nf + 1) * ts

    def run(self, p: TestProgram, hazards_fatal: bool = False) -> RunReport:
        k = self.kernel
        k.reset()
        t = self._load(p.frames, p.load, 0, p.serial_period) + p.alu_period
        alu_clks: list[int] = []
        hf_clks: list[int] = []
        if p.mode == HIGH_SPEED:
            k.schedule(t, "hf_trigger")
            lead = self.meta["hf_lead"]
            for i in range(p.hf_pulses):
                k.schedule(t + lead + i * p.hf_period, "hf_clk")
                hf_clks.append(t + lead + i * p.hf_period)
            t = (hf_clks[-1] if hf_clks else t) + max(p.alu_period, p.hf_period)
        for i in range(p.n_clocks):
            alu_clks.append(t + i * p.alu_period)
            k.schedule(alu_clks[-1], "alu_clk")
        trace = k.run()
        hazards = list(k.hazards) + k.unconsumed() + self._wave_hazards(trace.by_net())
        report = self._analyse(trace, p, alu_clks, hazards)
        if hazards_fatal and not report.clean:
            raise HazardError(f"{len(report.hazards)} hazards, {len(report.stray)} stray pulses")
        return report

    # analysis -----------------------------------------------------------

    def _analyse(self, trace: Trace, p: TestProgram, alu_clks: list[int], hazards) -> RunReport:
        meta = self.meta
        by_net = trace.by_net()
        mon_times = by_net.get(self.out_nets["clk_mon"], [])
        to_mon = meta["alu_clk_to_mon"]
        alu_index = {t + to_mon: i + 1 for i, t in enumerate(alu_clks)}
        clock_of = {}
        hf_seen = 0
        for t in mon_times:
            if t in alu_index:
                clock_of[t] = alu_index[t]
            else:
                hf_seen += 1
                clock_of[t] = -hf_seen
        offsets = meta["mon_offsets"]
        stray: list[tuple[str, int]] = []
        words: dict[int, int] = {}
        monitors: dict[str, list[tuple[int, int]]] = {}
        monitor_clocks: dict[str, list[int]] = {}
        counts: dict[str, int] = {}
        for port, net in self.out_nets.items():
            times = by_net.get(net, [])
            counts[port] = len(times)
            level = 0
            monitors[port] = []
            for t in times:
                level ^= 1
                monitors[port].append((t, level))
            if port == "clk_mon":
                monitor_clocks[port] = [clock_of[t] for t in times]
                continue
            idx = []
            for t in times:
                c = clock_of.get(t - offsets[port])
                if c is None:
                    stray.append((port, t))
                    continue
                idx.append(c)
                if port.startswith("O"):
                    words[c] = words.get(c, 0) | (1 << int(port[1:]))
            monitor_clocks[port] = idx
        first = FIRST_READOUT[p.mode]
        outputs = [(first + f, words.get(first + f, 0)) for f in range(len(p.frames))]
        o_times = [t for port, net in self.out_nets.items() if port.startswith("O") for t in by_net.get(net, [])]
        latency = min(o_times) - alu_clks[0] if o_times and alu_clks else None
        return RunReport(
            outputs=outputs,
            activity=dict(sorted(words.items())),
            monitors=monitors,
            monitor_clocks=monitor_clocks,
            counts=counts,
            hazards=hazards,
            latency=latency,
            stray=stray,
            trace=trace if self.record else None,
        )


def run_program(n: Netlist, p: TestProgram, hazards_fatal: bool = False, check: bool = True) -> RunReport:
    return Bench(n, check=check).run(p, hazards_fatal=hazards_fatal)


def instruction_propagation_test(n: Netlist, c: ControlWord, check: bool = True) -> RunReport:
    """Send one control word through the ALU and read the monitors.

    The operands carry ``inv_a``/``inv_b`` in bit 0 so the LSB half adder
    sees no data and ``O0`` shows the ``plus1`` line alone.
    """
    frame = (c, c.inv_a, c.inv_b)
    report = run_program(n, TestProgram([frame], mode=LOW_SPEED, alu_period=1000), check=check)
    names = {"mon_invB": "inv_b", "mon_invA": "inv_a", "mon_XOR": "xor_en", "mon_AND": "and_en", "mon_CARRY": "carry_en"}
    levels = {mon: (report.monitors[mon][-1][1] if report.monitors[mon] else 0) for mon in names}
    matches = all(levels[mon] == getattr(c, line) for mon, line in names.items())
    mon_clocks = sorted({ci for mon in names for ci in report.monitor_clocks[mon]})
    o0 = report.monitor_clocks["O0"]
    shift = o0[0] - mon_clocks[0] if o0 and mon_clocks else None
    report.extras.update(
        levels=levels,
        monitors_match=matches,
        monitor_clock=mon_clocks[0] if mon_clocks else None,
        plus1_clocks=o0,
        plus1_seen=bool(o0) == bool(c.plus1),
        plus1_shift=shift,
    )
    return report


def clock_propagation_test(n: Netlist, k: int, frames: Sequence[Case] = (), check: bool = True) -> tuple[int, int, int]:
    """Toggle counts at clk_mon, clk_out1 and clk_out2 after ``k`` clocks."""
    frames = list(frames) or [(ControlWord(), 0, 0)]
    report = run_program(n, TestProgram(frames, clocks=k, alu_period=1000), check=check)
    return report.counts["clk_mon"], report.counts["clk_out1"], report.counts["clk_out2"]


# oracle comparison -------------------------------------------------------

@dataclass(slots=True)
class CaseResult:
    index: int
    control: ControlWord
    a: int
    b: int
    expected: int
    got: int
    clock_index: int
    clean: bool

    @property
    def ok(self) -> bool:
        return self.expected == self.got and self.clean


@dataclass
class DiffReport:
    results: list[CaseResult]

    @property
    def diffs(self) -> list[CaseResult]:
        return [r for r in self.results if r.expected != r.got]

    @property
    def unclean(self) -> list[CaseResult]:
        return [r for r in self.results if not r.clean]

    @property
    def ok(self) -> bool:
        return not self.diffs and not self.unclean

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["case_index", "ctrl_hex", "a", "b", "expected", "got", "clock_index", "clean"])
        for r in self.results:
            w.writerow([r.index, r.control.hex(), r.a, r.b, r.expected, r.got, r.clock_index, int(r.clean)])
        return buf.getvalue()


def _batches(cases: Sequence[Case], size: int = N_BANKS):
    for start in range(0, len(cases), size):
        yield start, cases[start:start + size]


def _verify_chunk(args) -> list[CaseResult]:
    netlist, chunk, start, mode, period, load, expect = args
    bench = Bench(netlist, check=False, record=False)
    n_bits = bench.n_bits
    out = []
    for offset, frames in _batches(chunk):
        p = TestProgram(frames, mode=mode, alu_period=period, load=load)
        if mode == HIGH_SPEED:
            p.hf_period = period
        report = bench.run(p)
        clean = report.clean
        for f, ((c, a, b), (clock, word)) in enumerate(zip(frames, report.outputs)):
            exp = expect(c, a, b, n_bits)
            out.append(CaseResult(start + offset + f, c, a, b, exp, word, clock, clean))
    return out


def _golden(c, a, b, n_bits):
    return evaluate(c, a, b, n_bits).sum


def verify_against_oracle(
    n: Netlist,
    cases: Sequence[Case],
    mode: str = LOW_SPEED,
    period: int = DEFAULT_PERIOD,
    load: str = "direct",
    workers: int = 1,
    check: bool = True,
    expect=_golden,
) -> DiffReport:
    """Run ``cases`` three per program and compare with the golden model.

    ``load="direct"`` presets the input buffer instead of clocking the
    frames in serially; both leave the buffer in the same state.
    """
    if check:
        findings = validate(n)
        if findings:
            raise ProgramError(f"netlist has {len(findings)} structural findings: {findings[0]}")
    cases = list(cases)
    if workers <= 1 or len(cases) < 64:
        results = _verify_chunk((n, cases, 0, mode, period, load, expect))
    else:
        step = -(-len(cases) // (workers * 4))
        step += (-step) % N_BANKS
        jobs = [(n, cases[i:i + step], i, mode, period, load, expect) for i in range(0, len(cases), step)]
        results = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_verify_chunk, jobs):
                results.extend(part)
    results.sort(key=lambda r: r.index)
    return DiffReport(results)


def sweep_min_period(
    n: Netlist,
    cases: Sequence[Case],
    lo: int,
    hi: int,
    mode: str = LOW_SPEED,
    probes: list | None = None,
    workers: int = 1,
) -> int:
    """Smallest period in ``(lo, hi]`` at which every case runs clean and
    matches the golden model, by bisection.

    ``lo`` is the known-bad end and is never run.  Raises
    :class:`NotAttainable` when ``hi`` itself fails.  ``probes``, if
    given, collects ``(period, clean, diffs)`` for every period tried.
    """
    if not 0 <= lo < hi:
        raise ValueError("sweep needs 0 <= lo < hi")
    cases = list(cases)

    def passes(period: int) -> bool:
        rep = verify_against_oracle(n, cases, mode=mode, period=period, workers=workers, check=False)
        clean = not rep.unclean
        if probes is not None:
            probes.append((period, clean, len(rep.diffs)))
        log.debug("period %d: clean=%s diffs=%d", period, clean, len(rep.diffs))
        return rep.ok

    if not passes(hi):
        raise NotAttainable(f"no clean, correct period in ({lo}, {hi}] ps")
    good, bad = hi, lo
    while good - bad > 1:
        mid = (good + bad) // 2
        if passes(mid):
            good = mid
        else:
            bad = mid
    return good


def sweep_csv(probes: Iterable[tuple[int, bool, int]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["period_ps", "clean", "diffs"])
    for period, clean, diffs in sorted(probes):
        w.writerow([period, int(clean), diffs])
    return buf.getvalue()


def report_vcd(report: RunReport, netlist: Netlist | None = None) -> str:
    if report.trace is None:
        raise ValueError("report was produced without a trace")
    return vcd_text(report.trace)


def exhaustive_cases(controls: Iterable[ControlWord], n_bits: int = 8) -> list[Case]:
    size = 1 << n_bits
    return [(c, a, b) for c in controls for a in range(size) for b in range(size)]


def stratified_cases(controls: Iterable[ControlWord], fraction: float = 0.01, n_bits: int = 8, seed: int = 0) -> list[Case]:
    """A reproducible sample of the exhaustive operand space.

    For each control word the (a, b) plane is cut into a 16x16 grid of
    blocks on the operands' top bits; every block contributes the same
    number of random pairs, and the four corner pairs are always added.
    """
    import random

    size = 1 << n_bits
    rng = random.Random(seed)
    side = min(16, size)
    block = size // side
    per_block = max(1, round(fraction * size * size / (side * side)))
    mask = size - 1
    corners = [(0, 0), (0, mask), (mask, 0), (mask, mask)]
    out: list[Case] = []
    for c in controls:
        pairs = set(corners)
        for i in range(side):
            for j in range(side):
                for _ in range(per_block):
                    pairs.add((i * block + rng.randrange(block), j * block + rng.randrange(block)))
        out.extend((c, a, b) for a, b in sorted(pairs))
    return out
