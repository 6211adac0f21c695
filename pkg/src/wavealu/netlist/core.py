"""Netlist representation, delay configuration, validation and JJ accounting."""

from __future__ import annotations

import dataclasses
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from ..cells import DEFAULT_DELAYS, KINDS, CostTable, make_cell

Endpoint = tuple[str, str]

# cells that only pass pulses through; a cycle made of these never settles
PASS_THROUGH = {"DelayLine", "Splitter", "Merger"}
WINDOWED = {"Merger", "DFF", "ClockedXOR", "HalfAdder"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CellSpec:
    kind: str
    params: Mapping[str, object] = field(default_factory=dict)


@dataclass(frozen=True)
class DelayConfig:
    """Cell delays plus the per-slice wave timing.

    ``d_clk`` is the horizontal clock delay from one slice to the next;
    the carry path delay of a slice is ``carry_delay + merger + carry_ptl``
    and must stay below ``d_clk`` so the clock never overtakes the carry.
    ``guard`` is the margin kept between a data pulse and the clock that
    reads it; ``window`` is the hazard window of mergers and clocked cells.
    """

    cells: Mapping[str, Mapping[str, int]] = field(
        default_factory=lambda: {k: dict(v) for k, v in DEFAULT_DELAYS.items()}
    )
    d_clk: int = 20
    carry_ptl: int = 5
    guard: int = 2
    window: int = 2
    slices: Mapping[int, Mapping[str, int]] = field(default_factory=dict)

    def delay(self, kind: str, key: str = "delay") -> int:
        return self.cells[kind][key]

    def params(self, kind: str) -> dict:
        p = dict(self.cells.get(kind, {}))
        if kind in WINDOWED:
            p["window"] = self.window
        return p

    def d_clk_at(self, i: int) -> int:
        return self.slices.get(i, {}).get("d_clk", self.d_clk)

    def carry_ptl_at(self, i: int) -> int:
        return self.slices.get(i, {}).get("carry_ptl", self.carry_ptl)

    def d_carry_at(self, i: int) -> int:
        return (
            self.delay("HalfAdder", "carry_delay")
            + self.delay("Merger")
            + self.carry_ptl_at(i)
        )

    def with_slice(self, i: int, **values) -> "DelayConfig":
        slices = {k: dict(v) for k, v in self.slices.items()}
        slices.setdefault(i, {}).update(values)
        return dataclasses.replace(self, slices=slices)

    def scaled(self, k: int) -> "DelayConfig":
        """Every delay, margin and window multiplied by ``k``."""
        return DelayConfig(
            cells={kind: {p: v * k for p, v in ps.items()} for kind, ps in self.cells.items()},
            d_clk=self.d_clk * k,
            carry_ptl=self.carry_ptl * k,
            guard=self.guard * k,
            window=self.window * k,
            slices={i: {p: v * k for p, v in ps.items()} for i, ps in self.slices.items()},
        )


WAVE_KEYS = ("d_clk", "carry_ptl", "guard", "window")
SLICE_KEYS = ("d_clk", "carry_ptl")
NETLIST_KEYS = ("bits", "costs")


def parse_config(text: str, source: str = "<config>") -> tuple[DelayConfig, dict]:
    """Parse the ``key = value`` configuration format.

    Sections: ``[netlist]`` (bits, costs), ``[wave]`` (d_clk, carry_ptl,
    guard, window), one per cell kind (e.g. ``[HalfAdder]`` with
    ``sum_delay``) and ``[slice N]`` overrides of d_clk / carry_ptl.
    Blank lines and ``#`` comments are ignored.  Errors name the line.
    """
    cells = {k: dict(v) for k, v in DEFAULT_DELAYS.items()}
    wave: dict[str, int] = {}
    slices: dict[int, dict[str, int]] = {}
    settings: dict[str, object] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        where = f"{source}:{lineno}"
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[\s*([^\]]+?)\s*\]", line)
        if m:
            section = m.group(1)
            sm = re.fullmatch(r"slice\s+(\d+)", section)
            if sm:
                section = ("slice", int(sm.group(1)))
            elif section not in ("netlist", "wave") and section not in KINDS:
                raise ConfigError(f"{where}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"{where}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if section is None:
            raise ConfigError(f"{where}: {key!r} outside any section")
        if section == "netlist":
            if key not in NETLIST_KEYS:
                raise ConfigError(f"{where}: unknown key {key!r} in [netlist]")
            settings[key] = _int(value, where) if key == "bits" else value
            continue
        number = _int(value, where)
        if number <= 0:
            raise ConfigError(f"{where}: {key} must be positive")
        if section == "wave":
            if key not in WAVE_KEYS:
                raise ConfigError(f"{where}: unknown key {key!r} in [wave]")
            wave[key] = number
        elif isinstance(section, tuple):
            if key not in SLICE_KEYS:
                raise ConfigError(f"{where}: unknown key {key!r} in [slice {section[1]}]")
            slices.setdefault(section[1], {})[key] = number
        else:
            if key not in cells[section]:
                raise ConfigError(f"{where}: {section} has no parameter {key!r}")
            cells[section][key] = number
    return DelayConfig(cells=cells, slices=slices, **wave), settings


def _int(value: str, where: str) -> int:
    try:
        return int(value, 0)
    except ValueError:
        raise ConfigError(f"{where}: not an integer: {value!r}") from None


def load_config(path) -> tuple[DelayConfig, dict]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_config(text, str(path))


@dataclass(frozen=True)
class Netlist:
    """Cells, point-to-point nets and named external ports.

    ``nets`` maps a source endpoint ``(cell, port)`` to its single sink.
    ``inputs`` maps an external input name to the sink it drives and
    ``outputs`` an external output name to the source endpoint observed.
    Treat instances as immutable; the mutators return modified copies.
    """

    cells: Mapping[str, CellSpec]
    nets: Mapping[Endpoint, Endpoint]
    inputs: Mapping[str, Endpoint]
    outputs: Mapping[str, Endpoint]
    meta: Mapping[str, object] = field(default_factory=dict)

    def kinds(self) -> Counter:
        return Counter(spec.kind for spec in self.cells.values())

    def driver(self, sink: Endpoint):
        for src, dst in self.nets.items():
            if dst == sink:
                return src
        for name, dst in self.inputs.items():
            if dst == sink:
                return name
        return None

    def disconnect(self, cell: str, port: str) -> "Netlist":
        """Copy with the net driving input ``cell.port`` removed."""
        sink = (cell, port)
        nets = {s: d for s, d in self.nets.items() if d != sink}
        inputs = {n: d for n, d in self.inputs.items() if d != sink}
        if len(nets) == len(self.nets) and len(inputs) == len(self.inputs):
            raise KeyError(f"{cell}.{port} is not driven")
        return dataclasses.replace(self, nets=nets, inputs=inputs)

    def with_params(self, cell: str, **params) -> "Netlist":
        cells = dict(self.cells)
        spec = cells[cell]
        cells[cell] = CellSpec(spec.kind, {**spec.params, **params})
        return dataclasses.replace(self, cells=cells)

    def slice_cells(self, i: int) -> dict[str, CellSpec]:
        prefix = f"slice{i}."
        return {cid[len(prefix):]: s for cid, s in self.cells.items() if cid.startswith(prefix)}


class Builder:
    """Mutable netlist under construction."""

    def __init__(self, cfg: DelayConfig):
        self.cfg = cfg
        self.cells: dict[str, CellSpec] = {}
        self.nets: dict[Endpoint, Endpoint] = {}
        self.inputs: dict[str, Endpoint] = {}
        self.outputs: dict[str, Endpoint] = {}
        self.meta: dict[str, object] = {}
        self._driven: set[Endpoint] = set()

    def cell(self, kind: str, cid: str, **params) -> str:
        if cid in self.cells:
            raise ValueError(f"duplicate cell id {cid!r}")
        self.cells[cid] = CellSpec(kind, {**self.cfg.params(kind), **params})
        return cid

    def delay_line(self, cid: str, delay: int) -> str:
        if delay <= 0:
            raise ConfigError(f"{cid}: computed delay {delay} ps is not positive")
        return self.cell("DelayLine", cid, delay=delay)

    def set_delay(self, cid: str, delay: int) -> None:
        if delay <= 0:
            raise ConfigError(f"{cid}: computed delay {delay} ps is not positive")
        spec = self.cells[cid]
        self.cells[cid] = CellSpec(spec.kind, {**spec.params, "delay": delay})

    def _claim(self, dst: Endpoint) -> None:
        if dst in self._driven:
            raise ValueError(f"{dst[0]}.{dst[1]} already has a driver")
        self._driven.add(dst)

    def wire(self, src: Endpoint, dst: Endpoint) -> None:
        if src in self.nets:
            raise ValueError(f"{src[0]}.{src[1]} already drives a net")
        self._claim(dst)
        self.nets[src] = dst

    def input(self, name: str, dst: Endpoint) -> None:
        self._claim(dst)
        self.inputs[name] = dst

    def output(self, name: str, src: Endpoint) -> None:
        self.outputs[name] = src

    def fanout(self, src: Endpoint, sinks: list[Endpoint], prefix: str) -> None:
        """Balanced splitter tree from ``src`` to ``sinks``.

        Leaf depths differ by at most one; earlier sinks get the shallower
        leaves, so listing downstream stages first gives counter-flow
        clocking of shift registers.
        """
        counter = [0]

        def grow(src, sinks):
            if len(sinks) == 1:
                self.wire(src, sinks[0])
                return
            sid = self.cell("Splitter", f"{prefix}.sp{counter[0]}")
            counter[0] += 1
            self.wire(src, (sid, "in"))
            half = len(sinks) // 2
            grow((sid, "out1"), sinks[:half])
            grow((sid, "out2"), sinks[half:])

        grow(src, list(sinks))

    def arrivals(self, src: Endpoint, t0: int = 0) -> dict[Endpoint, int]:
        return arrivals(self, src, t0)

    def freeze(self) -> Netlist:
        return Netlist(dict(self.cells), dict(self.nets), dict(self.inputs), dict(self.outputs), dict(self.meta))


def _pass_delay(spec: CellSpec) -> int:
    return make_cell(spec.kind, "probe", **spec.params).delay


def arrivals(net, src: Endpoint, t0: int = 0) -> dict[Endpoint, int]:
    """Pulse arrival times at every sink reached from ``src`` through
    delay lines, splitters and mergers, starting at ``t0``."""
    out: dict[Endpoint, int] = {}
    stack = [(src, t0)]
    while stack:
        ep, t = stack.pop()
        dst = net.nets.get(ep)
        if dst is None:
            continue
        out[dst] = t
        spec = net.cells[dst[0]]
        if spec.kind in PASS_THROUGH:
            te = t + _pass_delay(spec)
            for port in KINDS[spec.kind].outputs:
                stack.append(((dst[0], port), te))
    return out


def validate(n: Netlist) -> list[str]:
    """Structural findings; an empty list means the netlist is sound."""
    findings: list[str] = []
    driven: Counter = Counter(n.nets.values())
    driven.update(n.inputs.values())
    output_eps = set(n.outputs.values())

    for cid, spec in n.cells.items():
        cls = KINDS.get(spec.kind)
        if cls is None:
            findings.append(f"{cid}: unknown cell kind {spec.kind!r}")
            continue
        try:
            make_cell(spec.kind, cid, **spec.params)
        except (TypeError, ValueError) as exc:
            findings.append(f"{cid}: bad parameters: {exc}")
        optional = set(spec.params.get("optional_inputs", ()))
        for port in cls.inputs:
            if port not in optional and driven[(cid, port)] == 0:
                findings.append(f"{cid}.{port}: input not driven")
        for port in cls.outputs:
            ep = (cid, port)
            if ep not in n.nets and ep not in output_eps:
                findings.append(f"{cid}.{port}: dangling output")

    for ep, count in driven.items():
        if count > 1:
            findings.append(f"{ep[0]}.{ep[1]}: driven by {count} sources")
        if ep[0] not in n.cells:
            findings.append(f"{ep[0]}.{ep[1]}: net ends at unknown cell")
        elif ep[1] not in KINDS.get(n.cells[ep[0]].kind, KINDS["DelayLine"]).inputs:
            findings.append(f"{ep[0]}.{ep[1]}: no such input port")
    for src in n.nets:
        if src[0] not in n.cells:
            findings.append(f"{src[0]}.{src[1]}: net starts at unknown cell")

    findings.extend(_combinational_cycles(n))

    wave = n.meta.get("wave")
    if wave:
        for i, (d_clk, d_carry) in enumerate(zip(wave["d_clk"], wave["d_carry"])):
            if d_clk <= d_carry:
                findings.append(
                    f"slice{i}: D_clk ({d_clk} ps) <= D_carry ({d_carry} ps); clock would overtake carry"
                )
    return findings


def _combinational_cycles(n: Netlist) -> list[str]:
    succ: dict[str, list[str]] = {}
    for (scell, _), (dcell, _) in n.nets.items():
        if n.cells.get(scell, CellSpec("?")).kind in PASS_THROUGH and n.cells.get(
            dcell, CellSpec("?")
        ).kind in PASS_THROUGH:
            succ.setdefault(scell, []).append(dcell)
    state: dict[str, int] = {}
    found = []
    for root in succ:
        if state.get(root):
            continue
        stack = [(root, iter(succ.get(root, ())))]
        state[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                state[node] = 2
                stack.pop()
            elif state.get(nxt) == 1:
                found.append(f"{nxt}: combinational loop through pass-through cells")
            elif not state.get(nxt):
                state[nxt] = 1
                stack.append((nxt, iter(succ.get(nxt, ()))))
    return found


class MissingCostError(KeyError):
    pass


def jj_count(n: Netlist, costs: Mapping[str, int] | None = None) -> int:
    costs = CostTable.load() if costs is None else costs
    total = 0
    for kind, count in sorted(n.kinds().items()):
        if kind not in costs:
            raise MissingCostError(f"no JJ cost for cell kind {kind!r}")
        total += costs[kind] * count
    return total
