"""On-chip test bench around the ALU.

Blocks, all built from library cells:

* Input buffer: three serial shift registers (banks) of ``6 + 2N`` DFFs,
  one per data port ``d0``-``d2``, shifted by ``serial_clk``.  A frame
  is sent most significant bit first: the six control bits (plus1, xor,
  and, carry, invA, invB), then A and B, each MSB first.  After loading,
  chain position ``j`` of bank ``k`` holds frame bit ``j``.  Each chain
  position has a tap DFF that is armed by the bank's read pulse and
  clocked by the chain output, so a read sends the frame out in parallel.
* Read sequencer: five counter-flow clocked token DFFs; the token starts
  in the first one and reaches bank ``k`` on internal clock ``k + 3``.
* HF clock generator: ``hf_trigger`` loads four token DFFs; each
  ``hf_clk`` pulse shifts one token out, giving exactly four clocks at
  the external HF period.
* Clock distribution: ``alu_clk`` and the HF generator merge into one
  internal clock that reads the input buffer and then, delayed so that
  it follows the data, enters the ALU.
* Output buffer: per bit a result DFF and an output DFF clocked by the
  slice's own clock tap, de-skewed by delay lines onto ``O<i>``.

Frame ``k`` is executed on internal clock ``k + 3``, its result leaves
the output buffer two clocks later, so at low speed the first result
shows on the fifth ``alu_clk``.  In high-speed mode the four HF clocks
run the first part of this pipeline and the result comes out on the
first slow clock.
"""

from __future__ import annotations

from .alu import MONITOR, SWITCH_PORT, build_alu
from .core import Builder, ConfigError, DelayConfig, Netlist

N_BANKS = 3
N_SEQ = 5
N_HF = 4
CONTROL_FRAME_ORDER = ("plus1", "xor_en", "and_en", "carry_en", "inv_a", "inv_b")
ALU_PORT = {"plus1": "plus1", "inv_a": "inv_a", "inv_b": "inv_b", **SWITCH_PORT}
MONITOR_PORTS = ("clk_mon", "clk_out1", "clk_out2", "mon_invB", "mon_invA", "mon_XOR", "mon_AND", "mon_CARRY")


def frame_bits(n_bits: int) -> int:
    return 6 + 2 * n_bits


def frame_layout(n_bits: int) -> list[str]:
    """ALU input port fed by each frame bit position (index = bit)."""
    layout = [f"b{i}" for i in range(n_bits)] + [f"a{i}" for i in range(n_bits)]
    layout += [ALU_PORT[line] for line in reversed(CONTROL_FRAME_ORDER)]
    return layout


def frame_word(control_bits: int, a: int, b: int, n_bits: int) -> int:
    """The frame as an integer, bit ``j`` = chain position ``j``."""
    return (control_bits << (2 * n_bits)) | (a << n_bits) | b


def _copy_alu(b: Builder, alu: Netlist) -> None:
    b.cells.update(alu.cells)
    for src, dst in alu.nets.items():
        b.wire(src, dst)


def build_testbed(alu: Netlist | None = None, cfg: DelayConfig | None = None, width: int | None = None) -> Netlist:
    """Wrap an ALU from :func:`build_alu` with the test bench.

    ``width``, when given, is the ALU width the caller expects; a
    different width is an error.
    """
    if alu is None:
        alu = build_alu(width or 8, cfg)
    if alu.meta.get("role") != "alu":
        raise ConfigError("build_testbed needs a netlist from build_alu")
    n_bits = alu.meta["bits"]
    if width is not None and n_bits != width:
        raise ConfigError(f"testbed expects a {width}-bit ALU, got {n_bits} bits")
    cfg = cfg or alu.meta["cfg"]
    s = cfg.delay("Splitter")
    nf = frame_bits(n_bits)
    layout = frame_layout(n_bits)

    b = Builder(cfg)
    _copy_alu(b, alu)

    # internal clock: alu_clk + HF generator -> root tree
    b.cell("Merger", "clk.m")
    b.input("alu_clk", ("clk.m", "a"))
    for name in ("r0", "r1", "r2"):
        b.cell("Splitter", "clk." + name)
    b.wire(("clk.m", "out"), ("clk.r0", "in"))
    b.wire(("clk.r0", "out1"), ("clk.r1", "in"))
    b.wire(("clk.r0", "out2"), ("clk.r2", "in"))
    b.output("clk_mon", ("clk.r1", "out1"))
    lead = b.delay_line("clk.lead", 1)
    sync = b.delay_line("clk.sync", 1)
    b.wire(("clk.r2", "out1"), (lead, "in"))
    b.wire(("clk.r2", "out2"), (sync, "in"))
    b.wire((lead, "out"), alu.inputs["clk"])
    b.wire((sync, "out"), alu.inputs["sync_in"])

    # HF generator
    for k in range(N_HF):
        b.cell("DFF", f"hf.g{k}")
        if k:
            b.cell("Merger", f"hf.m{k}")
            b.wire((f"hf.m{k}", "out"), (f"hf.g{k}", "d"))
            b.wire((f"hf.g{k - 1}", "out"), (f"hf.m{k}", "b"))
    b.cell("Splitter", "hf.ti")
    b.cell("Splitter", "hf.ci")
    b.input("hf_trigger", ("hf.ti", "in"))
    b.input("hf_clk", ("hf.ci", "in"))
    trig_sinks = [("hf.g0", "d")] + [(f"hf.m{k}", "a") for k in range(1, N_HF)]
    b.fanout(("hf.ti", "out1"), trig_sinks[:2], "hf.tt1")
    b.fanout(("hf.ti", "out2"), trig_sinks[2:], "hf.tt2")
    clk_sinks = [(f"hf.g{k}", "clk") for k in range(N_HF)]
    b.fanout(("hf.ci", "out1"), clk_sinks[:2], "hf.ct1")
    b.fanout(("hf.ci", "out2"), clk_sinks[2:], "hf.ct2")
    b.wire((f"hf.g{N_HF - 1}", "out"), ("clk.m", "b"))
    sp = cfg.delay("Splitter")
    trig_at = {**b.arrivals(("hf.ti", "out1"), sp), **b.arrivals(("hf.ti", "out2"), sp)}
    clk_at = {**b.arrivals(("hf.ci", "out1"), sp), **b.arrivals(("hf.ci", "out2"), sp)}
    # hf_trigger -> first hf_clk: every token stored before the first shift
    b.meta["hf_lead"] = max(1, max(trig_at[(f"hf.g{k}", "d")] for k in range(N_HF)) - min(clk_at[s] for s in clk_sinks) + cfg.window + 1)

    # read sequencer, clocked counter-flow (last token first)
    for k in range(N_SEQ):
        b.cell("DFF", f"seq.q{k}", init=int(k == 0), optional_inputs=("d",) if k == 0 else ())
    seq_sinks = [(f"seq.q{k}", "clk") for k in reversed(range(N_SEQ))]
    chain = ("clk.r1", "out2")
    for idx, sink in enumerate(seq_sinks[:-1]):
        sp = b.cell("Splitter", f"seq.c{idx}")
        b.wire(chain, (sp, "in"))
        b.wire((sp, "out1"), sink)
        chain = (sp, "out2")
    b.wire(chain, seq_sinks[-1])
    read_src = {}
    for k in range(N_SEQ - 1):
        bank = k - (N_SEQ - N_BANKS)
        if bank >= 0:
            sp = b.cell("Splitter", f"seq.s{k}")
            b.wire((f"seq.q{k}", "out"), (sp, "in"))
            b.wire((sp, "out1"), (f"seq.q{k + 1}", "d"))
            read_src[bank] = (sp, "out2")
        else:
            b.wire((f"seq.q{k}", "out"), (f"seq.q{k + 1}", "d"))
    read_src[N_BANKS - 1] = (f"seq.q{N_SEQ - 1}", "out")

    # input buffer banks
    b.cell("Splitter", "sclk.s")
    b.input("serial_clk", ("sclk.s", "in"))
    serial_sinks = []
    for k in range(N_BANKS):
        p = f"in{k}."
        b.cell("Splitter", p + "rd")
        b.wire(read_src[k], (p + "rd", "in"))
        b.delay_line(p + "rdl", s)
        b.cell("Merger", p + "cm")
        serial_sinks.append((p + "cm", "a"))
        b.wire((p + "rd", "out2"), (p + "rdl", "in"))
        b.wire((p + "rdl", "out"), (p + "cm", "b"))
        for j in range(nf):
            b.cell("DFF", p + f"f{j}", check_pending=False)
            b.cell("DFF", p + f"t{j}", check_pending=False)
            if j < nf - 1:
                b.cell("Splitter", p + f"fs{j}")
                b.wire((p + f"f{j}", "out"), (p + f"fs{j}", "in"))
                b.wire((p + f"fs{j}", "out1"), (p + f"f{j + 1}", "d"))
                b.wire((p + f"fs{j}", "out2"), (p + f"t{j}", "clk"))
            else:
                b.wire((p + f"f{j}", "out"), (p + f"t{j}", "clk"))
        b.input(f"d{k}", (p + "f0", "d"))
        b.fanout((p + "rd", "out1"), [(p + f"t{j}", "d") for j in range(nf)], p + "arm")
        b.fanout((p + "cm", "out"), [(p + f"f{j}", "clk") for j in reversed(range(nf))], p + "clk")
    b.fanout(("sclk.s", "out1"), serial_sinks[:1], "sclk.t1")
    b.fanout(("sclk.s", "out2"), serial_sinks[1:], "sclk.t2")

    # tap -> equalising delay -> bank merge -> skew delay -> ALU input
    for j, port in enumerate(layout):
        b.cell("Merger", f"dp{j}.m1")
        b.cell("Merger", f"dp{j}.m2")
        for k in range(N_BANKS):
            b.delay_line(f"dp{j}.e{k}", 1)
            b.wire((f"in{k}.t{j}", "out"), (f"dp{j}.e{k}", "in"))
        b.wire(("dp%d.e0" % j, "out"), (f"dp{j}.m1", "a"))
        b.wire(("dp%d.e1" % j, "out"), (f"dp{j}.m1", "b"))
        b.wire((f"dp{j}.m1", "out"), (f"dp{j}.m2", "a"))
        b.wire(("dp%d.e2" % j, "out"), (f"dp{j}.m2", "b"))
        b.delay_line(f"dp{j}.skew", 1)
        b.wire((f"dp{j}.m2", "out"), (f"dp{j}.skew", "in"))
        b.wire((f"dp{j}.skew", "out"), alu.inputs[port])

    # output buffer
    for i in range(n_bits):
        p = f"out{i}."
        b.cell("Splitter", p + "s")
        b.cell("DFF", p + "r")
        b.cell("DFF", p + "q")
        b.delay_line(p + "dl", 1)
        b.wire(alu.outputs[f"bufclk{i}"], (p + "s", "in"))
        b.wire((p + "s", "out1"), (p + "r", "clk"))
        b.wire((p + "s", "out2"), (p + "q", "clk"))
        b.wire(alu.outputs[f"s{i}"], (p + "r", "d"))
        b.wire((p + "r", "out"), (p + "q", "d"))
        b.wire((p + "q", "out"), (p + "dl", "in"))
        b.output(f"O{i}", (p + "dl", "out"))

    for name in ("clk_out1", "clk_out2", *MONITOR.values()):
        b.output(name, alu.outputs[name])
    b.cell("ToggleMonitor", "carry_mon")
    b.wire(alu.outputs["cout"], ("carry_mon", "in"))
    for name, src in list(b.outputs.items()):
        b.cell("ToggleMonitor", name)
        b.wire(src, (name, "in"))

    _place_delays(b, alu, n_bits, layout)
    b.meta["bits"] = n_bits
    return b.freeze()


def _place_delays(b: Builder, alu: Netlist, n_bits: int, layout: list[str]) -> None:
    """Size the equalising, skew, lead and de-skew delay lines.

    Times are relative to a pulse entering the internal clock root.
    """
    cfg = b.cfg
    dff = cfg.delay("DFF")
    m = cfg.delay("Merger")
    arrive = alu.meta["arrive"]
    emit = alu.meta["emit"]

    root = b.arrivals(("clk.m", "out"), 0)
    # token DFF k is clocked at root[...]; its output leaves dff later
    tap_out: dict[tuple[int, int], int] = {}
    nf = len(layout)
    for k in range(N_BANKS):
        q = k + (N_SEQ - N_BANKS)
        t_read = root[(f"seq.q{q}", "clk")] + dff
        src = (f"seq.s{q}", "out2") if q < N_SEQ - 1 else (f"seq.q{q}", "out")
        if q < N_SEQ - 1:
            t_read += cfg.delay("Splitter")
        reach = b.arrivals(src, t_read)
        for j in range(nf):
            t_arm = reach[(f"in{k}.t{j}", "d")]
            t_chain = reach[(f"in{k}.f{j}", "clk")] + dff
            if j < nf - 1:
                t_chain += cfg.delay("Splitter")
            if t_arm >= t_chain:
                raise ConfigError(f"in{k}.t{j}: tap armed after its read-out")
            tap_out[k, j] = t_chain + dff

    merge_hops = {0: 2 * m, 1: 2 * m, 2: m}
    at_m2 = {}
    for j in range(nf):
        e = max(tap_out[k, j] + merge_hops[k] for k in range(N_BANKS)) + 1
        for k in range(N_BANKS):
            b.set_delay(f"dp{j}.e{k}", e - tap_out[k, j] - merge_hops[k])
        at_m2[j] = e
    lead_src = root[("clk.lead", "in")]
    t_alu = max(at_m2[j] + 1 - arrive[port] for j, port in enumerate(layout))
    t_alu = max(t_alu, lead_src + 1)
    for j, port in enumerate(layout):
        b.set_delay(f"dp{j}.skew", t_alu + arrive[port] - at_m2[j])
    b.set_delay("clk.lead", t_alu - lead_src)
    b.set_delay("clk.sync", t_alu + arrive["sync_in"] - root[("clk.sync", "in")])

    s = cfg.delay("Splitter")
    q_out = [emit[f"bufclk{i}"] + s + dff for i in range(n_bits)]
    aligned = max(q_out) + 1
    for i in range(n_bits):
        b.set_delay(f"out{i}.dl", aligned - q_out[i])

    t_mon = root[("clk_mon", "in")]
    offsets = {f"O{i}": t_alu + aligned - t_mon for i in range(n_bits)}
    for name in ("clk_out1", "clk_out2", *MONITOR.values()):
        offsets[name] = t_alu + emit[name] - t_mon
    b.meta.update(
        role="testbed",
        cfg=cfg,
        alu_meta=dict(alu.meta),
        frame_bits=nf,
        layout=layout,
        t_alu=t_alu,
        # external alu_clk pulse -> clk_mon net
        alu_clk_to_mon=m + t_mon,
        # clk_mon pulse -> observed pulse on each output, same internal clock
        mon_offsets=offsets,
        wave=alu.meta["wave"],
    )
