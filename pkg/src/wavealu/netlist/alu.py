"""N-bit wave-pipelined ripple-carry ALU.

Each slice is the same subgraph::

    a_i ─ XOR(invA) ─┐            ┌─ d ─ HA2 ─ sum ─▶ s_i
                     ├─ HA1 ─ p,g ─ SW            │
    b_i ─ XOR(invB) ─┘            └─ c ─ Merger ◀─ carry
                                          │
                                   carry PTL ─▶ slice i+1 HA2.b

The clock enters slice 0 and moves from slice to slice through a delay
of ``d_clk``; at each slice a vertical splitter chain taps it in this
order: output-buffer tap, input XOR clocks, HA1 clock, HA2 clock, then
the switch reset and the synchronisation marker.  Carries and the
instruction controls travel horizontally on their own, so a data wave
ripples ahead of its clock and a new wave may enter slice 0 as soon as
slice 0 is done with the previous one.

All times below are offsets from the moment the clock reaches the
slice's horizontal splitter.
"""

from __future__ import annotations

from .core import Builder, ConfigError, DelayConfig, Netlist

CONTROL_LINES = ("plus1", "xor_en", "and_en", "carry_en", "inv_a", "inv_b")
SWITCH_PORT = {"xor_en": "set_xor", "and_en": "set_and", "carry_en": "set_carry"}
MONITOR = {"xor_en": "mon_XOR", "and_en": "mon_AND", "carry_en": "mon_CARRY",
           "inv_a": "mon_invA", "inv_b": "mon_invB"}


def slice_offsets(cfg: DelayConfig) -> dict[str, int]:
    s = cfg.delay("Splitter")
    x = cfg.delay("ClockedXOR")
    hs = cfg.delay("HalfAdder", "sum_delay")
    hc = cfg.delay("HalfAdder", "carry_delay")
    r = cfg.delay("InstructionSwitch", "route_delay")
    g = cfg.guard
    d1 = x + g                    # XOR clock -> HA1 clock
    d2 = hs + r + g - s           # HA1 clock tap -> HA2 clock tap
    xor_clk = 4 * s
    ha1_clk = 4 * s + d1
    latest_d = ha1_clk + hs + r   # p routed through the switch
    ha2_clk = 5 * s + d1 + d2
    switch_clk = ha2_clk + s
    # shortest clock spacing at which one wave's inputs cannot reach a
    # cell before that cell's clock for the previous wave: the inverted
    # operand lines lead the clock by one splitter, the controls arrive
    # with it, HA1 and HA2 inputs follow the XOR outputs and the switch
    occupancy = max(
        xor_clk + s,
        switch_clk,
        ha1_clk - (xor_clk + x),
        ha2_clk - (xor_clk + x + hc + r),
    )
    return {
        "d1": d1,
        "d2": d2,
        "bufclk": 2 * s,
        "xor_clk": xor_clk,
        "ha1_in": xor_clk + x,
        "ha1_clk": ha1_clk,
        "g_routed": xor_clk + x + hc + r,
        "latest_d": latest_d,
        "ha2_clk": ha2_clk,
        "switch_clk": switch_clk,
        "marker": switch_clk,
        "sum": ha2_clk + hs,
        "occupancy": occupancy,
    }


def build_alu(n_bits: int, cfg: DelayConfig | None = None, check: bool = True) -> Netlist:
    """Build the ALU.

    External inputs: ``clk``, ``a<i>``, ``b<i>``, the six control lines
    (``plus1``, ``set_xor``, ``set_and``, ``set_carry``, ``inv_a``,
    ``inv_b``) and ``sync_in`` (head of the C-element chain).  External
    outputs: ``s<i>``, ``bufclk<i>``, ``clk_out1``, ``clk_out2``,
    ``cout`` and the five instruction monitors.

    ``meta["arrive"]`` gives, per input, the arrival time relative to
    ``clk`` that the wave discipline expects; ``meta["emit"]`` the time
    at which each clock-synchronous output fires.

    With ``check=False`` a configuration whose carry path is slower than
    its clock is still built, so :func:`validate` can report it.
    """
    if n_bits < 1:
        raise ConfigError("n_bits must be >= 1")
    cfg = cfg or DelayConfig()
    s = cfg.delay("Splitter")
    df = cfg.delay("InstructionSwitch", "fwd_delay")
    dc = cfg.delay("MullerC")
    off = slice_offsets(cfg)
    if off["d2"] <= 0:
        raise ConfigError("HA2 clock tap delay is not positive; raise guard or sum/route delays")
    if cfg.delay("HalfAdder", "carry_delay") > cfg.guard + cfg.delay("HalfAdder", "sum_delay"):
        raise ConfigError("HA1 carry must not reach the switch after its sum")

    d_clk = [cfg.d_clk_at(i) for i in range(n_bits)]
    d_carry = [cfg.d_carry_at(i) for i in range(n_bits)]
    for i in range(n_bits):
        if d_clk[i] <= max(s, df, dc):
            raise ConfigError(f"slice{i}: d_clk ({d_clk[i]} ps) must exceed splitter, switch forward and C-element delays")
        if check and d_clk[i] <= d_carry[i]:
            raise ConfigError(
                f"slice{i}: D_clk ({d_clk[i]} ps) must exceed D_carry ({d_carry[i]} ps)"
            )

    b = Builder(cfg)
    for i in range(n_bits):
        p = f"slice{i}."
        c = lambda name: p + name  # noqa: E731
        b.cell("Splitter", c("h"))
        b.delay_line(c("hdl"), d_clk[i] - s)
        for name in ("v0", "vx", "vxab", "v1", "v2", "v3"):
            b.cell("Splitter", c(name))
        b.delay_line(c("vd1"), off["d1"])
        b.delay_line(c("vd2"), off["d2"])
        b.cell("ClockedXOR", c("xa"))
        b.cell("ClockedXOR", c("xb"))
        b.cell("HalfAdder", c("ha1"))
        b.cell("InstructionSwitch", c("sw"))
        b.cell("HalfAdder", c("ha2"))
        b.cell("Merger", c("cm"))
        b.delay_line(c("cdl"), cfg.carry_ptl_at(i))
        for line in ("ia", "ib"):
            b.cell("Splitter", c(line))
            b.delay_line(c(line + "dl"), d_clk[i] - s)
        for line in ("xor", "and", "carry"):
            b.delay_line(c("f" + line), d_clk[i] - df)
        b.cell("MullerC", c("sync"))
        b.delay_line(c("syncdl"), d_clk[i] - dc)

        # clock: horizontal, then the vertical tap chain
        b.wire((c("h"), "out1"), (c("hdl"), "in"))
        b.wire((c("h"), "out2"), (c("v0"), "in"))
        b.output(f"bufclk{i}", (c("v0"), "out1"))
        b.wire((c("v0"), "out2"), (c("vx"), "in"))
        b.wire((c("vx"), "out1"), (c("vxab"), "in"))
        b.wire((c("vxab"), "out1"), (c("xa"), "clk"))
        b.wire((c("vxab"), "out2"), (c("xb"), "clk"))
        b.wire((c("vx"), "out2"), (c("vd1"), "in"))
        b.wire((c("vd1"), "out"), (c("v1"), "in"))
        b.wire((c("v1"), "out1"), (c("ha1"), "clk"))
        b.wire((c("v1"), "out2"), (c("vd2"), "in"))
        b.wire((c("vd2"), "out"), (c("v2"), "in"))
        b.wire((c("v2"), "out1"), (c("ha2"), "clk"))
        b.wire((c("v2"), "out2"), (c("v3"), "in"))
        b.wire((c("v3"), "out1"), (c("sw"), "clk"))
        b.wire((c("v3"), "out2"), (c("sync"), "b"))

        # datapath
        b.input(f"a{i}", (c("xa"), "a"))
        b.input(f"b{i}", (c("xb"), "a"))
        b.wire((c("ia"), "out1"), (c("xa"), "b"))
        b.wire((c("ib"), "out1"), (c("xb"), "b"))
        b.wire((c("ia"), "out2"), (c("iadl"), "in"))
        b.wire((c("ib"), "out2"), (c("ibdl"), "in"))
        b.wire((c("xa"), "out"), (c("ha1"), "a"))
        b.wire((c("xb"), "out"), (c("ha1"), "b"))
        b.wire((c("ha1"), "sum"), (c("sw"), "p"))
        b.wire((c("ha1"), "carry"), (c("sw"), "g"))
        b.wire((c("sw"), "d"), (c("ha2"), "a"))
        b.wire((c("sw"), "c"), (c("cm"), "a"))
        b.wire((c("ha2"), "carry"), (c("cm"), "b"))
        b.wire((c("cm"), "out"), (c("cdl"), "in"))
        b.output(f"s{i}", (c("ha2"), "sum"))
        for line in ("xor", "and", "carry"):
            b.wire((c("sw"), "fwd_" + line), (c("f" + line), "in"))
        b.wire((c("sync"), "out"), (c("syncdl"), "in"))

    # horizontal links between slices
    last = n_bits - 1
    for i in range(n_bits):
        p, q = f"slice{i}.", f"slice{i + 1}."
        if i == 0:
            b.input("clk", (p + "h", "in"))
            b.input("plus1", (p + "ha2", "b"))
            b.input("inv_a", (p + "ia", "in"))
            b.input("inv_b", (p + "ib", "in"))
            b.input("sync_in", (p + "sync", "a"))
            for line, port in SWITCH_PORT.items():
                b.input(port, (p + "sw", port))
        if i < last:
            b.wire((p + "hdl", "out"), (q + "h", "in"))
            b.wire((p + "cdl", "out"), (q + "ha2", "b"))
            b.wire((p + "iadl", "out"), (q + "ia", "in"))
            b.wire((p + "ibdl", "out"), (q + "ib", "in"))
            b.wire((p + "syncdl", "out"), (q + "sync", "a"))
            for line in ("xor", "and", "carry"):
                b.wire((p + "f" + line, "out"), (q + "sw", "set_" + line))
        else:
            b.output("clk_out1", (p + "hdl", "out"))
            b.output("clk_out2", (p + "syncdl", "out"))
            b.output("cout", (p + "cdl", "out"))
            b.output("mon_invA", (p + "iadl", "out"))
            b.output("mon_invB", (p + "ibdl", "out"))
            b.output("mon_XOR", (p + "fxor", "out"))
            b.output("mon_AND", (p + "fand", "out"))
            b.output("mon_CARRY", (p + "fcarry", "out"))

    start = [0]
    for i in range(n_bits):
        start.append(start[-1] + d_clk[i])
    arrive = {"clk": 0, "plus1": 0, "inv_a": -s, "inv_b": -s, "sync_in": off["marker"]}
    arrive.update({port: 0 for port in SWITCH_PORT.values()})
    emit = {
        "clk_out1": start[n_bits],
        "clk_out2": start[n_bits] + off["marker"],
        "mon_invA": start[n_bits] - s,
        "mon_invB": start[n_bits] - s,
        "mon_XOR": start[n_bits],
        "mon_AND": start[n_bits],
        "mon_CARRY": start[n_bits],
    }
    for i in range(n_bits):
        arrive[f"a{i}"] = arrive[f"b{i}"] = start[i]
        emit[f"s{i}"] = start[i] + off["sum"]
        emit[f"bufclk{i}"] = start[i] + off["bufclk"]
    b.meta.update(
        role="alu",
        bits=n_bits,
        cfg=cfg,
        offsets=off,
        slice_start=start[:-1],
        arrive=arrive,
        emit=emit,
        wave={"d_clk": d_clk, "d_carry": d_carry},
    )
    return b.freeze()
