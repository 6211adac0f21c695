import itertools

import pytest

from wavealu.cells import (
    CLOCK_OVERRUN,
    DEFAULT_DELAYS,
    DOUBLE_SET,
    KINDS,
    MERGER_COLLISION,
    CostTable,
    UnknownPortError,
    make_cell,
    reset,
    step,
)


def test_every_kind_has_defaults_and_ports():
    assert set(KINDS) == set(DEFAULT_DELAYS)
    for kind in KINDS:
        cell = make_cell(kind, "x")
        assert cell.kind == kind
        assert cell.inputs
        with pytest.raises(UnknownPortError):
            cell.fire("nope", 0)


@pytest.mark.parametrize("delay", [0, -3, 1.5])
def test_delays_must_be_positive_integers(delay):
    with pytest.raises(ValueError):
        make_cell("DelayLine", "x", delay=delay)


def test_delay_line_and_splitter():
    assert step(make_cell("DelayLine", "d", delay=7), "in", 10) == ([("out", 17)], [])
    out, _ = step(make_cell("Splitter", "s"), "in", 0)
    assert sorted(out) == [("out1", 3), ("out2", 3)]


def test_merger_passes_separated_pulses():
    m = make_cell("Merger", "m", delay=3, window=2)
    assert step(m, "a", 0) == ([("out", 3)], [])
    assert step(m, "b", 5) == ([("out", 8)], [])
    assert step(m, "a", 8) == ([("out", 11)], [])


def test_merger_collision():
    m = make_cell("Merger", "m", window=2)
    step(m, "a", 10)
    out, hz = step(m, "b", 11)
    assert out == []
    assert [h.kind for h in hz] == [MERGER_COLLISION]
    # same port twice is two distinct pulses, not a collision
    m2 = make_cell("Merger", "m2")
    step(m2, "a", 0)
    assert step(m2, "a", 1)[1] == []


def test_dff_reads_and_clears():
    ff = make_cell("DFF", "f", delay=5)
    assert step(ff, "clk", 0) == ([], [])
    step(ff, "d", 10)
    assert ff.pending()
    assert step(ff, "clk", 20) == ([("out", 25)], [])
    assert step(ff, "clk", 30) == ([], [])
    assert not ff.pending()


def test_dff_hazards():
    ff = make_cell("DFF", "f", window=2)
    step(ff, "d", 0)
    assert [h.kind for h in step(ff, "d", 10)[1]] == [DOUBLE_SET]
    ff = make_cell("DFF", "f", window=2)
    step(ff, "clk", 0)
    assert [h.kind for h in step(ff, "d", 1)[1]] == [CLOCK_OVERRUN]


def test_dff_init_and_reset():
    ff = make_cell("DFF", "q", init=1)
    assert step(ff, "clk", 0)[0] == [("out", 5)]
    reset(ff)
    assert ff.state == 1
    assert not make_cell("DFF", "b", init=1, check_pending=False).pending()


def test_toggle_monitor():
    mon = make_cell("ToggleMonitor", "m")
    levels = []
    for t in range(5):
        assert step(mon, "in", t) == ([], [])
        levels.append(mon.level)
    assert levels == [1, 0, 1, 0, 1]
    assert mon.count == 5
    reset(mon)
    assert (mon.level, mon.count) == (0, 0)


def test_rs_flip_flop_dual_port():
    rs = make_cell("RSFlipFlopDualPort", "rs", delay=4)
    assert step(rs, "reset", 0) == ([("outn", 4)], [])
    step(rs, "set", 10)
    assert rs.pending()
    assert step(rs, "set", 12)[1][0].kind == DOUBLE_SET
    assert step(rs, "reset", 20) == ([("out", 24)], [])


def test_muller_c_join():
    c = make_cell("MullerC", "c", delay=5)
    assert step(c, "a", 0) == ([], [])
    assert step(c, "a", 3) == ([], [])  # absorbed
    assert step(c, "b", 9) == ([("out", 14)], [])
    assert not c.pending()
    assert step(c, "b", 20) == ([], [])
    assert step(c, "a", 21) == ([("out", 26)], [])


@pytest.mark.parametrize("a,b", list(itertools.product([0, 1], repeat=2)))
def test_clocked_xor_truth_table(a, b):
    x = make_cell("ClockedXOR", "x", delay=6)
    if a:
        step(x, "a", 0)
    if b:
        step(x, "b", 1)
    out, hz = step(x, "clk", 10)
    assert hz == []
    assert out == ([("out", 16)] if a ^ b else [])
    assert not x.pending()


@pytest.mark.parametrize("a,b", list(itertools.product([0, 1], repeat=2)))
def test_half_adder_truth_table(a, b):
    ha = make_cell("HalfAdder", "ha", sum_delay=7, carry_delay=5)
    emitted = []
    if a:
        emitted += step(ha, "a", 0)[0]
    if b:
        emitted += step(ha, "b", 2)[0]
    # carry leaves before any clock
    assert emitted == ([("carry", 7)] if a and b else [])
    out, _ = step(ha, "clk", 20)
    assert out == ([("sum", 27)] if a ^ b else [])
    assert not ha.pending()


def test_half_adder_double_input_flagged():
    ha = make_cell("HalfAdder", "ha")
    step(ha, "a", 0)
    assert step(ha, "a", 5) == ([], [ha.hazards[0]])
    assert ha.hazards[0].kind == DOUBLE_SET


SWITCH_FLAGS = list(itertools.product([0, 1], repeat=3))


@pytest.mark.parametrize("xor,and_,carry", SWITCH_FLAGS)
def test_instruction_switch_routing(xor, and_, carry):
    sw = make_cell("InstructionSwitch", "sw", route_delay=4, fwd_delay=6)
    for flag, port in ((xor, "set_xor"), (and_, "set_and"), (carry, "set_carry")):
        if flag:
            out, _ = step(sw, port, 0)
            assert out == [("fwd_" + port[4:], 6)]
    p_out = step(sw, "p", 10)[0]
    g_out = step(sw, "g", 20)[0]
    assert p_out == ([("d", 14)] if xor else [])
    expect = []
    if and_:
        expect.append(("d", 24))
    if carry:
        expect.append(("c", 24))
    assert sorted(g_out) == sorted(expect)
    step(sw, "clk", 30)
    assert step(sw, "p", 40)[0] == [] and step(sw, "g", 41)[0] == []


def test_instruction_switch_fault_inverts_and():
    sw = make_cell("InstructionSwitch", "sw", fault="and-inverted")
    assert step(sw, "g", 0)[0] == [("d", 4)]
    step(sw, "set_and", 5)
    assert step(sw, "g", 10)[0] == []
    with pytest.raises(ValueError):
        make_cell("InstructionSwitch", "sw", fault="stuck")


def test_reset_clears_state():
    ha = make_cell("HalfAdder", "ha")
    step(ha, "a", 0)
    reset(ha)
    assert not ha.pending()
    assert step(ha, "clk", 10)[0] == []


def test_cost_table_parse_errors_and_roundtrip():
    table = CostTable.parse("# c\nSplitter 3\nMerger 5  # tail\n")
    assert table == {"Splitter": 3, "Merger": 5}
    assert CostTable.parse(table.dumps()) == table
    with pytest.raises(ValueError, match=":2:"):
        CostTable.parse("Splitter 3\nMerger five\n")
    with pytest.raises(ValueError, match="unknown cell kind"):
        CostTable.parse("Flux 3\n")


def test_packaged_cost_table_covers_every_kind():
    assert set(CostTable.load()) == set(KINDS)
