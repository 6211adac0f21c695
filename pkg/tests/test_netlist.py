import pytest

from wavealu.cells import CostTable
from wavealu.netlist import (
    Builder,
    CellSpec,
    ConfigError,
    DelayConfig,
    MissingCostError,
    Netlist,
    build_alu,
    build_testbed,
    frame_bits,
    frame_layout,
    frame_word,
    jj_count,
    parse_config,
    validate,
)
from wavealu.netlist.core import load_config


def internal_nets(n, i):
    p = f"slice{i}."
    cut = len(p)
    return {
        (s[0][cut:], s[1], d[0][cut:], d[1])
        for s, d in n.nets.items()
        if s[0].startswith(p) and d[0].startswith(p)
    }


@pytest.mark.parametrize("bits", [1, 4, 8])
def test_alu_is_structurally_clean(bits):
    assert validate(build_alu(bits)) == []


def test_slices_are_isomorphic():
    n = build_alu(8)
    ref_cells = n.slice_cells(1)
    ref_nets = internal_nets(n, 1)
    for i in range(2, 8):
        assert n.slice_cells(i) == ref_cells
        assert internal_nets(n, i) == ref_nets
    assert {k: v.kind for k, v in n.slice_cells(0).items()} == {k: v.kind for k, v in ref_cells.items()}
    assert n.inputs["plus1"][0].startswith("slice0.")


def test_carry_chain_scales_with_width():
    def carry_lines(n):
        return sum(1 for cid in n.cells if cid.endswith(".cdl"))

    assert carry_lines(build_alu(16)) == 2 * carry_lines(build_alu(8)) == 16
    assert len(build_alu(16).cells) == 2 * len(build_alu(8).cells)


def test_ports():
    n = build_alu(4)
    assert {f"a{i}" for i in range(4)} <= set(n.inputs)
    assert {"clk", "plus1", "inv_a", "inv_b", "set_xor", "set_and", "set_carry", "sync_in"} <= set(n.inputs)
    assert {"clk_out1", "clk_out2", "cout", "mon_XOR", "mon_invA", "s3", "bufclk0"} <= set(n.outputs)


def test_jj_count_calibration():
    assert jj_count(build_alu(3)) == 1842
    assert jj_count(build_alu(1)) == 614
    assert jj_count(Netlist({}, {}, {}, {})) == 0


def test_jj_count_is_linear():
    costs = CostTable.load()
    n = build_testbed(build_alu(8))
    double = {k: 2 * v for k, v in costs.items()}
    assert jj_count(n, double) == 2 * jj_count(n, costs)
    assert jj_count(build_alu(6)) == 2 * jj_count(build_alu(3))


def test_jj_count_missing_kind():
    costs = dict(CostTable.load())
    del costs["HalfAdder"]
    with pytest.raises(MissingCostError, match="HalfAdder"):
        jj_count(build_alu(2), costs)


def test_validate_reports_undriven_and_dangling():
    b = Builder(DelayConfig())
    b.cell("Merger", "m")
    b.delay_line("d", 4)
    b.input("x", ("m", "a"))
    b.wire(("m", "out"), ("d", "in"))
    found = validate(b.freeze())
    assert "m.b: input not driven" in found
    assert "d.out: dangling output" in found


def test_validate_reports_combinational_loop():
    b = Builder(DelayConfig())
    b.cell("Merger", "m")
    b.delay_line("d", 4)
    b.cell("Splitter", "s")
    b.input("x", ("m", "a"))
    b.wire(("m", "out"), ("d", "in"))
    b.wire(("d", "out"), ("s", "in"))
    b.wire(("s", "out1"), ("m", "b"))
    b.output("y", ("s", "out2"))
    assert any("combinational loop" in f for f in validate(b.freeze()))


def test_validate_reports_bad_port_and_multiple_drivers():
    n = Netlist(
        {"d": CellSpec("DelayLine", {"delay": 3})},
        {},
        {"x": ("d", "in"), "y": ("d", "in"), "z": ("d", "clk")},
        {"o": ("d", "out")},
    )
    found = validate(n)
    assert "d.in: driven by 2 sources" in found
    assert "d.clk: no such input port" in found


def test_builder_refuses_double_drive():
    b = Builder(DelayConfig())
    b.delay_line("d", 3)
    b.input("x", ("d", "in"))
    with pytest.raises(ValueError):
        b.input("y", ("d", "in"))
    with pytest.raises(ConfigError):
        b.delay_line("z", 0)


def test_disconnect_severs_one_input():
    n = build_alu(4)
    cut = n.disconnect("slice2.sync", "a")
    assert sorted(validate(cut)) == ["slice1.syncdl.out: dangling output", "slice2.sync.a: input not driven"]
    with pytest.raises(KeyError):
        cut.disconnect("slice2.sync", "a")


def test_slow_carry_is_a_finding():
    cfg, _ = parse_config("[slice 3]\ncarry_ptl = 30\n")
    with pytest.raises(ConfigError, match="slice3"):
        build_alu(8, cfg)
    found = validate(build_alu(8, cfg, check=False))
    assert found == ["slice3: D_clk (20 ps) <= D_carry (38 ps); clock would overtake carry"]


def test_slice_override_is_local():
    cfg, _ = parse_config("[slice 2]\ncarry_ptl = 7\n")
    n = build_alu(4, cfg)
    assert n.cells["slice2.cdl"].params["delay"] == 7
    assert n.cells["slice1.cdl"].params["delay"] == 5


def test_default_config_file_matches_builtins():
    from wavealu.cli import DEFAULT_CONFIG

    cfg, settings = load_config(DEFAULT_CONFIG)
    assert cfg == DelayConfig()
    assert settings == {"bits": 8, "costs": "jj_costs.txt"}


@pytest.mark.parametrize(
    "text,line,message",
    [
        ("[wave]\nd_clk = fast\n", 2, "not an integer"),
        ("[wave]\n\n# x\nd_clk = -4\n", 4, "must be positive"),
        ("[Resistor]\n", 1, "unknown section"),
        ("d_clk = 3\n", 1, "outside any section"),
        ("[HalfAdder]\nsum_delay = 5\ndelay = 3\n", 3, "has no parameter"),
        ("[wave]\nd_clk 20\n", 2, "expected 'key = value'"),
        ("[slice 1]\nguard = 3\n", 2, "unknown key"),
        ("[netlist]\nwidth = 8\n", 2, "unknown key"),
    ],
)
def test_config_errors_name_the_line(text, line, message):
    with pytest.raises(ConfigError) as err:
        parse_config(text, "cfg")
    assert f"cfg:{line}:" in str(err.value)
    assert message in str(err.value)


def test_config_values():
    cfg, settings = parse_config(
        "[netlist]\nbits = 16\n[wave]\nd_clk = 0x18\n[HalfAdder]\nsum_delay = 9\n[slice 0]\nd_clk = 30\n"
    )
    assert settings == {"bits": 16}
    assert cfg.d_clk == 24 and cfg.d_clk_at(0) == 30 and cfg.d_clk_at(1) == 24
    assert cfg.delay("HalfAdder", "sum_delay") == 9
    assert cfg.scaled(10).d_clk_at(0) == 300


def test_testbed_is_clean_and_framed():
    tb = build_testbed(build_alu(8))
    assert validate(tb) == []
    assert frame_bits(8) == 22
    layout = frame_layout(8)
    assert layout[21:15:-1] == ["plus1", "set_xor", "set_and", "set_carry", "inv_a", "inv_b"]
    assert layout[8] == "a0" and layout[0] == "b0" and layout[15] == "a7"
    word = frame_word(0b010100, 29, 141, 8)
    assert word == (0b010100 << 16) | (29 << 8) | 141
    assert {"O0", "O7", "clk_mon", "clk_out2", "mon_CARRY"} <= set(tb.outputs)
    assert {"d0", "d1", "d2", "serial_clk", "alu_clk", "hf_trigger", "hf_clk"} == set(tb.inputs)
