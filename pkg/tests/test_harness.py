import pytest

from wavealu.cells import DOUBLE_SET
from wavealu.harness import (
    CARRY_OUT_OF_WAVE,
    HIGH_SPEED,
    WAVE_OVERLAP,
    Bench,
    HazardError,
    NotAttainable,
    ProgramError,
    TestProgram,
    clock_propagation_test,
    exhaustive_cases,
    instruction_propagation_test,
    run_program,
    stratified_cases,
    sweep_csv,
    sweep_min_period,
    verify_against_oracle,
)
from wavealu.isa import ControlWord, Mnemonic, encode, evaluate
from wavealu.netlist import DelayConfig, build_alu, build_testbed, parse_config

ADD, AND, XOR, SUB_AB = (encode(m) for m in (Mnemonic.ADD, Mnemonic.AND, Mnemonic.XOR, Mnemonic.SUB_AB))
ADD_PAIR = [(ADD, 29, 141), (ADD, 13, 72)]
LOGIC_PAIR = [(AND, 63, 240), (XOR, 63, 240)]


@pytest.fixture(scope="module")
def tb():
    return build_testbed(build_alu(8))


def test_program_limits():
    with pytest.raises(ProgramError):
        TestProgram([(ADD, 1, 1)] * 4)
    with pytest.raises(ProgramError):
        TestProgram([(ADD, 1, 1)], alu_period=0)
    with pytest.raises(ProgramError):
        TestProgram([(ADD, 1, 1)], mode="turbo")
    with pytest.raises(ProgramError):
        TestProgram([(ADD, 1, 1)], load="magic")


def test_operands_must_fit(tb):
    with pytest.raises(ProgramError):
        run_program(tb, TestProgram([(ADD, 256, 0)]))


def test_runs_need_a_testbed():
    with pytest.raises(ProgramError):
        Bench(build_alu(4))


def test_invalid_netlist_is_refused(tb):
    with pytest.raises(ProgramError, match="structural"):
        run_program(tb.disconnect("slice3.sync", "a"), TestProgram(ADD_PAIR))


@pytest.mark.parametrize("frames,words", [(ADD_PAIR, [170, 85]), (LOGIC_PAIR, [48, 207])])
def test_low_speed_published_cases(tb, frames, words):
    r = run_program(tb, TestProgram(frames))
    assert r.outputs == [(5, words[0]), (6, words[1])]
    assert list(r.activity) == [c for c, w in r.outputs if w]
    assert r.clean and r.hazards == [] and r.stray == []
    assert len(r.outputs) <= 3


@pytest.mark.parametrize("frames", [ADD_PAIR, LOGIC_PAIR])
def test_high_speed_shifts_by_four_clocks(tb, frames):
    low = run_program(tb, TestProgram(frames))
    high = run_program(tb, TestProgram(frames, mode=HIGH_SPEED, hf_period=357, alu_period=1000))
    assert high.words == low.words
    assert [c for c, _ in high.outputs] == [c - 4 for c, _ in low.outputs]
    assert high.clean


def test_serial_and_direct_load_agree(tb):
    frames = ADD_PAIR + [(SUB_AB, 3, 200)]
    serial = run_program(tb, TestProgram(frames, load="serial"))
    direct = run_program(tb, TestProgram(frames, load="direct"))
    assert serial.outputs == direct.outputs == [(5, 170), (6, 85), (7, 59)]
    assert serial.monitor_clocks == direct.monitor_clocks


def test_latency_counts_from_first_alu_clock(tb):
    slow = run_program(tb, TestProgram(ADD_PAIR, alu_period=1000))
    fast = run_program(tb, TestProgram(ADD_PAIR, alu_period=100))
    # first activity on clock 5: four periods plus a fixed pipeline delay
    assert slow.latency - fast.latency == 4 * 900
    offset = tb.meta["alu_clk_to_mon"] + min(v for k, v in tb.meta["mon_offsets"].items() if k.startswith("O"))
    assert fast.latency == 400 + offset


def test_hf_generator_emits_exactly_four(tb):
    for pulses in (4, 6, 12):
        r = run_program(tb, TestProgram(LOGIC_PAIR, mode=HIGH_SPEED, hf_pulses=pulses, clocks=0))
        assert r.monitor_clocks["clk_mon"] == [-1, -2, -3, -4]
    r = run_program(tb, TestProgram(LOGIC_PAIR, mode=HIGH_SPEED, hf_pulses=2, clocks=0))
    assert r.counts["clk_mon"] == 2


def test_instruction_propagation_sub_ab(tb):
    r = instruction_propagation_test(tb, SUB_AB)
    ex = r.extras
    assert ex["levels"] == {"mon_invB": 1, "mon_invA": 0, "mon_XOR": 1, "mon_AND": 0, "mon_CARRY": 1}
    assert ex["monitors_match"] and ex["plus1_seen"]
    assert ex["plus1_shift"] == 2
    assert ex["monitor_clock"] == 3 and ex["plus1_clocks"] == [5]
    assert r.clean


def test_instruction_propagation_zero_word(tb):
    r = instruction_propagation_test(tb, ControlWord())
    assert all(not pulses for name, pulses in r.monitors.items() if name.startswith(("mon_", "O")))
    assert r.extras["plus1_clocks"] == []


@pytest.mark.parametrize("m", list(Mnemonic))
def test_instruction_propagation_table(tb, m):
    c = encode(m)
    ex = instruction_propagation_test(tb, c).extras
    assert ex["monitors_match"]
    assert ex["plus1_seen"]
    if c.plus1:
        assert ex["plus1_shift"] == 2


def test_clock_propagation(tb):
    assert clock_propagation_test(tb, 4) == (4, 4, 4)
    assert clock_propagation_test(tb, 0) == (0, 0, 0)
    assert clock_propagation_test(tb, 9, ADD_PAIR) == (9, 9, 9)


@pytest.mark.parametrize("i", [0, 3, 7])
def test_severed_c_element_silences_clk_out2(tb, i):
    cut = tb.disconnect(f"slice{i}.sync", "a")
    assert clock_propagation_test(cut, 4, check=False) == (4, 4, 0)


def test_verify_published_pairs(tb):
    cases = [(encode(m), a, b) for m in Mnemonic for a, b in ((29, 141), (13, 72), (63, 240))]
    rep = verify_against_oracle(tb, cases)
    assert rep.ok
    assert [r.index for r in rep.results] == list(range(len(cases)))
    assert [r.clock_index for r in rep.results[:3]] == [5, 6, 7]


def test_verify_csv_layout(tb):
    rep = verify_against_oracle(tb, ADD_PAIR)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "case_index,ctrl_hex,a,b,expected,got,clock_index,clean"
    assert lines[1] == "0,14,29,141,170,170,5,1"


def test_verify_workers_match_single(tb):
    cases = stratified_cases([ADD, SUB_AB], fraction=0.002)
    one = verify_against_oracle(tb, cases)
    two = verify_against_oracle(tb, cases, workers=2)
    assert one.to_csv() == two.to_csv()
    assert one.ok


def test_corrupted_switch_routing():
    tb = build_testbed(build_alu(8))
    bad = tb
    for i in range(8):
        bad = bad.with_params(f"slice{i}.sw", fault="and-inverted")
    cases = [(encode(m), a, b) for m in Mnemonic for a, b in ((29, 141), (63, 240), (255, 1), (0, 0), (170, 85))]
    rep = verify_against_oracle(bad, cases)

    def flipped(c, a, b):
        return evaluate(c._replace(and_en=1 - c.and_en), a, b).sum

    predicted = {i for i, (c, a, b) in enumerate(cases) if flipped(c, a, b) != evaluate(c, a, b).sum}
    assert {r.index for r in rep.diffs} == predicted
    assert predicted
    assert all(r.got == flipped(r.control, r.a, r.b) for r in rep.results)
    # g now feeds both d and the carry chain, so only carrying
    # instructions see doubled carries
    no_carry = [case for case in cases if not case[0].carry_en]
    assert not verify_against_oracle(bad, no_carry).unclean


def test_wave_overlap_below_occupancy(tb):
    r = run_program(tb, TestProgram(ADD_PAIR, alu_period=36))
    assert {h.kind for h in r.hazards} == {WAVE_OVERLAP}
    with pytest.raises(HazardError):
        run_program(tb, TestProgram(ADD_PAIR, alu_period=36), hazards_fatal=True)
    assert run_program(tb, TestProgram(ADD_PAIR, alu_period=37), hazards_fatal=True).clean


def test_slow_carry_breaks_wave_discipline():
    cfg, _ = parse_config("[slice 3]\ncarry_ptl = 30\n")
    slow = build_testbed(build_alu(8, cfg, check=False), cfg)
    r = Bench(slow, check=False).run(TestProgram([(ADD, 255, 1)]))
    assert r.outputs[0][1] != 0
    assert [(h.cell, h.kind) for h in r.hazards] == [("slice4.ha2", CARRY_OUT_OF_WAVE)]


def test_double_set_is_reported(tb):
    bench = Bench(tb)
    bench.kernel.reset()
    k = bench.kernel
    k.schedule(0, "out0.r", "d")
    k.schedule(10, "out0.r", "d")
    k.run()
    assert [h.kind for h in k.hazards] == [DOUBLE_SET]


def test_sweep_finds_t_min(tb):
    probes = []
    t_min = sweep_min_period(tb, ADD_PAIR + LOGIC_PAIR, 0, 400, probes=probes)
    assert t_min == tb.meta["alu_meta"]["offsets"]["occupancy"] + 1
    assert all(clean and diffs == 0 for p, clean, diffs in probes if p >= t_min)
    assert all(not clean for p, clean, diffs in probes if p < t_min)
    assert sweep_csv(probes).splitlines()[0] == "period_ps,clean,diffs"


def test_sweep_adjacent_bounds(tb):
    assert sweep_min_period(tb, ADD_PAIR, 99, 100) == 100
    with pytest.raises(ValueError):
        sweep_min_period(tb, ADD_PAIR, 100, 100)


def test_sweep_not_attainable(tb):
    with pytest.raises(NotAttainable):
        sweep_min_period(tb, ADD_PAIR, 5, 20)


def test_outputs_period_invariant_above_t_min(tb):
    t_min = sweep_min_period(tb, ADD_PAIR + LOGIC_PAIR, 1, 400)
    frames = LOGIC_PAIR + [(SUB_AB, 5, 9)]
    ref = run_program(tb, TestProgram(frames, alu_period=2 * t_min))
    for k in (1, 3, 10):
        r = run_program(tb, TestProgram(frames, alu_period=k * t_min))
        assert (r.outputs, r.activity, r.monitor_clocks) == (ref.outputs, ref.activity, ref.monitor_clocks)


def test_t_min_scales_with_delays(tb):
    t_min = sweep_min_period(tb, ADD_PAIR + LOGIC_PAIR, 1, 400)
    cfg = DelayConfig().scaled(10)
    big = build_testbed(build_alu(8, cfg), cfg)
    scaled = sweep_min_period(big, ADD_PAIR + LOGIC_PAIR, 10, 4000)
    assert abs(scaled / 10 - t_min) <= 1


def test_case_generators():
    assert len(exhaustive_cases([ADD], 4)) == 256
    sub = stratified_cases([ADD], fraction=0.01)
    assert sub == stratified_cases([ADD], fraction=0.01)
    assert 0.01 * 65536 <= len(sub) <= 0.012 * 65536
    pairs = {(a, b) for _, a, b in sub}
    assert {(0, 0), (255, 255), (0, 255), (255, 0)} <= pairs
    # every 16x16 block of the operand plane is sampled
    assert len({(a >> 4, b >> 4) for a, b in pairs}) == 256
