"""Command-line front end: ``wavealu <command> ...``.

Configuration is looked up in this order: ``--config PATH``, the first
``wavealu.cfg`` found in the directories listed in ``$WAVEALU_CONFIG_PATH``
(``os.pathsep`` separated), then the packaged default.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import harness
from .cells import CostTable
from .isa import ControlWord, Mnemonic, encode, iter_vectors
from .netlist import build_alu, build_testbed, jj_count, validate
from .netlist.core import ConfigError, MissingCostError, load_config

ENV_PATH = "WAVEALU_CONFIG_PATH"
CONFIG_NAME = "wavealu.cfg"
DATA = Path(__file__).with_name("data")
DEFAULT_CONFIG = DATA / "default.cfg"

log = logging.getLogger("wavealu")


class UsageError(Exception):
    pass


def find_config(explicit: str | None) -> Path:
    if explicit:
        return Path(explicit)
    for d in os.environ.get(ENV_PATH, "").split(os.pathsep):
        if d and (Path(d) / CONFIG_NAME).is_file():
            return Path(d) / CONFIG_NAME
    return DEFAULT_CONFIG


class Setup:
    """Config, costs and bit width resolved from the command line."""

    def __init__(self, args):
        self.path = find_config(args.config)
        self.cfg, settings = load_config(self.path)
        self.bits = args.bits or int(settings.get("bits", 8))
        if self.bits < 1:
            raise UsageError("--bits must be positive")
        costs = settings.get("costs")
        self.costs_path = (self.path.parent / costs) if costs else DATA / "jj_costs.txt"

    def alu(self):
        return build_alu(self.bits, self.cfg, check=False)

    def testbed(self):
        return build_testbed(self.alu(), self.cfg)


# argument parsing helpers ------------------------------------------------

def parse_control(text: str) -> ControlWord:
    try:
        return encode(Mnemonic.parse(text))
    except ValueError:
        pass
    try:
        value = int(text, 16)
    except ValueError:
        raise UsageError(f"not a mnemonic or control hex: {text!r}") from None
    if not 0 <= value < 64:
        raise UsageError(f"control word {text!r} does not fit 6 bits")
    return ControlWord.unpack(value)


def parse_instructions(text: str) -> list[tuple[str, ControlWord]]:
    if text == "all":
        return [(m.value, encode(m)) for m in Mnemonic]
    out = []
    for item in text.split(","):
        c = parse_control(item)
        out.append((item.strip().lower(), c))
    return out


def parse_operands(text: str, bits: int) -> list[tuple[int, int]]:
    size = 1 << bits
    if text == "all":
        return [(a, b) for a in range(size) for b in range(size)]
    kind, _, body = text.partition(":")
    if kind == "pairs":
        items = [p for p in body.split(";") if p.strip()]
    elif kind == "file":
        try:
            lines = Path(body).read_text().splitlines()
        except OSError as exc:
            raise UsageError(f"{body}: {exc.strerror}") from None
        items = [ln.split("#", 1)[0] for ln in lines]
        items = [ln for ln in items if ln.strip()]
    else:
        raise UsageError(f"operands must be all, pairs:A,B[;A,B...] or file:PATH, got {text!r}")
    pairs = []
    for item in items:
        parts = item.replace(",", " ").split()
        if len(parts) != 2:
            raise UsageError(f"bad operand pair {item.strip()!r}")
        try:
            a, b = (int(x, 0) for x in parts)
        except ValueError:
            raise UsageError(f"bad operand pair {item.strip()!r}") from None
        if not (0 <= a < size and 0 <= b < size):
            raise UsageError(f"operands {a}, {b} do not fit {bits} bits")
        pairs.append((a, b))
    return pairs


def _mode(text: str) -> str:
    return {"low": harness.LOW_SPEED, "high": harness.HIGH_SPEED}.get(text, text)


# commands ----------------------------------------------------------------

def cmd_simulate(args, out) -> int:
    setup = Setup(args)
    frames = []
    if args.frame:
        for spec in args.frame:
            parts = spec.split(",")
            if len(parts) != 3:
                raise UsageError(f"--frame wants INSTR,A,B, got {spec!r}")
            frames.append((parse_control(parts[0]), int(parts[1], 0), int(parts[2], 0)))
    else:
        if args.instr is None:
            raise UsageError("simulate needs --instr or --frame")
        frames.append((parse_control(args.instr), args.a, args.b))
    size = 1 << setup.bits
    for _, a, b in frames:
        if not (0 <= a < size and 0 <= b < size):
            raise UsageError(f"operands {a}, {b} do not fit {setup.bits} bits")
    p = harness.TestProgram(
        frames,
        mode=_mode(args.mode),
        alu_period=args.period,
        hf_period=args.hf_period,
        clocks=args.clocks,
        load=args.load,
    )
    report = harness.run_program(setup.testbed(), p, hazards_fatal=args.hazards_fatal)
    for clock, word in report.outputs:
        print(f"O={word} @clk{clock}", file=out)
    if args.monitors:
        for name in sorted(report.monitor_clocks):
            clocks = " ".join(str(c) for c in report.monitor_clocks[name])
            print(f"{name}: {report.counts[name]} pulses [{clocks}]", file=out)
    for h in report.hazards:
        print(f"hazard {h.kind} at {h.cell} t={h.at}ps", file=out)
    for port, t in report.stray:
        print(f"stray {port} t={t}ps", file=out)
    status = "clean" if report.clean else "HAZARDS"
    print(f"{status} latency={report.latency}ps", file=out)
    if args.vcd:
        Path(args.vcd).write_text(harness.report_vcd(report))
    return 0


def _cases(args, setup):
    instrs = parse_instructions(args.instr)
    pairs = parse_operands(args.operands, setup.bits)
    return instrs, pairs


def cmd_verify(args, out) -> int:
    setup = Setup(args)
    instrs, pairs = _cases(args, setup)
    cases = [(c, a, b) for _, c in instrs for a, b in pairs]
    tb = setup.testbed()
    rep = harness.verify_against_oracle(
        tb, cases, mode=_mode(args.mode), period=args.period, workers=args.workers
    )
    per = len(pairs)
    for k, (name, _) in enumerate(instrs):
        chunk = rep.results[k * per:(k + 1) * per]
        diffs = sum(r.expected != r.got for r in chunk)
        unclean = sum(not r.clean for r in chunk)
        verdict = "ok" if not diffs and not unclean else "FAIL"
        print(f"{name} {verdict} cases={len(chunk)} diffs={diffs} unclean={unclean}", file=out)
    for r in rep.diffs[: args.show]:
        program, slot = divmod(r.index, 3)
        print(
            f"diff case={r.index} ctrl={r.control.hex()} a={r.a} b={r.b} "
            f"expected={r.expected} got={r.got} program={program} slot={slot}",
            file=out,
        )
    if args.csv:
        Path(args.csv).write_text(rep.to_csv())
    if args.vcd:
        first = (rep.diffs or rep.unclean or rep.results)[0].index if rep.results else None
        if first is not None:
            start = first - first % 3
            program = harness.TestProgram(cases[start:start + 3], mode=_mode(args.mode), alu_period=args.period, load="direct")
            if program.mode == harness.HIGH_SPEED:
                program.hf_period = args.period
            report = harness.run_program(tb, program, check=False)
            Path(args.vcd).write_text(harness.report_vcd(report))
    if args.strict and not rep.ok:
        return 1
    return 0


def cmd_sweep(args, out) -> int:
    setup = Setup(args)
    instrs, pairs = _cases(args, setup)
    cases = [(c, a, b) for _, c in instrs for a, b in pairs]
    probes: list = []
    try:
        t_min = harness.sweep_min_period(
            setup.testbed(), cases, args.lo, args.hi, mode=_mode(args.mode), probes=probes, workers=args.workers
        )
    except harness.NotAttainable as exc:
        print(f"T_min not attainable: {exc}", file=out)
        code = 1
    else:
        print(f"T_min={t_min}ps", file=out)
        code = 0
    if args.csv:
        Path(args.csv).write_text(harness.sweep_csv(probes))
    return code


def cmd_vectors(args, out) -> int:
    bits = args.bits or 8
    controls = [c for _, c in parse_instructions(args.instr)]
    lines = iter_vectors(controls, bits)
    if args.out:
        with open(args.out, "w") as fh:
            fh.writelines(lines)
    else:
        out.writelines(lines)
    return 0


def cmd_jj_report(args, out) -> int:
    setup = Setup(args)
    costs = CostTable.load(args.costs or setup.costs_path)
    target = setup.testbed() if args.testbed else setup.alu()
    for kind, count in sorted(target.kinds().items()):
        if kind not in costs:
            raise MissingCostError(f"no JJ cost for cell kind {kind!r}")
        print(f"{kind:<20} {count:>5} x {costs[kind]:>4} = {count * costs[kind]:>7}", file=out)
    print(f"total {jj_count(target, costs)} JJ", file=out)
    return 0


def cmd_validate(args, out) -> int:
    setup = Setup(args)
    target = setup.testbed() if args.testbed else setup.alu()
    findings = validate(target)
    for f in findings:
        print(f, file=out)
    print(f"{len(findings)} findings", file=out)
    return 1 if findings else 0


# parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="delay/netlist configuration file")
    common.add_argument("--bits", type=int, help="operand width (default from config, 8)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="wavealu", description="Pulse-level simulator of a wave-pipelined SFQ ALU.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="run one test program")
    s.add_argument("--instr", help="mnemonic (add, sub-ab, A+B, ...) or control word in hex")
    s.add_argument("--a", type=lambda x: int(x, 0), default=0)
    s.add_argument("--b", type=lambda x: int(x, 0), default=0)
    s.add_argument("--frame", action="append", metavar="INSTR,A,B", help="up to three frames, repeatable")
    s.add_argument("--mode", choices=["low", "high", harness.LOW_SPEED, harness.HIGH_SPEED], default="low")
    s.add_argument("--period", type=int, default=harness.DEFAULT_PERIOD, help="alu_clk period, ps")
    s.add_argument("--hf-period", type=int, default=harness.HF_PERIOD_2_8GHZ, help="hf_clk period, ps")
    s.add_argument("--clocks", type=int, help="alu_clk pulses to apply")
    s.add_argument("--load", choices=["serial", "direct"], default="serial")
    s.add_argument("--monitors", action="store_true", help="print pulses seen at every output")
    s.add_argument("--vcd", help="write the trace here")
    s.add_argument("--hazards-fatal", action="store_true")
    s.set_defaults(func=cmd_simulate)

    def case_args(sp):
        sp.add_argument("--instr", default="all", help="all, or comma-separated mnemonics / hex words")
        sp.add_argument("--operands", default="pairs:29,141;13,72;63,240", help="all | pairs:A,B[;A,B...] | file:PATH")
        sp.add_argument("--mode", choices=["low", "high", harness.LOW_SPEED, harness.HIGH_SPEED], default="low")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--csv", help="write the result table here")

    v = sub.add_parser("verify", parents=[common], help="compare the simulation with the golden model")
    case_args(v)
    v.add_argument("--period", type=int, default=harness.DEFAULT_PERIOD)
    v.add_argument("--strict", action="store_true", help="exit 1 on any diff or hazard")
    v.add_argument("--show", type=int, default=20, help="diff lines to print")
    v.add_argument("--vcd", help="write the trace of the first failing (or first) program")
    v.set_defaults(func=cmd_verify)

    w = sub.add_parser("sweep", parents=[common], help="search the minimum clean clock period")
    case_args(w)
    w.add_argument("--lo", type=int, default=0, help="known-bad period, not run")
    w.add_argument("--hi", type=int, default=1000)
    w.set_defaults(func=cmd_sweep)

    t = sub.add_parser("vectors", parents=[common], help="emit golden-model test vectors")
    t.add_argument("--instr", default="all")
    t.add_argument("--out", help="file to write instead of stdout")
    t.set_defaults(func=cmd_vectors)

    j = sub.add_parser("jj-report", parents=[common], help="Josephson junction count")
    j.add_argument("--costs", help="cost table (default from config)")
    j.add_argument("--testbed", action="store_true", help="count the whole test chip, not just the ALU")
    j.set_defaults(func=cmd_jj_report)

    c = sub.add_parser("validate", parents=[common], help="structural checks of the netlist")
    c.add_argument("--testbed", action="store_true", help="check the whole test chip")
    c.set_defaults(func=cmd_validate)
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args, out)
    except (ConfigError, UsageError, MissingCostError, harness.ProgramError, harness.HazardError) as exc:
        msg = exc.args[0] if isinstance(exc, MissingCostError) else str(exc)
        print(f"wavealu: error: {msg}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"wavealu: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
