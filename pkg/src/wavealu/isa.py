"""Bit-exact functional model of the wave-pipelined ALU.

Every instruction is a 6-line control word.  The datapath is a row of
half adders (XOR/AND of the possibly inverted operands), a per-slice
instruction switch that selects which of the two feeds the second row,
and a ripple carry chain seeded by the ``plus1`` line::

    a' = a ^ (inv_a ? ~0 : 0)          b' = b ^ (inv_b ? ~0 : 0)
    p  = a' ^ b'                       g  = a' & b'
    d  = (xor_en & p) | (and_en & g)
    c0 = plus1,  c[i+1] = (carry_en & g[i]) | (d[i] & c[i])
    s  = d ^ c

The pulse-level simulator is checked against :func:`evaluate`.
"""

from __future__ import annotations


import re
from enum import Enum
from typing import Iterator, NamedTuple


class ControlWord(NamedTuple):
    plus1: int = 0
    xor_en: int = 0
    and_en: int = 0
    carry_en: int = 0
    inv_a: int = 0
    inv_b: int = 0

    def pack(self) -> int:
        """Pack as ``plus1<<5 | xor<<4 | and<<3 | carry<<2 | invA<<1 | invB``."""
        value = 0
        for bit in self:
            value = (value << 1) | (bit & 1)
        return value

    @classmethod
    def unpack(cls, value: int) -> "ControlWord":
        if not 0 <= value < 64:
            raise ValueError(f"control word out of range: {value:#x}")
        return cls(*((value >> (5 - i)) & 1 for i in range(6)))

    def hex(self) -> str:
        return f"{self.pack():02x}"


class Mnemonic(Enum):
    ZERO = "zero"
    XOR = "xor"
    NXOR = "nxor"
    AND = "and"
    NAND = "nand"
    OR = "or"
    NOR = "nor"
    ADD = "add"
    SUB_AB = "sub-ab"
    SUB_BA = "sub-ba"
    NOT_A = "not-a"
    NOT_B = "not-b"
    EQ = "eq"
    INC_A = "inc-a"

    @classmethod
    def parse(cls, name: str) -> "Mnemonic":
        key = name.strip().lower().replace("_", "-")
        key = SPELLINGS.get(re.sub(r"\s+", "", key), key)
        for m in cls:
            if m.value == key or m.name.lower().replace("_", "-") == key:
                return m
        raise ValueError(f"unknown mnemonic: {name!r}")


# Instruction table spellings, whitespace removed and lower-cased.
SPELLINGS = {
    "0": "zero",
    "a+b": "add",
    "a-b": "sub-ab",
    "b-a": "sub-ba",
    "a=b": "eq",
    "inca": "inc-a",
    "a+1": "inc-a",
    "not(a)": "not-a",
    "nota": "not-a",
    "not(b)": "not-b",
    "notb": "not-b",
}

# Rows of the instruction table in table order: +1, XOR, AND, CARRY, Inv.A, Inv.B
TABLE: dict[Mnemonic, ControlWord] = {
    Mnemonic.ZERO: ControlWord(0, 0, 0, 0, 0, 0),
    Mnemonic.XOR: ControlWord(0, 1, 0, 0, 0, 0),
    Mnemonic.NXOR: ControlWord(0, 1, 0, 0, 1, 0),
    Mnemonic.AND: ControlWord(0, 0, 1, 0, 0, 0),
    Mnemonic.NAND: ControlWord(0, 1, 1, 0, 1, 1),
    Mnemonic.OR: ControlWord(0, 1, 1, 0, 0, 0),
    Mnemonic.NOR: ControlWord(0, 0, 1, 0, 1, 1),
    Mnemonic.ADD: ControlWord(0, 1, 0, 1, 0, 0),
    Mnemonic.SUB_AB: ControlWord(1, 1, 0, 1, 0, 1),
    Mnemonic.SUB_BA: ControlWord(1, 1, 0, 1, 1, 0),
    Mnemonic.NOT_A: ControlWord(0, 1, 0, 0, 1, 0),
    Mnemonic.NOT_B: ControlWord(0, 1, 0, 0, 0, 1),
    Mnemonic.EQ: ControlWord(1, 1, 0, 0, 0, 1),
    Mnemonic.INC_A: ControlWord(1, 1, 0, 0, 0, 0),
}


class AluResult(NamedTuple):
    sum: int
    carry_out: int


def encode(m: Mnemonic) -> ControlWord:
    return TABLE[m]


def decode(c: ControlWord) -> list[Mnemonic]:
    """All mnemonics whose table row equals ``c`` (NXOR and NOT_A alias)."""
    return [m for m, row in TABLE.items() if row == tuple(c)]


def aliases() -> list[tuple[Mnemonic, Mnemonic]]:
    """Pairs of distinct table rows that share a control word."""
    rows = list(TABLE.items())
    return [
        (m1, m2)
        for i, (m1, c1) in enumerate(rows)
        for m2, c2 in rows[i + 1:]
        if c1 == c2
    ]


def evaluate(c: ControlWord, a: int, b: int, n_bits: int = 8) -> AluResult:
    mask = (1 << n_bits) - 1
    a &= mask
    b &= mask
    if c.inv_a:
        a ^= mask
    if c.inv_b:
        b ^= mask
    p = a ^ b
    g = a & b
    d = (p if c.xor_en else 0) | (g if c.and_en else 0)
    gen = g if c.carry_en else 0
    carry = c.plus1 & 1
    s = 0
    for i in range(n_bits):
        di = (d >> i) & 1
        s |= (di ^ carry) << i
        carry = ((gen >> i) & 1) | (di & carry)
    return AluResult(s, carry)


def evaluate_mnemonic(m: Mnemonic, a: int, b: int = 0, n_bits: int = 8) -> AluResult:
    """Evaluate a named instruction.

    NOT_A and INC_A assume ``b == 0``, NOT_B assumes ``a == 0``; like the
    hardware, nothing enforces this and other operands give the formula
    result.
    """
    return evaluate(TABLE[m], a, b, n_bits)


def exhaustive_table(c: ControlWord, n_bits: int = 8) -> list[AluResult]:
    """``evaluate(c, a, b)`` for every operand pair, row-major in ``a``."""
    size = 1 << n_bits
    return [evaluate(c, a, b, n_bits) for a in range(size) for b in range(size)]


def iter_vectors(controls, n_bits: int = 8) -> Iterator[str]:
    """Test-vector lines ``A B CTRL SUM COUT`` in lowercase hex."""
    size = 1 << n_bits
    for c in controls:
        ctrl = c.hex()
        for a in range(size):
            for b in range(size):
                r = evaluate(c, a, b, n_bits)
                yield f"{a:x} {b:x} {ctrl} {r.sum:x} {r.carry_out:x}\n"
