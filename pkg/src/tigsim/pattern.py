"""Traffic pattern DSL: parse, lower to descriptors, emit programming data.

Grammar (line oriented, ``#`` starts a comment, blank lines ignored):

    program := (stmt NEWLINE)*
    stmt    := access | delay
    access  := ("read"|"write"|"read_fix"|"write_fix") ADDR ["size=" INT] ["reps=" INT]
    delay   := "delay" INT

ADDR is 0x-prefixed hex or decimal.  ``size`` defaults to 4 bytes and
``reps`` to 1.  There are no loops or macros; repetition comes from the
``reps`` field and the injector LOOP control flag.

Output artifacts: a raw little-endian descriptor image, a hex listing
(one 8-digit lowercase word per line), and the configuration-port write
sequence that loads the program and enables the injector.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Union

from . import descriptors as dm
from .injector import (
    BUFFER_BASE,
    BUFFER_WORDS,
    CTRL_EN,
    CTRL_IRQ_EN,
    CTRL_LOOP,
    CTRL_OFFSET,
    CTRL_PIPE_EN,
    CapacityExceeded,
)


class PatternError(Exception):
    """Base class: every rejection carries the offending line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


class PatternSyntaxError(PatternError):
    pass


class PatternRangeError(PatternError):
    def __init__(self, line: int, field: str, message: str):
        super().__init__(line, message)
        self.field = field


@dataclass(frozen=True)
class Access:
    kind: dm.Kind
    address: int
    size_bytes: int = 4
    reps: int = 1
    line: int = 0


@dataclass(frozen=True)
class Delay:
    cycles: int
    line: int = 0


Stmt = Union[Access, Delay]


@dataclass(frozen=True)
class PatternProgram:
    statements: tuple[Stmt, ...]


_ACCESS_KINDS = {
    "read": dm.Kind.READ,
    "write": dm.Kind.WRITE,
    "read_fix": dm.Kind.READ_FIX,
    "write_fix": dm.Kind.WRITE_FIX,
}

CTRL_FLAG_BITS = {"loop": CTRL_LOOP, "irq": CTRL_IRQ_EN, "pipe": CTRL_PIPE_EN}


def _parse_int(token: str, line: int, what: str) -> int:
    try:
        if token.lower().startswith("0x"):
            return int(token, 16)
        if token.isdigit():
            return int(token, 10)
    except ValueError:
        pass
    raise PatternSyntaxError(line, f"expected {what}, got {token!r}")


def _check_range(value: int, lo: int, hi: int, field: str, line: int) -> int:
    if not lo <= value <= hi:
        raise PatternRangeError(line, field,
                                f"{field} out of range [{lo}, {hi}]: {value}")
    return value


def _parse_access(kind: dm.Kind, args: list[str], line: int) -> Access:
    if not args:
        raise PatternSyntaxError(line, "missing address")
    address = _check_range(_parse_int(args[0], line, "an address"),
                           0, dm.WORD_MASK, "address", line)
    size_bytes, reps = 4, 1
    rest = args[1:]
    if rest and rest[0].startswith("size="):
        size_bytes = _check_range(_parse_int(rest[0][5:], line, "a size"),
                                  dm.SIZE_MIN, dm.SIZE_MAX, "size", line)
        rest = rest[1:]
    if rest and rest[0].startswith("reps="):
        reps = _check_range(_parse_int(rest[0][5:], line, "a repetition count"),
                            dm.REPS_MIN, dm.REPS_MAX, "reps", line)
        rest = rest[1:]
    if rest:
        raise PatternSyntaxError(line, f"unexpected token {rest[0]!r}")
    return Access(kind, address, size_bytes, reps, line)


def _parse_delay(args: list[str], line: int) -> Delay:
    if not args:
        raise PatternSyntaxError(line, "missing cycle count")
    if len(args) > 1:
        raise PatternSyntaxError(line, f"unexpected token {args[1]!r}")
    cycles = _check_range(_parse_int(args[0], line, "a cycle count"),
                          dm.DELAY_MIN, dm.DELAY_MAX, "delay", line)
    return Delay(cycles, line)


def parse(text: str) -> PatternProgram:
    """Parse DSL source into a pattern program, preserving source order."""
    statements: list[Stmt] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        head, args = tokens[0], tokens[1:]
        if head in _ACCESS_KINDS:
            statements.append(_parse_access(_ACCESS_KINDS[head], args, lineno))
        elif head == "delay":
            statements.append(_parse_delay(args, lineno))
        else:
            raise PatternSyntaxError(lineno, f"unknown statement {head!r}")
    if not statements:
        raise PatternSyntaxError(1, "empty pattern: no statements")
    return PatternProgram(tuple(statements))


def lower(program: PatternProgram) -> list[dm.Descriptor]:
    """One descriptor per statement; only the final one has last=True."""
    out = []
    final = len(program.statements) - 1
    for i, stmt in enumerate(program.statements):
        last = i == final
        if isinstance(stmt, Access):
            out.append(dm.Descriptor(stmt.kind, address=stmt.address,
                                     size_bytes=stmt.size_bytes,
                                     reps=stmt.reps, last=last))
        else:
            out.append(dm.Descriptor.delay(stmt.cycles, last=last))
    return out


def compile_text(text: str) -> list[dm.Descriptor]:
    return lower(parse(text))


def compile_file(path) -> list[dm.Descriptor]:
    with open(path, "r", encoding="utf-8") as fh:
        return compile_text(fh.read())


# ---------------------------------------------------------------------------
# Programming sequence and output renderers
# ---------------------------------------------------------------------------

class ApbWrite(NamedTuple):
    offset: int
    value: int


def ctrl_value(flags=()) -> int:
    """CTRL word for the given flag names; EN is always set."""
    value = CTRL_EN
    for flag in flags:
        try:
            value |= CTRL_FLAG_BITS[flag]
        except KeyError:
            raise ValueError(f"unknown control flag {flag!r}; "
                             f"expected one of {sorted(CTRL_FLAG_BITS)}") from None
    return value


def emit_apb_sequence(descriptors: list[dm.Descriptor], flags=()) -> list[ApbWrite]:
    """Buffer writes in program order, then the single CTRL enable write."""
    words_needed = 2 * len(descriptors)
    if words_needed > BUFFER_WORDS:
        raise CapacityExceeded(
            f"{len(descriptors)} descriptors need {words_needed} words; "
            f"buffer holds {BUFFER_WORDS}")
    seq = []
    for i, d in enumerate(descriptors):
        w = dm.encode(d)
        seq.append(ApbWrite(BUFFER_BASE + 8 * i, w.word0))
        seq.append(ApbWrite(BUFFER_BASE + 8 * i + 4, w.word1))
    seq.append(ApbWrite(CTRL_OFFSET, ctrl_value(flags)))
    return seq


def render_hex(descriptors: list[dm.Descriptor]) -> str:
    lines = []
    for d in descriptors:
        w = dm.encode(d)
        lines.append(f"{w.word0:08x}")
        lines.append(f"{w.word1:08x}")
    return "\n".join(lines) + "\n"


def render_image(descriptors: list[dm.Descriptor]) -> bytes:
    return dm.encode_image(descriptors)


def render_apb_csv(sequence: list[ApbWrite]) -> str:
    lines = ["offset,value"]
    lines.extend(f"{w.offset:#x},{w.value:#010x}" for w in sequence)
    return "\n".join(lines) + "\n"


def parse_apb_csv(text: str) -> list[ApbWrite]:
    """Inverse of render_apb_csv; tolerates a missing header row."""
    seq = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line == "offset,value":
            continue
        offset_s, value_s = line.split(",")
        seq.append(ApbWrite(int(offset_s, 0), int(value_s, 0)))
    return seq
