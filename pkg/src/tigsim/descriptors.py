"""Traffic descriptor type and its bit-exact two-word binary encoding.

One descriptor packs a single traffic action into two 32-bit words:

    word0   bit 0        last        final descriptor of the program
            bits 5:1     kind code   1=DELAY 2=READ 3=WRITE 4=READ_FIX 5=WRITE_FIX
            bit 6        irq         raise the IRQ status flag on completion
            bits 12:7    reps - 1    repetitions, 1..64
            bits 25:13   size - 1    bytes per execution, 1..8192
            bits 31:26   reserved    must be zero
    word1   target address, or the delay cycle count for DELAY

READ/WRITE advance the target address by ``size_bytes`` after every
repetition (streaming); READ_FIX/WRITE_FIX re-access a fixed address
(hammering).  DELAY pauses injection for ``delay_cycles`` per repetition;
its address and size are meaningless and are stored canonically (0 and 1)
so that encode/decode round-trips exactly on every valid descriptor.

Binary descriptor images are little-endian ``(word0, word1)`` pairs
concatenated in program order; see descriptor-format.md.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

WORD_MASK = 0xFFFFFFFF
SIZE_MIN, SIZE_MAX = 1, 8192
REPS_MIN, REPS_MAX = 1, 64
DELAY_MIN, DELAY_MAX = 1, 2**32 - 1

_KIND_SHIFT = 1
_KIND_MASK = 0x1F
_IRQ_BIT = 1 << 6
_REPS_SHIFT = 7
_REPS_MASK = 0x3F
_SIZE_SHIFT = 13
_SIZE_MASK = 0x1FFF
_RESERVED_SHIFT = 26


class Kind(IntEnum):
    """Descriptor action; the enum value is the wire code in word0."""

    DELAY = 1
    READ = 2
    WRITE = 3
    READ_FIX = 4
    WRITE_FIX = 5

    @property
    def is_access(self) -> bool:
        return self is not Kind.DELAY

    @property
    def is_fixed(self) -> bool:
        return self in (Kind.READ_FIX, Kind.WRITE_FIX)

    @property
    def bus_kind(self) -> str:
        """'read' or 'write' as seen by the interconnect."""
        if self in (Kind.READ, Kind.READ_FIX):
            return "read"
        if self in (Kind.WRITE, Kind.WRITE_FIX):
            return "write"
        raise ValueError("DELAY descriptors do not touch the bus")


class DescriptorError(ValueError):
    """Base class for descriptor encode/decode failures."""


class InvalidDescriptor(DescriptorError):
    """encode() input violates a field range."""


class InvalidKindCode(DescriptorError):
    """word0 carries kind code 0 or a code above 5."""


class ReservedBitsSet(DescriptorError):
    """word0 has non-zero reserved bits (31:26)."""


@dataclass(frozen=True)
class Descriptor:
    """One decoded traffic action."""

    kind: Kind
    address: int = 0
    size_bytes: int = 4
    reps: int = 1
    last: bool = False
    irq_on_done: bool = False
    delay_cycles: int | None = None

    def __post_init__(self):
        # Canonical storage keeps encode a bijection on valid descriptors:
        # DELAY carries no address/size, the other kinds carry no delay.
        if self.kind is Kind.DELAY:
            object.__setattr__(self, "address", 0)
            object.__setattr__(self, "size_bytes", 1)
        else:
            object.__setattr__(self, "delay_cycles", None)

    @classmethod
    def delay(cls, cycles: int, reps: int = 1, last: bool = False,
              irq_on_done: bool = False) -> "Descriptor":
        return cls(Kind.DELAY, reps=reps, last=last, irq_on_done=irq_on_done,
                   delay_cycles=cycles)


@dataclass(frozen=True)
class DescriptorWords:
    """The packed two-word form of a descriptor."""

    word0: int
    word1: int


def validate(d: Descriptor) -> list[str]:
    """Return the list of invariant violations (empty when valid)."""
    problems = []
    if not isinstance(d.kind, Kind):
        problems.append(f"unknown kind: {d.kind!r}")
        return problems
    if not SIZE_MIN <= d.size_bytes <= SIZE_MAX:
        problems.append(f"size out of range: {d.size_bytes}")
    if not REPS_MIN <= d.reps <= REPS_MAX:
        problems.append(f"reps out of range: {d.reps}")
    if not 0 <= d.address <= WORD_MASK:
        problems.append(f"address out of range: {d.address:#x}")
    if d.kind is Kind.DELAY:
        if d.delay_cycles is None or not DELAY_MIN <= d.delay_cycles <= DELAY_MAX:
            problems.append(f"delay out of range: {d.delay_cycles}")
    return problems


def encode(d: Descriptor) -> DescriptorWords:
    """Pack a valid descriptor; raises InvalidDescriptor otherwise."""
    problems = validate(d)
    if problems:
        raise InvalidDescriptor("; ".join(problems))
    word0 = (
        int(d.last)
        | (d.kind.value << _KIND_SHIFT)
        | (_IRQ_BIT if d.irq_on_done else 0)
        | ((d.reps - 1) << _REPS_SHIFT)
        | ((d.size_bytes - 1) << _SIZE_SHIFT)
    )
    word1 = d.delay_cycles if d.kind is Kind.DELAY else d.address
    return DescriptorWords(word0, word1)


def decode(w: DescriptorWords) -> Descriptor:
    """Unpack a word pair; the inverse of encode() on its image.

    Reserved bits are checked before the kind code, so a malformed pair
    raises exactly one of ReservedBitsSet / InvalidKindCode.
    """
    word0, word1 = w.word0 & WORD_MASK, w.word1 & WORD_MASK
    if word0 >> _RESERVED_SHIFT:
        raise ReservedBitsSet(f"reserved bits set in word0: {word0:#010x}")
    code = (word0 >> _KIND_SHIFT) & _KIND_MASK
    if not Kind.DELAY.value <= code <= Kind.WRITE_FIX.value:
        raise InvalidKindCode(f"kind code {code}")
    kind = Kind(code)
    reps = ((word0 >> _REPS_SHIFT) & _REPS_MASK) + 1
    size = ((word0 >> _SIZE_SHIFT) & _SIZE_MASK) + 1
    last = bool(word0 & 1)
    irq = bool(word0 & _IRQ_BIT)
    if kind is Kind.DELAY:
        return Descriptor(kind, reps=reps, last=last, irq_on_done=irq,
                          delay_cycles=word1)
    return Descriptor(kind, address=word1, size_bytes=size, reps=reps,
                      last=last, irq_on_done=irq)


def encode_image(descriptors: list[Descriptor]) -> bytes:
    """Little-endian (word0, word1) pairs in program order."""
    words = []
    for d in descriptors:
        w = encode(d)
        words.extend((w.word0, w.word1))
    return struct.pack("<%dI" % len(words), *words)


def decode_image(data: bytes) -> list[Descriptor]:
    if len(data) % 8:
        raise DescriptorError(f"image length {len(data)} is not a multiple of 8")
    out = []
    for off in range(0, len(data), 8):
        w0, w1 = struct.unpack_from("<II", data, off)
        out.append(decode(DescriptorWords(w0, w1)))
    return out
