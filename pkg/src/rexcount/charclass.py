"""Character classes over the 256-symbol byte alphabet.

A class is a set of byte values, stored as a 256-bit membership mask so
that union/intersection/complement are single integer operations.
"""

from __future__ import annotations

from dataclasses import dataclass

ALPHABET_SIZE = 256
_FULL_MASK = (1 << ALPHABET_SIZE) - 1


@dataclass(frozen=True)
class CharClass:
    """An immutable predicate over bytes 0..255."""

    bits: int

    def __post_init__(self) -> None:
        if not 0 <= self.bits <= _FULL_MASK:
            raise ValueError("membership mask out of range")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def none() -> "CharClass":
        return CharClass(0)

    @staticmethod
    def universal() -> "CharClass":
        """The class matching every byte (the dot of the dialect)."""
        return CharClass(_FULL_MASK)

    @staticmethod
    def singleton(byte: int) -> "CharClass":
        if not 0 <= byte < ALPHABET_SIZE:
            raise ValueError(f"byte out of range: {byte}")
        return CharClass(1 << byte)

    @staticmethod
    def from_bytes(values) -> "CharClass":
        bits = 0
        for b in values:
            if isinstance(b, (bytes, bytearray, str)):
                raise TypeError("expected an iterable of ints")
            if not 0 <= b < ALPHABET_SIZE:
                raise ValueError(f"byte out of range: {b}")
            bits |= 1 << b
        return CharClass(bits)

    @staticmethod
    def from_ranges(*ranges: tuple[int, int]) -> "CharClass":
        """Build from inclusive (lo, hi) byte ranges."""
        bits = 0
        for lo, hi in ranges:
            if not (0 <= lo <= hi < ALPHABET_SIZE):
                raise ValueError(f"bad range {lo}-{hi}")
            bits |= ((1 << (hi - lo + 1)) - 1) << lo
        return CharClass(bits)

    # -- algebra -----------------------------------------------------------

    def union(self, other: "CharClass") -> "CharClass":
        return CharClass(self.bits | other.bits)

    def intersect(self, other: "CharClass") -> "CharClass":
        return CharClass(self.bits & other.bits)

    def complement(self) -> "CharClass":
        return CharClass(self.bits ^ _FULL_MASK)

    __or__ = union
    __and__ = intersect
    __invert__ = complement

    # -- queries -----------------------------------------------------------

    def contains(self, byte: int) -> bool:
        return bool((self.bits >> byte) & 1)

    __contains__ = contains

    def is_empty(self) -> bool:
        return self.bits == 0

    def is_universal(self) -> bool:
        return self.bits == _FULL_MASK

    def size(self) -> int:
        return self.bits.bit_count()

    def min_byte(self) -> int:
        """Smallest member; used for deterministic witness symbols."""
        if self.bits == 0:
            raise ValueError("empty class has no members")
        return (self.bits & -self.bits).bit_length() - 1

    def members(self) -> list[int]:
        return [b for b in range(ALPHABET_SIZE) if (self.bits >> b) & 1]

    def ranges(self) -> list[tuple[int, int]]:
        """Members compressed to inclusive ranges, ascending."""
        out: list[tuple[int, int]] = []
        b = 0
        bits = self.bits
        while bits:
            if bits & 1:
                lo = b
                while bits & 1:
                    bits >>= 1
                    b += 1
                out.append((lo, b - 1))
            else:
                bits >>= 1
                b += 1
        return out

    # -- serialization -----------------------------------------------------

    def to_hex(self) -> str:
        """Fixed-width hex encoding of the 256 membership bits."""
        return f"{self.bits:064x}"

    @staticmethod
    def from_hex(text: str) -> "CharClass":
        if len(text) != 64:
            raise ValueError("class hex encoding must be 64 characters")
        return CharClass(int(text, 16))

    def __repr__(self) -> str:
        if self.is_universal():
            return "CharClass(.)"
        if self.size() <= 4:
            shown = ",".join(f"0x{b:02x}" for b in self.members())
            return f"CharClass({{{shown}}})"
        return f"CharClass(<{self.size()} bytes>)"


DOT = CharClass.universal()


def cls(text: str) -> CharClass:
    """Class of the UTF-8 bytes of ``text``; convenience for tests/demos."""
    return CharClass.from_bytes(text.encode("utf-8"))
