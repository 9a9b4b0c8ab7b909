"""
Bit-level primitives, the database model and bit accounting.

Bit strings are stored as a Python integer plus an explicit length. Bit 1 of a
string is its leftmost (most significant) bit, blocks are contiguous runs in
index order, and byte padding only ever happens at file or wire boundaries.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path
from random import Random
from typing import Iterable, Iterator, Sequence

from .errors import FormatError, ParameterError

DB_MAGIC = b"PIRDB1"
_DB_HEADER = struct.Struct(">6sIQ")


@dataclass(frozen=True)
class BitString:
    """An immutable string of ``length`` bits held in the integer ``value``."""

    value: int
    length: int

    def __post_init__(self):
        if self.length < 0:
            raise ParameterError("bit length must be non-negative")
        if self.value < 0 or self.value >> self.length:
            raise ParameterError(f"value does not fit in {self.length} bits")

    @classmethod
    def zeros(cls, length: int) -> BitString:
        return cls(0, length)

    @classmethod
    def from_str(cls, bits: str) -> BitString:
        """Parse a string of '0'/'1' characters, e.g. ``BitString.from_str("1011")``."""
        if any(c not in "01" for c in bits):
            raise ParameterError(f"not a bit string: {bits!r}")
        return cls(int(bits, 2) if bits else 0, len(bits))

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> BitString:
        value, length = 0, 0
        for b in bits:
            if b not in (0, 1):
                raise ParameterError(f"not a bit: {b!r}")
            value = (value << 1) | b
            length += 1
        return cls(value, length)

    @classmethod
    def from_bytes(cls, data: bytes, length: int) -> BitString:
        """Unpack ``length`` bits stored MSB-first in ``data``; padding bits must be zero."""
        nbytes = (length + 7) // 8
        if len(data) != nbytes:
            raise FormatError(f"expected {nbytes} bytes for {length} bits, got {len(data)}")
        pad = nbytes * 8 - length
        raw = int.from_bytes(data, "big")
        if raw & ((1 << pad) - 1):
            raise FormatError("non-zero padding bits")
        return cls(raw >> pad, length)

    @classmethod
    def random(cls, length: int, rng: Random) -> BitString:
        return cls(rng.getrandbits(length) if length else 0, length)

    def to_bytes(self) -> bytes:
        """Pack MSB-first, zero-padded on the right to a byte boundary."""
        nbytes = (self.length + 7) // 8
        return (self.value << (nbytes * 8 - self.length)).to_bytes(nbytes, "big")

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, index: int) -> int:
        # 0-based, like any Python sequence
        if not -self.length <= index < self.length:
            raise IndexError(index)
        index %= self.length
        return (self.value >> (self.length - 1 - index)) & 1

    def __iter__(self) -> Iterator[int]:
        for i in range(self.length):
            yield (self.value >> (self.length - 1 - i)) & 1

    def __xor__(self, other: BitString) -> BitString:
        return xor(self, other)

    def __add__(self, other: BitString) -> BitString:
        return BitString((self.value << other.length) | other.value, self.length + other.length)

    def slice(self, start: int, length: int) -> BitString:
        """Return ``length`` bits beginning at 0-based offset ``start``."""
        if start < 0 or length < 0 or start + length > self.length:
            raise ParameterError(f"slice [{start}, {start + length}) out of range for length {self.length}")
        shift = self.length - start - length
        return BitString((self.value >> shift) & ((1 << length) - 1), length)

    def is_zero(self) -> bool:
        return self.value == 0

    def __str__(self) -> str:
        return format(self.value, f"0{self.length}b") if self.length else ""

    def __repr__(self) -> str:
        return f"BitString('{self}')"


EMPTY = BitString(0, 0)


def concat(parts: Iterable[BitString]) -> BitString:
    return reduce(BitString.__add__, parts, EMPTY)


def xor(a: BitString, b: BitString) -> BitString:
    """Bitwise exclusive-or of two equal-length strings."""
    if a.length != b.length:
        raise ParameterError(f"xor of lengths {a.length} and {b.length}")
    return BitString(a.value ^ b.value, a.length)


def xor_all(parts: Iterable[BitString], length: int) -> BitString:
    """XOR of any number of ``length``-bit strings (all-zero for none)."""
    acc = 0
    for p in parts:
        if p.length != length:
            raise ParameterError(f"xor of lengths {p.length} and {length}")
        acc ^= p.value
    return BitString(acc, length)


def split_into_blocks(x: BitString, m: int) -> list[BitString]:
    """Split ``x`` into ``m`` contiguous equal blocks, block 1 first."""
    if m < 1 or x.length % m:
        raise ParameterError(f"cannot split {x.length} bits into {m} blocks")
    size = x.length // m
    return [x.slice(b * size, size) for b in range(m)]


def symbol_width(modulus: int) -> int:
    """Bits per symbol: ceil(log2 modulus)."""
    if modulus < 1:
        raise ParameterError("modulus must be positive")
    return (modulus - 1).bit_length()


def pack_symbols(values: Sequence[int], modulus: int) -> BitString:
    """Encode each value of Z_modulus big-endian in ``symbol_width(modulus)`` bits."""
    width = symbol_width(modulus)
    acc = 0
    for v in values:
        if not 0 <= v < modulus:
            raise ParameterError(f"symbol {v} outside Z_{modulus}")
        acc = (acc << width) | v
    return BitString(acc, width * len(values))


def unpack_symbols(bits: BitString, modulus: int, count: int | None = None) -> list[int]:
    """Inverse of :func:`pack_symbols`."""
    width = symbol_width(modulus)
    if width == 0:
        if bits.length:
            raise ParameterError("non-empty payload for a one-symbol alphabet")
        return [0] * (count or 0)
    if bits.length % width:
        raise ParameterError(f"{bits.length} bits is not a whole number of {width}-bit symbols")
    n = bits.length // width
    if count is not None and n != count:
        raise ParameterError(f"expected {count} symbols, found {n}")
    mask = (1 << width) - 1
    values = [(bits.value >> (width * (n - 1 - i))) & mask for i in range(n)]
    for v in values:
        if v >= modulus:
            raise ParameterError(f"symbol {v} outside Z_{modulus}")
    return values


@dataclass(frozen=True)
class Database:
    """``k`` records of ``R`` bits each."""

    records: tuple[BitString, ...]

    def __post_init__(self):
        if not self.records:
            raise ParameterError("database needs at least one record")
        R = self.records[0].length
        if R < 1:
            raise ParameterError("record length must be at least 1 bit")
        if any(x.length != R for x in self.records):
            raise ParameterError("all records must have the same length")

    @classmethod
    def from_strings(cls, records: Iterable[str]) -> Database:
        return cls(tuple(BitString.from_str(s) for s in records))

    @classmethod
    def random(cls, k: int, R: int, rng: Random) -> Database:
        return cls(tuple(BitString.random(R, rng) for _ in range(k)))

    @classmethod
    def from_int(cls, value: int, k: int, R: int) -> Database:
        """Database whose concatenated records read as the ``k*R``-bit integer ``value``."""
        whole = BitString(value, k * R)
        return cls(tuple(split_into_blocks(whole, k)))

    @property
    def k(self) -> int:
        return len(self.records)

    @property
    def R(self) -> int:
        return self.records[0].length

    def record(self, ell: int) -> BitString:
        """Record ``ell`` (1-based)."""
        if not 1 <= ell <= self.k:
            raise ParameterError(f"record {ell} outside 1..{self.k}")
        return self.records[ell - 1]

    def as_bits(self) -> BitString:
        return concat(self.records)


def enumerate_databases(k: int, R: int) -> Iterator[Database]:
    """All 2^(kR) databases in increasing integer order."""
    for value in range(1 << (k * R)):
        yield Database.from_int(value, k, R)


def save_database(db: Database, path: str | Path) -> None:
    Path(path).write_bytes(dump_database(db))


def dump_database(db: Database) -> bytes:
    return _DB_HEADER.pack(DB_MAGIC, db.k, db.R) + db.as_bits().to_bytes()


def load_database(path: str | Path) -> Database:
    return parse_database(Path(path).read_bytes())


def parse_database(data: bytes) -> Database:
    if len(data) < _DB_HEADER.size:
        raise FormatError("truncated header")
    magic, k, R = _DB_HEADER.unpack_from(data)
    if magic != DB_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if k == 0 or R == 0:
        raise FormatError("k and R must be positive")
    payload = data[_DB_HEADER.size:]
    need = (k * R + 7) // 8
    if len(payload) < need:
        raise FormatError(f"truncated payload: need {need} bytes, have {len(payload)}")
    if len(payload) > need:
        raise FormatError(f"trailing bytes after payload: {len(payload) - need}")
    bits = BitString.from_bytes(payload, k * R)
    return Database(tuple(split_into_blocks(bits, k)))


@dataclass(frozen=True)
class ServerStorage:
    """What one server holds.

    ``layout`` maps (record, block) to (offset, length) inside ``payload``;
    replicated schemes use a single block 1 per record.
    """

    server_id: int
    payload: BitString
    layout: dict[tuple[int, int], tuple[int, int]] = field(hash=False, compare=False)

    def segment(self, record: int, block: int = 1) -> BitString:
        try:
            offset, length = self.layout[(record, block)]
        except KeyError:
            raise ParameterError(f"server {self.server_id} holds no block {block} of record {record}") from None
        return self.payload.slice(offset, length)

    @property
    def bits(self) -> int:
        return self.payload.length


@dataclass(frozen=True)
class TranscriptReport:
    """Exact per-server bit counts for one protocol run."""

    upload_bits_per_server: tuple[int, ...]
    download_bits_per_server: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.upload_bits_per_server)

    @property
    def total_upload(self) -> int:
        return sum(self.upload_bits_per_server)

    @property
    def total_download(self) -> int:
        return sum(self.download_bits_per_server)

    def to_dict(self) -> dict:
        return {
            "upload_bits_per_server": list(self.upload_bits_per_server),
            "download_bits_per_server": list(self.download_bits_per_server),
            "total_upload": self.total_upload,
            "total_download": self.total_download,
        }


STORAGE_MAGIC = b"PIRST1"
_STORAGE_HEADER = struct.Struct(">6sIQ")


def dump_storage(storage: ServerStorage) -> bytes:
    """Server file: magic "PIRST1", server id (u32), payload bit length (u64), packed payload."""
    header = _STORAGE_HEADER.pack(STORAGE_MAGIC, storage.server_id, storage.payload.length)
    return header + storage.payload.to_bytes()


def parse_storage(data: bytes, layout: dict[tuple[int, int], tuple[int, int]]) -> ServerStorage:
    if len(data) < _STORAGE_HEADER.size:
        raise FormatError("truncated header")
    magic, server_id, nbits = _STORAGE_HEADER.unpack_from(data)
    if magic != STORAGE_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    payload = data[_STORAGE_HEADER.size:]
    if len(payload) != (nbits + 7) // 8:
        raise FormatError(f"payload is {len(payload)} bytes, header declares {nbits} bits")
    bits = BitString.from_bytes(payload, nbits)
    end = max((off + ln for off, ln in layout.values()), default=0)
    if end != nbits:
        raise FormatError(f"payload holds {nbits} bits but the layout needs {end}")
    return ServerStorage(server_id, bits, layout)


def save_storage(storage: ServerStorage, path: str | Path) -> None:
    Path(path).write_bytes(dump_storage(storage))


def read_storage_header(path: str | Path) -> tuple[int, int]:
    """(server id, payload bits) without reading the payload."""
    with open(path, "rb") as fh:
        head = fh.read(_STORAGE_HEADER.size)
    if len(head) < _STORAGE_HEADER.size:
        raise FormatError("truncated header")
    magic, server_id, nbits = _STORAGE_HEADER.unpack(head)
    if magic != STORAGE_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    return server_id, nbits
