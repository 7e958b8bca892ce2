"""Packed binary codes over {+1, -1} and their exact Hamming kernels.

Bit layout
----------
Symbol i of a length-L code lives at bit (i % 64) of word (i // 64), LSB
first.  Bit value 1 means symbol +1, bit value 0 means symbol -1.  Bits at
positions >= L in the last word are always zero (canonical padding), which
makes equality, distance, and the on-disk format well defined.

File format
-----------
``write_codes`` emits: magic ``HMX1``, the code length as u32 little-endian,
the record count as u64 little-endian, then per record ceil(L/64) u64
little-endian words.  The in-memory layout above makes this a straight dump.

Binarization follows sgn(0) = +1 so that encoding is deterministic.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "BinaryCode",
    "Codebook",
    "from_signs",
    "from_bits",
    "flip_bits",
    "hamming_distance",
    "inner_product",
    "distance_from_inner_product",
    "correction_radius",
    "codebook_min_distance",
    "nearest_codeword",
    "pack_sign_rows",
    "word_matrix",
    "codes_from_word_rows",
    "packed_hamming_matrix",
    "write_codes",
    "read_codes",
]

_WORD_BITS = 64
_MAGIC = b"HMX1"

# Per-byte popcount table; drives the vectorized distance kernel.
_POPCOUNT8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint16)


def _word_count(length: int) -> int:
    return (length + _WORD_BITS - 1) // _WORD_BITS


@dataclass(frozen=True)
class BinaryCode:
    """An immutable length-L code packed into 64-bit words."""

    length: int
    words: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ValueError("code length must be >= 1")
        expected = _word_count(self.length)
        if len(self.words) != expected:
            raise ValueError(
                f"length {self.length} needs {expected} words, got {len(self.words)}"
            )
        for w in self.words:
            if not 0 <= w < (1 << _WORD_BITS):
                raise ValueError("words must be unsigned 64-bit values")
        pad_bits = expected * _WORD_BITS - self.length
        if pad_bits and (self.words[-1] >> (_WORD_BITS - pad_bits)):
            raise ValueError("padding bits beyond the code length must be zero")

    def bit(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise IndexError(f"bit index {i} out of range for length {self.length}")
        return (self.words[i // _WORD_BITS] >> (i % _WORD_BITS)) & 1

    def bits(self) -> np.ndarray:
        """The code as a 0/1 vector (1 where the symbol is +1)."""
        return np.array([self.bit(i) for i in range(self.length)], dtype=np.uint8)

    def signs(self) -> np.ndarray:
        """The code as a +1/-1 vector."""
        return self.bits().astype(np.int8) * 2 - 1


def pack_sign_rows(values: np.ndarray) -> np.ndarray:
    """Pack an (n, L) real matrix into (n, ceil(L/64)) uint64 sign words.

    Entry >= 0 maps to bit 1 (+1), entry < 0 to bit 0 (-1).  This is the
    single packing routine in the package; the scalar ``from_signs`` wraps it.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] < 1:
        raise ValueError("expected a nonempty 2-d matrix of sign values")
    if not np.all(np.isfinite(values)):
        raise ValueError("sign values must all be finite")
    n, length = values.shape
    bits = (values >= 0.0).astype(np.uint8)
    packed = np.packbits(bits, axis=1, bitorder="little")
    byte_width = _word_count(length) * 8
    if packed.shape[1] < byte_width:
        pad = np.zeros((n, byte_width - packed.shape[1]), dtype=np.uint8)
        packed = np.concatenate([packed, pad], axis=1)
    return np.ascontiguousarray(packed).view(np.uint64)


def from_signs(values: Sequence[float] | np.ndarray) -> BinaryCode:
    """Binarize a real vector: symbol +1 where the entry is >= 0, else -1."""
    row = np.asarray(values, dtype=np.float64).reshape(1, -1)
    words = pack_sign_rows(row)[0]
    return BinaryCode(length=row.shape[1], words=tuple(int(w) for w in words))


def from_bits(bits: Sequence[int] | np.ndarray) -> BinaryCode:
    """Build a code from 0/1 values (1 meaning symbol +1)."""
    arr = np.asarray(bits)
    signs = np.where(arr != 0, 1.0, -1.0)
    return from_signs(signs)


def flip_bits(code: BinaryCode, positions: Sequence[int]) -> BinaryCode:
    """Copy of ``code`` with the symbols at ``positions`` inverted."""
    words = list(code.words)
    for p in positions:
        if not 0 <= p < code.length:
            raise IndexError(f"bit position {p} out of range")
        words[p // _WORD_BITS] ^= 1 << (p % _WORD_BITS)
    return BinaryCode(length=code.length, words=tuple(words))


def _check_same_length(a: BinaryCode, b: BinaryCode) -> None:
    if a.length != b.length:
        raise ValueError(f"code lengths differ: {a.length} vs {b.length}")


def hamming_distance(a: BinaryCode, b: BinaryCode) -> int:
    """Number of differing symbols, via per-word XOR popcount."""
    _check_same_length(a, b)
    return sum((wa ^ wb).bit_count() for wa, wb in zip(a.words, b.words))


def inner_product(a: BinaryCode, b: BinaryCode) -> int:
    """Dot product over +-1 symbols: agreements minus disagreements."""
    return a.length - 2 * hamming_distance(a, b)


def distance_from_inner_product(length: int, value: int) -> int:
    """Hamming distance implied by a +-1 inner product: (L - value) / 2."""
    if abs(value) > length:
        raise ValueError(f"|inner product| cannot exceed the length {length}")
    if (length - value) % 2 != 0:
        raise ValueError(
            f"inner product {value} has wrong parity for length {length}"
        )
    return (length - value) // 2


def correction_radius(min_distance: int) -> int:
    """Bit errors guaranteed recoverable by nearest-codeword decoding."""
    if min_distance < 1:
        raise ValueError("min_distance must be >= 1")
    return (min_distance - 1) // 2


@dataclass(frozen=True)
class Codebook:
    """An ordered list of equal-length codes, optionally labeled by class."""

    codes: tuple[BinaryCode, ...]
    class_ids: tuple[int, ...] | None = None

    def __init__(
        self,
        codes: Sequence[BinaryCode],
        class_ids: Sequence[int] | None = None,
    ):
        codes = tuple(codes)
        if not codes:
            raise ValueError("a codebook needs at least one code")
        length = codes[0].length
        for c in codes:
            if c.length != length:
                raise ValueError("all codes in a codebook must share one length")
        ids = tuple(int(i) for i in class_ids) if class_ids is not None else None
        if ids is not None and len(ids) != len(codes):
            raise ValueError("class_ids must match the number of codes")
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "class_ids", ids)

    def __len__(self) -> int:
        return len(self.codes)

    @property
    def length(self) -> int:
        return self.codes[0].length

    def word_matrix(self) -> np.ndarray:
        """All codes stacked as an (n, words) uint64 matrix."""
        return word_matrix(self.codes)


def word_matrix(codes: Sequence[BinaryCode]) -> np.ndarray:
    return np.array([c.words for c in codes], dtype=np.uint64)


def codes_from_word_rows(words: np.ndarray, length: int) -> list[BinaryCode]:
    """Wrap the rows of a packed word matrix as BinaryCode objects."""
    return [
        BinaryCode(length=length, words=tuple(int(w) for w in row)) for row in words
    ]


def packed_hamming_matrix(a_words: np.ndarray, b_words: np.ndarray) -> np.ndarray:
    """All-pairs Hamming distances between two packed word matrices.

    Args:
        a_words: (n, W) uint64.
        b_words: (m, W) uint64 with the same W.

    Returns:
        (n, m) int64 distance matrix.
    """
    if a_words.shape[1] != b_words.shape[1]:
        raise ValueError("word widths differ")
    a8 = np.ascontiguousarray(a_words).view(np.uint8).reshape(a_words.shape[0], -1)
    b8 = np.ascontiguousarray(b_words).view(np.uint8).reshape(b_words.shape[0], -1)
    xor = a8[:, None, :] ^ b8[None, :, :]
    return _POPCOUNT8[xor].sum(axis=2, dtype=np.int64)


def codebook_min_distance(book: Codebook) -> int:
    """Minimum pairwise distance over distinct positions; 0 on duplicates."""
    if len(book) < 2:
        raise ValueError("minimum distance needs at least two codes")
    words = book.word_matrix()
    dist = packed_hamming_matrix(words, words)
    iu = np.triu_indices(len(book), k=1)
    return int(dist[iu].min())


def nearest_codeword(book: Codebook, query: BinaryCode) -> tuple[int, int]:
    """Index and distance of the closest code; ties go to the lowest index."""
    if query.length != book.length:
        raise ValueError(
            f"query length {query.length} does not match codebook length "
            f"{book.length}"
        )
    best_index = 0
    best_dist = hamming_distance(book.codes[0], query)
    for i, code in enumerate(book.codes[1:], start=1):
        d = hamming_distance(code, query)
        if d < best_dist:
            best_index, best_dist = i, d
    return best_index, best_dist


def write_codes(path, codes: Sequence[BinaryCode]) -> None:
    """Write codes in the HMX1 container (see module docstring)."""
    codes = list(codes)
    if not codes:
        raise ValueError("refusing to write an empty code file")
    length = codes[0].length
    for c in codes:
        if c.length != length:
            raise ValueError("all codes in one file must share one length")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", length))
        fh.write(struct.pack("<Q", len(codes)))
        for c in codes:
            for w in c.words:
                fh.write(struct.pack("<Q", w))


def read_codes(path) -> list[BinaryCode]:
    """Read an HMX1 code file back into BinaryCode objects."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"not a code file: bad magic {magic!r}")
        (length,) = struct.unpack("<I", fh.read(4))
        (count,) = struct.unpack("<Q", fh.read(8))
        if length < 1:
            raise ValueError("code file declares zero-length codes")
        words_per = _word_count(length)
        out = []
        for _ in range(count):
            raw = fh.read(8 * words_per)
            if len(raw) != 8 * words_per:
                raise ValueError("code file truncated")
            words = struct.unpack(f"<{words_per}Q", raw)
            out.append(BinaryCode(length=length, words=words))
        if fh.read(1):
            raise ValueError("trailing bytes after the last record")
    return out
