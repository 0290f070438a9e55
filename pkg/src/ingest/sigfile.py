"""Binary signature file (``.sig``), format version 1.0.

All integers and reals are little-endian.

    header   4s   magic b"SIGM"
             u16  version (major << 8 | minor), currently 0x0100
             u32  m, patch count
             u32  n, feature dimension
             u32  d, attribute dimension
             u16  flags: bit 0 derived attribute values present,
                         bit 1 CRC-32 trailer present
    payload  f32 x n*m  feature matrix, column-major (patch 1's n features first)
             u8 x ceil(m/8)  occlusion bits, LSB-first (bit j of byte j//8 = o_j)
             f32 x d    attribute logits
             [bit 0]  f32 x d probabilities, u8 x ceil(d/8) binary flags LSB-first
    metadata u16 length + UTF-8 bytes, for subject_id, image_id, scheme_name
    trailer  [bit 1] u32 CRC-32 of every preceding byte

Probabilities and flags are always recomputed from the logits on load; stored
ones are only cross-checked (1e-6). Readers accept any minor version of the
same major version.

In-memory float64 values are rounded to float32 on write and widened back on
read, so a signature that was read from a file re-encodes to the same bytes.
"""

from __future__ import annotations

import logging
import os
import struct
import zlib
from typing import Optional, Union

import numpy as np

from src.errors import (
    BadMagicError,
    ChecksumMismatchError,
    DerivedValueMismatchError,
    SignatureFormatError,
    SignatureValidationError,
    TrailingDataError,
    TruncatedFileError,
    UnsupportedVersionError,
)
from src.ingest.atomic import write_bytes_atomic
from src.schemas.signature import PatchLayout, Signature
from src.signature.assembler import assemble_signature, make_patch_component, validate
from src.signature.attributes import binarize, sigmoid

logger = logging.getLogger(__name__)

MAGIC = b"SIGM"
FORMAT_MAJOR = 1
FORMAT_MINOR = 0
FORMAT_VERSION = (FORMAT_MAJOR << 8) | FORMAT_MINOR

FLAG_DERIVED = 1 << 0
FLAG_CRC = 1 << 1
KNOWN_FLAGS = FLAG_DERIVED | FLAG_CRC

HEADER = struct.Struct("<4sHIIIH")
U16 = struct.Struct("<H")
U32 = struct.Struct("<I")
DERIVED_TOLERANCE = 1e-6

PathLike = Union[str, os.PathLike]


def _packed_len(bits: int) -> int:
    return (bits + 7) // 8


def encode_signature(sig: Signature, include_derived: bool = True) -> bytes:
    violations = validate(sig)
    if violations:
        raise SignatureValidationError(violations, context=f"signature {sig.image_id!r}")
    layout = sig.layout
    d = sig.attributes.dim
    flags = FLAG_CRC | (FLAG_DERIVED if include_derived else 0)

    with np.errstate(over="ignore"):
        features = np.asarray(sig.patch.features, dtype="<f4")
        logits = np.asarray(sig.attributes.logits, dtype="<f4")
    if not (np.all(np.isfinite(features)) and np.all(np.isfinite(logits))):
        raise SignatureFormatError(
            f"signature {sig.image_id!r}: values overflow 32-bit floats"
        )

    parts = [
        HEADER.pack(MAGIC, FORMAT_VERSION, layout.patch_count, layout.feature_dim, d, flags),
        features.tobytes(order="F"),
        np.packbits(np.asarray(sig.patch.occlusion, dtype=np.uint8), bitorder="little").tobytes(),
        logits.tobytes(),
    ]
    if include_derived:
        # derived from the stored logits so a reader recomputes the same values
        p = sigmoid(logits)
        parts.append(np.asarray(p, dtype="<f4").tobytes())
        parts.append(np.packbits(binarize(p), bitorder="little").tobytes())
    for text in (sig.subject_id, sig.image_id, layout.scheme_name):
        raw = text.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise SignatureFormatError(f"metadata field longer than 65535 bytes: {text[:32]!r}...")
        parts.append(U16.pack(len(raw)) + raw)

    body = b"".join(parts)
    return body + U32.pack(zlib.crc32(body))


class _Cursor:
    def __init__(self, data: bytes, end: int, source: Optional[str]):
        self.data = data
        self.pos = 0
        self.end = end
        self.source = source

    def take(self, size: int, what: str) -> bytes:
        if self.pos + size > self.end:
            raise TruncatedFileError(
                f"truncated while reading {what}: need {size} bytes at offset {self.pos}, "
                f"{self.end - self.pos} left",
                self.source,
            )
        chunk = self.data[self.pos:self.pos + size]
        self.pos += size
        return chunk


def decode_signature(data: bytes, source: Optional[str] = None) -> Signature:
    if len(data) < HEADER.size:
        raise TruncatedFileError(f"file shorter than the {HEADER.size}-byte header", source)
    magic, version, m, n, d, flags = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagicError(
            f"bad magic {magic!r}; expected {MAGIC!r} (signature format v{FORMAT_MAJOR}.x)", source
        )
    if version >> 8 != FORMAT_MAJOR:
        raise UnsupportedVersionError(
            f"format version {version >> 8}.{version & 0xFF} unsupported; reader handles "
            f"{FORMAT_MAJOR}.x",
            source,
        )
    if flags & ~KNOWN_FLAGS:
        raise SignatureFormatError(f"unknown flag bits 0x{flags & ~KNOWN_FLAGS:04x}", source)
    if m < 1 or n < 1 or d < 1:
        raise SignatureFormatError(f"invalid dimensions m={m} n={n} d={d}", source)

    has_derived = bool(flags & FLAG_DERIVED)
    fixed = 4 * n * m + _packed_len(m) + 4 * d
    if has_derived:
        fixed += 4 * d + _packed_len(d)
    trailer = U32.size if flags & FLAG_CRC else 0
    minimum = HEADER.size + fixed + 3 * U16.size + trailer
    if len(data) < minimum:
        raise TruncatedFileError(f"file has {len(data)} bytes, header implies at least {minimum}", source)

    end = len(data) - trailer
    if trailer:
        (stored,) = U32.unpack_from(data, end)
        actual = zlib.crc32(data[:end])
        if stored != actual:
            raise ChecksumMismatchError(f"CRC-32 mismatch: stored 0x{stored:08x}, computed 0x{actual:08x}", source)

    cur = _Cursor(data, end, source)
    cur.take(HEADER.size, "header")
    features = np.frombuffer(cur.take(4 * n * m, "features"), dtype="<f4").reshape((n, m), order="F")
    occ_bytes = np.frombuffer(cur.take(_packed_len(m), "occlusion bits"), dtype=np.uint8)
    occlusion = np.unpackbits(occ_bytes, count=m, bitorder="little")
    logits = np.frombuffer(cur.take(4 * d, "logits"), dtype="<f4")

    if has_derived:
        stored_p = np.frombuffer(cur.take(4 * d, "probabilities"), dtype="<f4").astype(np.float64)
        stored_b = np.unpackbits(
            np.frombuffer(cur.take(_packed_len(d), "binary flags"), dtype=np.uint8), count=d, bitorder="little"
        )
        if np.all(np.isfinite(logits)):
            p = sigmoid(logits)
            if not np.all(np.abs(stored_p - p) <= DERIVED_TOLERANCE):
                raise DerivedValueMismatchError(
                    f"stored probabilities disagree with sigmoid(logits) beyond {DERIVED_TOLERANCE:g}", source
                )
            if not np.array_equal(stored_b, binarize(p)):
                raise DerivedValueMismatchError("stored binary flags disagree with probabilities > 0.5", source)

    meta = []
    for what in ("subject_id", "image_id", "scheme_name"):
        (length,) = U16.unpack(cur.take(U16.size, f"{what} length"))
        try:
            meta.append(cur.take(length, what).decode("utf-8"))
        except UnicodeDecodeError as err:
            raise SignatureFormatError(f"{what} is not valid UTF-8: {err}", source) from err
    if cur.pos != end:
        raise TrailingDataError(f"{end - cur.pos} unexpected bytes after metadata", source)

    subject_id, image_id, scheme_name = meta
    layout = PatchLayout(patch_count=m, feature_dim=n, scheme_name=scheme_name)
    patch = make_patch_component(layout, features, occlusion)
    return assemble_signature(subject_id, image_id, patch, logits)


def write_signature(path: PathLike, sig: Signature, include_derived: bool = True) -> None:
    """Write atomically: a temp file in the target directory is renamed into place."""
    write_bytes_atomic(path, encode_signature(sig, include_derived=include_derived))


def read_signature(path: PathLike) -> Signature:
    with open(path, "rb") as f:
        data = f.read()
    logger.debug("read %s (%d bytes)", path, len(data))
    return decode_signature(data, source=str(path))
