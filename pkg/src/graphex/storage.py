"""Versioned binary serialization for models.

Layout (all integers little-endian):

* header: magic ``GEX1``, u32 format version, six u64 section offsets
  (meta, vocabulary, string table, keyphrase table, leaf graphs, body
  end).
* body: the five sections, written back to back in that order.
* footer: u32 CRC-32 of the body bytes.

Strings are u32-length-prefixed UTF-8.  Numeric arrays are written as raw
little-endian buffers so they can be rebuilt with ``np.frombuffer``
without per-element work.  Serialization is deterministic: the same model
always produces the same bytes.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .curation import ScoreOrientation
from .graph import FORMAT_VERSION, LeafGraph, Model
from .vocab import Vocabulary

MAGIC = b"GEX1"
_HEADER = struct.Struct("<4sI6Q")
_U32 = struct.Struct("<I")
_U8 = struct.Struct("<B")
_U64 = struct.Struct("<Q")
_I64 = struct.Struct("<q")


class ModelFormatError(Exception):
    """Base error for unreadable model files."""


class NotAModelFileError(ModelFormatError):
    pass


class UnsupportedVersionError(ModelFormatError):
    pass


class TruncatedModelError(ModelFormatError):
    pass


class ChecksumError(ModelFormatError):
    pass


def _check_u32(value: int, what: str) -> int:
    if value >= 1 << 32:
        raise ValueError(f"{what} too large for format version {FORMAT_VERSION}: {value}")
    return value


class _Writer:
    def __init__(self) -> None:
        self.buf = bytearray()

    def u8(self, value: int) -> None:
        self.buf += _U8.pack(value)

    def u32(self, value: int) -> None:
        self.buf += _U32.pack(_check_u32(value, "u32 field"))

    def u64(self, value: int) -> None:
        self.buf += _U64.pack(value)

    def i64(self, value: int) -> None:
        self.buf += _I64.pack(value)

    def string(self, text: str) -> None:
        raw = text.encode("utf-8")
        self.u32(len(raw))
        self.buf += raw

    def array(self, arr: np.ndarray, dtype: str) -> None:
        self.buf += np.ascontiguousarray(arr, dtype=dtype).tobytes()


class _Reader:
    def __init__(self, data: bytes, pos: int) -> None:
        self.data = data
        self.pos = pos

    def _take(self, n: int) -> int:
        start = self.pos
        if start + n > len(self.data):
            raise TruncatedModelError(
                f"file ends at byte {len(self.data)}, needed {start + n}"
            )
        self.pos = start + n
        return start

    def u8(self) -> int:
        return self.data[self._take(1)]

    def u32(self) -> int:
        return _U32.unpack_from(self.data, self._take(4))[0]

    def u64(self) -> int:
        return _U64.unpack_from(self.data, self._take(8))[0]

    def i64(self) -> int:
        return _I64.unpack_from(self.data, self._take(8))[0]

    def string(self) -> str:
        length = self.u32()
        start = self._take(length)
        return self.data[start:start + length].decode("utf-8")

    def array(self, count: int, dtype: str) -> np.ndarray:
        itemsize = np.dtype(dtype).itemsize
        start = self._take(count * itemsize)
        return np.frombuffer(self.data, dtype=dtype, count=count, offset=start)


def _meta_section(model: Model) -> bytes:
    w = _Writer()
    w.string(model.meta_category)
    w.u8(int(model.orientation.search_higher_better))
    w.u8(int(model.orientation.recall_lower_better))
    w.u64(model.num_keyphrases)
    w.u32(len(model.leaf_graphs))
    return bytes(w.buf)

def _vocab_section(model: Model) -> bytes:
    w = _Writer()
    surfaces = model.vocabulary.surfaces()
    w.u32(len(surfaces))
    for surface in surfaces:
        w.string(surface)
    return bytes(w.buf)

def _strings_section(model: Model) -> bytes:
    w = _Writer()
    w.u32(len(model.kp_texts))
    for text in model.kp_texts:
        w.string(text)
    return bytes(w.buf)

def _keyphrase_section(model: Model) -> bytes:
    w = _Writer()
    n = model.num_keyphrases
    w.u32(n)
    w.u64(len(model.kp_token_ids))
    w.array(model.kp_text_ref, "<u4")
    w.array(model.kp_token_offsets, "<i8")
    w.array(model.kp_token_ids, "<u4")
    w.array(model.kp_search, "<f8")
    w.array(model.kp_recall, "<f8")
    return bytes(w.buf)

def _leaf_block(graph: LeafGraph) -> bytes:
    w = _Writer()
    w.i64(graph.leaf_category)
    w.u32(graph.kp_base)
    w.u32(graph.num_keyphrases)
    w.u32(_check_u32(graph.num_tokens, "leaf token count"))
    w.u64(graph.num_edges)
    w.array(graph.token_rows, "<u4")
    w.array(graph.offsets, "<i8")
    w.array(graph.edges, "<u4")
    return bytes(w.buf)

def _leaves_section(model: Model) -> bytes:
    w = _Writer()
    w.u32(len(model.leaf_graphs))
    for leaf_id in sorted(model.leaf_graphs):
        w.buf += _leaf_block(model.leaf_graphs[leaf_id])
    return bytes(w.buf)


def leaf_block_nbytes(graph: LeafGraph) -> int:
    """Serialized size of one leaf graph block, in bytes."""
    rows = graph.num_tokens
    return 8 + 4 + 4 + 4 + 8 + 4 * rows + 8 * (rows + 1) + 4 * graph.num_edges


def to_bytes(model: Model) -> bytes:
    """Serialize ``model`` to the binary format (deterministic)."""
    _check_u32(model.num_keyphrases, "keyphrase count")
    _check_u32(len(model.vocabulary), "vocabulary size")
    sections = [
        _meta_section(model),
        _vocab_section(model),
        _strings_section(model),
        _keyphrase_section(model),
        _leaves_section(model),
    ]
    offsets = []
    pos = _HEADER.size
    for section in sections:
        offsets.append(pos)
        pos += len(section)
    offsets.append(pos)  # body end == checksum offset
    body = b"".join(sections)
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, *offsets)
    return header + body + _U32.pack(zlib.crc32(body))


def save(model: Model, path: str) -> int:
    """Write ``model`` to ``path``; returns the number of bytes written."""
    data = to_bytes(model)
    with open(path, "wb") as handle:
        handle.write(data)
    return len(data)


def from_bytes(data: bytes) -> Model:
    """Parse a serialized model, validating magic, version, and checksum."""
    if len(data) < 4 or data[:4] != MAGIC:
        raise NotAModelFileError("missing GEX1 magic; not a model file")
    if len(data) < 8:
        raise TruncatedModelError("file too short to hold a version field")
    version = _U32.unpack_from(data, 4)[0]
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"format version {version} not supported (expected {FORMAT_VERSION})"
        )
    if len(data) < _HEADER.size:
        raise TruncatedModelError("file too short to hold a model header")
    _, _, *offsets = _HEADER.unpack_from(data, 0)
    body_end = offsets[5]
    if offsets[0] != _HEADER.size or any(a > b for a, b in zip(offsets, offsets[1:])):
        raise TruncatedModelError("section offsets out of order")
    if body_end + 4 > len(data):
        raise TruncatedModelError(
            f"file ends at byte {len(data)}, needed {body_end + 4}"
        )
    stored_crc = _U32.unpack_from(data, body_end)[0]
    actual_crc = zlib.crc32(data[_HEADER.size:body_end])
    if stored_crc != actual_crc:
        raise ChecksumError(
            f"body checksum mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}"
        )

    meta = _Reader(data, offsets[0])
    meta_category = meta.string()
    orientation = ScoreOrientation(
        search_higher_better=bool(meta.u8()),
        recall_lower_better=bool(meta.u8()),
    )
    num_keyphrases = meta.u64()
    num_leaves = meta.u32()

    vocab_reader = _Reader(data, offsets[1])
    vocabulary = Vocabulary.from_surfaces(
        vocab_reader.string() for _ in range(vocab_reader.u32())
    )

    strings_reader = _Reader(data, offsets[2])
    kp_texts = [strings_reader.string() for _ in range(strings_reader.u32())]

    kp = _Reader(data, offsets[3])
    n = kp.u32()
    if n != num_keyphrases:
        raise TruncatedModelError(
            f"keyphrase table holds {n} entries, meta section says {num_keyphrases}"
        )
    total_token_ids = kp.u64()
    kp_text_ref = kp.array(n, "<u4")
    kp_token_offsets = kp.array(n + 1, "<i8")
    kp_token_ids = kp.array(total_token_ids, "<u4")
    kp_search = kp.array(n, "<f8")
    kp_recall = kp.array(n, "<f8")

    leaves_reader = _Reader(data, offsets[4])
    leaf_count = leaves_reader.u32()
    if leaf_count != num_leaves:
        raise TruncatedModelError(
            f"leaf section holds {leaf_count} graphs, meta section says {num_leaves}"
        )
    leaf_graphs: dict[int, LeafGraph] = {}
    for _ in range(leaf_count):
        leaf_id = leaves_reader.i64()
        kp_base = leaves_reader.u32()
        num_kp = leaves_reader.u32()
        rows = leaves_reader.u32()
        edges = leaves_reader.u64()
        token_rows = leaves_reader.array(rows, "<u4")
        row_offsets = leaves_reader.array(rows + 1, "<i8")
        edge_ids = leaves_reader.array(edges, "<u4")
        leaf_graphs[leaf_id] = LeafGraph(
            leaf_category=leaf_id,
            token_rows=token_rows,
            offsets=row_offsets,
            edges=edge_ids,
            kp_base=kp_base,
            num_keyphrases=num_kp,
        )

    return Model(
        meta_category=meta_category,
        orientation=orientation,
        vocabulary=vocabulary,
        kp_texts=kp_texts,
        kp_text_ref=kp_text_ref,
        kp_token_offsets=kp_token_offsets,
        kp_token_ids=kp_token_ids,
        kp_search=kp_search,
        kp_recall=kp_recall,
        leaf_graphs=leaf_graphs,
        version=version,
    )


def load(path: str) -> Model:
    """Read a model from ``path``; see :func:`from_bytes` for validation."""
    with open(path, "rb") as handle:
        data = handle.read()
    return from_bytes(data)
