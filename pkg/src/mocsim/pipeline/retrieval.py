"""Corpus chunking, sparse and dense retrieval, and rank fusion.

Documentation files are chunked by markdown heading and then by a sliding
character window; code samples stay whole.  Sparse retrieval is BM25.
Dense retrieval hashes tokens into a fixed-width signed bag-of-words
embedding, which is cheap, deterministic, and has no model download.  The
two rankings are fused with reciprocal rank fusion, passed through a
reranker port (identity by default), and truncated to the top k.

Indexes persist to one binary file: magic, version, three length-prefixed
JSON sections (header, chunk table, postings), then the raw float32
embedding matrix.
"""
from __future__ import annotations

import hashlib
import json
import re
import struct
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from ..errors import BothEmpty, EmptyIndex, IoFailure, SchemaError

_TOKEN_RE = re.compile(r"[0-9a-z]+")
_HEADING_RE = re.compile(r"^#{1,6}\s", re.MULTILINE)

DOC_CHUNK_CHARS = 1200
DOC_CHUNK_OVERLAP = 100

_MAGIC = b"MCIX"
_VERSION = 1


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric runs; punctuation and underscores split."""
    return _TOKEN_RE.findall(text.casefold())


class ChunkKind(Enum):
    DOC = "Doc"
    CODE_SAMPLE = "CodeSample"


@dataclass(frozen=True)
class Chunk:
    id: str
    kind: ChunkKind
    source: str
    text: str

    @property
    def tokens(self) -> list[str]:
        return tokenize(self.text)


def _windows(text: str) -> list[str]:
    """Sliding character windows with fixed overlap; short text stays whole."""
    if len(text) <= DOC_CHUNK_CHARS:
        return [text]
    step = DOC_CHUNK_CHARS - DOC_CHUNK_OVERLAP
    out = []
    start = 0
    while start < len(text):
        out.append(text[start:start + DOC_CHUNK_CHARS])
        if start + DOC_CHUNK_CHARS >= len(text):
            break
        start += step
    return out


def _split_sections(text: str) -> list[str]:
    """Split on markdown headings, keeping each heading with its body."""
    marks = [m.start() for m in _HEADING_RE.finditer(text)]
    if not marks:
        return [text] if text.strip() else []
    sections = []
    if text[:marks[0]].strip():
        sections.append(text[:marks[0]])
    for a, b in zip(marks, marks[1:] + [len(text)]):
        sections.append(text[a:b])
    return sections


def _read(path: Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"cannot read corpus file {path}: {e}") from e


def chunk_corpus(doc_paths, sample_paths) -> list[Chunk]:
    """Chunk documentation and code sample files.

    Chunk ids are ``doc:<name>#<ordinal>`` and ``code:<name>#0``; stable as
    long as file names are.  Docs split by heading, then each section is
    windowed; samples are one chunk per file.
    """
    chunks: list[Chunk] = []
    for path in doc_paths:
        path = Path(path)
        text = _read(path)
        ordinal = 0
        for section in _split_sections(text):
            for piece in _windows(section):
                if not piece.strip():
                    continue
                chunks.append(Chunk(id=f"doc:{path.name}#{ordinal}",
                                    kind=ChunkKind.DOC, source=str(path),
                                    text=piece))
                ordinal += 1
    for path in sample_paths:
        path = Path(path)
        text = _read(path)
        if not text.strip():
            continue
        chunks.append(Chunk(id=f"code:{path.name}#0", kind=ChunkKind.CODE_SAMPLE,
                            source=str(path), text=text))
    return chunks


@dataclass(frozen=True)
class RetrievalConfig:
    top_k: int = 6
    bm25_k1: float = 1.2
    bm25_b: float = 0.75
    rrf_k: float = 60.0
    embedding_dim: int = 256
    embedder_id: str = "hashed-bow-256"
    reranker_id: str = "identity"


class HashedBowEmbedder:
    """Signed hashed bag-of-words embedding, L2-normalized.

    Each token is md5-hashed; the first four digest bytes pick the slot and
    the fifth picks the sign.  Identical texts embed identically, and token
    sets with no slots in common are orthogonal.
    """

    def __init__(self, dim: int = 256):
        self.dim = dim
        self.id = f"hashed-bow-{dim}"

    def embed(self, texts) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float32)
        for row, text in enumerate(texts):
            vec = out[row]
            for token in tokenize(text):
                digest = hashlib.md5(token.encode("utf-8")).digest()
                slot = int.from_bytes(digest[:4], "little") % self.dim
                vec[slot] += 1.0 if digest[4] & 1 else -1.0
            norm = float(np.linalg.norm(vec))
            if norm > 0.0:
                vec /= norm
        return out


class SearchIndex:
    """Chunks plus BM25 statistics and the dense embedding matrix."""

    def __init__(self, chunks: list[Chunk], config: RetrievalConfig,
                 postings: dict[str, list[tuple[int, int]]],
                 doc_lengths: list[int], embeddings: np.ndarray):
        self.chunks = list(chunks)
        self.config = config
        self.postings = postings
        self.doc_lengths = list(doc_lengths)
        self.avg_doc_length = (sum(doc_lengths) / len(doc_lengths)) if doc_lengths else 0.0
        self.embeddings = embeddings

    @classmethod
    def build(cls, chunks, config: RetrievalConfig | None = None,
              embedder: HashedBowEmbedder | None = None) -> "SearchIndex":
        config = config or RetrievalConfig()
        embedder = embedder or HashedBowEmbedder(config.embedding_dim)
        config = replace(config, embedder_id=embedder.id,
                         embedding_dim=embedder.dim)
        chunks = list(chunks)
        postings: dict[str, list[tuple[int, int]]] = {}
        doc_lengths = []
        for idx, chunk in enumerate(chunks):
            tokens = chunk.tokens
            doc_lengths.append(len(tokens))
            counts: dict[str, int] = {}
            for tok in tokens:
                counts[tok] = counts.get(tok, 0) + 1
            for tok, tf in counts.items():
                postings.setdefault(tok, []).append((idx, tf))
        embeddings = embedder.embed([c.text for c in chunks]) if chunks else \
            np.zeros((0, embedder.dim), dtype=np.float32)
        return cls(chunks, config, postings, doc_lengths, embeddings)

    def __len__(self) -> int:
        return len(self.chunks)


def bm25_search(index: SearchIndex, query: str, k: int | None = None
                ) -> list[tuple[Chunk, float]]:
    """BM25 ranking; only chunks sharing at least one query term score.

    Uses ``idf = ln((N - df + 0.5) / (df + 0.5) + 1)``.  Ties break on
    chunk id, ascending.
    """
    if not index.chunks:
        raise EmptyIndex("the search index holds no chunks")
    cfg = index.config
    n_docs = len(index.chunks)
    scores: dict[int, float] = {}
    for term in tokenize(query):
        plist = index.postings.get(term)
        if not plist:
            continue
        df = len(plist)
        idf = np.log((n_docs - df + 0.5) / (df + 0.5) + 1.0)
        for idx, tf in plist:
            denom = tf + cfg.bm25_k1 * (1.0 - cfg.bm25_b + cfg.bm25_b
                                        * index.doc_lengths[idx] / index.avg_doc_length)
            scores[idx] = scores.get(idx, 0.0) + idf * tf * (cfg.bm25_k1 + 1.0) / denom
    ranked = sorted(((index.chunks[i], float(s)) for i, s in scores.items() if s > 0.0),
                    key=lambda cs: (-cs[1], cs[0].id))
    return ranked if k is None else ranked[:k]


def dense_search(index: SearchIndex, query: str, k: int | None = None,
                 embedder: HashedBowEmbedder | None = None
                 ) -> list[tuple[Chunk, float]]:
    """Cosine ranking over the hashed embeddings.  Ties break on chunk id."""
    if not index.chunks:
        raise EmptyIndex("the search index holds no chunks")
    embedder = embedder or HashedBowEmbedder(index.config.embedding_dim)
    qv = embedder.embed([query])[0]
    if not np.any(qv):
        return []
    sims = index.embeddings @ qv
    ranked = sorted(((index.chunks[i], float(sims[i])) for i in range(len(sims))),
                    key=lambda cs: (-cs[1], cs[0].id))
    return ranked if k is None else ranked[:k]


def fuse_rerank(sparse, dense, config: RetrievalConfig | None = None,
                reranker=None) -> list[Chunk]:
    """Reciprocal rank fusion of two scored lists, then rerank and truncate.

    Each chunk scores the sum of ``1 / (rrf_k + rank)`` over the lists it
    appears in (ranks are 1-based).  The reranker port receives the fused
    list and must return a permutation of it; the default keeps the order.
    """
    config = config or RetrievalConfig()
    sparse = list(sparse)
    dense = list(dense)
    if not sparse and not dense:
        raise BothEmpty("both retrievers returned nothing")
    scores: dict[str, float] = {}
    by_id: dict[str, Chunk] = {}
    for ranking in (sparse, dense):
        for rank, (chunk, _score) in enumerate(ranking, 1):
            by_id[chunk.id] = chunk
            scores[chunk.id] = scores.get(chunk.id, 0.0) + 1.0 / (config.rrf_k + rank)
    fused = [by_id[cid] for cid, _ in
             sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))]
    if reranker is not None:
        fused = list(reranker(fused))
    return fused[:config.top_k]


def hybrid_search(index: SearchIndex, query: str,
                  config: RetrievalConfig | None = None,
                  reranker=None) -> list[Chunk]:
    """Full retrieval: BM25 and dense rankings fused, reranked, truncated."""
    config = config or index.config
    sparse = bm25_search(index, query)
    dense = dense_search(index, query)
    if not sparse and not dense:
        return []
    return fuse_rerank(sparse, dense, config, reranker)


def _pack_json(obj) -> bytes:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return struct.pack("<I", len(blob)) + blob


def save_index(index: SearchIndex, path) -> None:
    """Serialize to the single-file binary format described above."""
    cfg = index.config
    header = {
        "version": _VERSION,
        "config": {
            "top_k": cfg.top_k, "bm25_k1": cfg.bm25_k1, "bm25_b": cfg.bm25_b,
            "rrf_k": cfg.rrf_k, "embedding_dim": cfg.embedding_dim,
            "embedder_id": cfg.embedder_id, "reranker_id": cfg.reranker_id,
        },
        "n_chunks": len(index.chunks),
        "doc_lengths": index.doc_lengths,
    }
    chunk_table = [{"id": c.id, "kind": c.kind.value, "source": c.source,
                    "text": c.text} for c in index.chunks]
    postings = {term: [[idx, tf] for idx, tf in plist]
                for term, plist in index.postings.items()}
    emb = np.ascontiguousarray(index.embeddings, dtype="<f4").tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<I", _VERSION))
            fh.write(_pack_json(header))
            fh.write(_pack_json(chunk_table))
            fh.write(_pack_json(postings))
            fh.write(struct.pack("<Q", len(emb)))
            fh.write(emb)
    except OSError as e:
        raise IoFailure(f"cannot write index to {path}: {e}") from e


def _read_json(fh, what: str):
    raw = fh.read(4)
    if len(raw) != 4:
        raise SchemaError(f"index file truncated reading {what}")
    (length,) = struct.unpack("<I", raw)
    blob = fh.read(length)
    if len(blob) != length:
        raise SchemaError(f"index file truncated reading {what}")
    try:
        return json.loads(blob)
    except json.JSONDecodeError as e:
        raise SchemaError(f"index file has malformed {what}: {e}") from e


def load_index(path) -> SearchIndex:
    """Load an index written by :func:`save_index`; checks magic and version."""
    try:
        fh = open(path, "rb")
    except OSError as e:
        raise IoFailure(f"cannot open index {path}: {e}") from e
    with fh:
        if fh.read(4) != _MAGIC:
            raise SchemaError(f"{path} is not an index file")
        raw = fh.read(4)
        if len(raw) != 4 or struct.unpack("<I", raw)[0] != _VERSION:
            raise SchemaError(f"{path} has an unsupported index version")
        header = _read_json(fh, "header")
        chunk_table = _read_json(fh, "chunk table")
        postings_raw = _read_json(fh, "postings")
        raw = fh.read(8)
        if len(raw) != 8:
            raise SchemaError("index file truncated reading embeddings")
        (emb_len,) = struct.unpack("<Q", raw)
        emb_bytes = fh.read(emb_len)
        if len(emb_bytes) != emb_len:
            raise SchemaError("index file truncated reading embeddings")
    try:
        cfg = RetrievalConfig(**header["config"])
        chunks = [Chunk(id=c["id"], kind=ChunkKind(c["kind"]),
                        source=c["source"], text=c["text"]) for c in chunk_table]
        doc_lengths = header["doc_lengths"]
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"index file has malformed header: {e}") from e
    postings = {term: [(int(i), int(tf)) for i, tf in plist]
                for term, plist in postings_raw.items()}
    emb = np.frombuffer(emb_bytes, dtype="<f4").reshape(
        len(chunks), cfg.embedding_dim).astype(np.float32)
    return SearchIndex(chunks, cfg, postings, doc_lengths, emb)
