"""Instruction-to-program pipeline: decompose, retrieve, generate, correct."""
from .decompose import Decomposition, decompose
from .generators import (
    GenerationRequest,
    ReplayGenerator,
    RemoteGenerator,
    TemplateGenerator,
    render_prompt,
)
from .loop import GenerationAttempt, self_correct_loop
from .retrieval import (
    Chunk,
    ChunkKind,
    HashedBowEmbedder,
    RetrievalConfig,
    SearchIndex,
    bm25_search,
    chunk_corpus,
    dense_search,
    fuse_rerank,
    hybrid_search,
    load_index,
    save_index,
    tokenize,
)

__all__ = [
    "Chunk",
    "ChunkKind",
    "Decomposition",
    "GenerationAttempt",
    "GenerationRequest",
    "HashedBowEmbedder",
    "RemoteGenerator",
    "ReplayGenerator",
    "RetrievalConfig",
    "SearchIndex",
    "TemplateGenerator",
    "bm25_search",
    "chunk_corpus",
    "decompose",
    "dense_search",
    "fuse_rerank",
    "hybrid_search",
    "load_index",
    "render_prompt",
    "save_index",
    "self_correct_loop",
    "tokenize",
]
