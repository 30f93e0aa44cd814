"""Embedding acquisition: file-backed store, HTTP endpoint, token pooling.

Hosting the embedding model is out of scope; vectors arrive either from a
store file or from an HTTP service. Two store layouts round-trip:

  JSONL   one object per line: {"text": ..., "dim": D, "vector": [...]}
  binary  magic "EMB1", u32le record count, then per record:
          u32le text byte length, UTF-8 text, u32le dim, dim float32le

Token matrices are mean-pooled into a single vector per string.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import IO, Protocol, Sequence

import numpy as np

from .errors import ConsistencyError, DomainError, ParseError, ProtocolError, TransportError

MAGIC = b"EMB1"


def mean_pool(token_matrix: Sequence[Sequence[float]]) -> np.ndarray:
    """Componentwise mean over token rows (numpy pairwise summation)."""
    matrix = np.asarray(token_matrix, dtype=float)
    if matrix.ndim == 1:
        matrix = matrix.reshape(1, -1)
    if matrix.shape[0] == 0 or matrix.size == 0:
        raise DomainError("cannot pool an empty token matrix")
    return matrix.mean(axis=0)


class EmbeddingProvider(Protocol):
    def embed(self, text: str) -> np.ndarray: ...


class FileEmbeddingStore:
    """Deterministic text -> vector lookup backed by a store file."""

    def __init__(self, vectors: dict[str, np.ndarray]):
        self._vectors = vectors

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, text: str) -> bool:
        return text in self._vectors

    def texts(self) -> list[str]:
        return list(self._vectors)

    def embed(self, text: str) -> np.ndarray:
        vec = self._vectors.get(text)
        if vec is None:
            raise ConsistencyError(f"no embedding stored for text {text!r}")
        return vec

    @classmethod
    def from_jsonl(cls, stream: IO) -> "FileEmbeddingStore":
        data = stream.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        vectors: dict[str, np.ndarray] = {}
        for lineno, line in enumerate(data.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"bad JSON: {exc}", lineno) from exc
            vec = np.asarray(obj["vector"], dtype=float)
            if vec.size != obj["dim"]:
                raise ParseError(
                    f"vector length {vec.size} != declared dim {obj['dim']}", lineno
                )
            vectors[obj["text"]] = vec
        return cls(vectors)

    @classmethod
    def from_binary(cls, stream: IO) -> "FileEmbeddingStore":
        data = stream.read()
        if data[:4] != MAGIC:
            raise ParseError("bad magic bytes; not an EMB1 store")
        (count,) = struct.unpack_from("<I", data, 4)
        offset = 8
        vectors: dict[str, np.ndarray] = {}
        for _ in range(count):
            (text_len,) = struct.unpack_from("<I", data, offset)
            offset += 4
            text = data[offset:offset + text_len].decode("utf-8")
            offset += text_len
            (dim,) = struct.unpack_from("<I", data, offset)
            offset += 4
            vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).astype(float)
            offset += 4 * dim
            vectors[text] = vec
        return cls(vectors)

    @classmethod
    def from_path(cls, path: str | Path) -> "FileEmbeddingStore":
        path = Path(path)
        with open(path, "rb") as fh:
            head = fh.read(4)
        if head == MAGIC:
            with open(path, "rb") as fh:
                return cls.from_binary(fh)
        with open(path, encoding="utf-8") as fh:
            return cls.from_jsonl(fh)


def write_store_jsonl(vectors: dict[str, np.ndarray], sink: IO) -> int:
    n = 0
    for text, vec in vectors.items():
        obj = {"text": text, "dim": int(vec.size), "vector": [float(v) for v in vec]}
        sink.write(json.dumps(obj, ensure_ascii=False) + "\n")
        n += 1
    return n


def write_store_binary(vectors: dict[str, np.ndarray], sink: IO) -> int:
    sink.write(MAGIC)
    sink.write(struct.pack("<I", len(vectors)))
    for text, vec in vectors.items():
        encoded = text.encode("utf-8")
        sink.write(struct.pack("<I", len(encoded)))
        sink.write(encoded)
        sink.write(struct.pack("<I", vec.size))
        sink.write(np.asarray(vec, dtype="<f4").tobytes())
    return len(vectors)


class HttpEmbeddingProvider:
    """POST {"texts": [...]} -> {"vectors": [[...]]} or {"token_vectors": [[[...]]]}.

    Responses are cached in memory, so repeated texts cost one request and
    the provider stays deterministic within a run.
    """

    def __init__(self, url: str, api_key: str | None = None, transport=None):
        self.url = url
        self.api_key = api_key
        self._transport = transport or self._requests_transport
        self._cache: dict[str, np.ndarray] = {}

    def _requests_transport(self, url: str, payload: dict, headers: dict) -> dict:
        import requests

        try:
            resp = requests.post(url, json=payload, headers=headers, timeout=120)
        except requests.RequestException as exc:
            raise TransportError(f"embedding request failed: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(f"embedding endpoint returned HTTP {resp.status_code}")
        return resp.json()

    def embed(self, text: str) -> np.ndarray:
        return self.embed_many([text])[0]

    def embed_many(self, texts: Sequence[str]) -> list[np.ndarray]:
        missing = [t for t in texts if t not in self._cache]
        if missing:
            headers = {}
            if self.api_key:
                headers["Authorization"] = f"Bearer {self.api_key}"
            payload = self._transport(self.url, {"texts": missing}, headers)
            if "token_vectors" in payload:
                vectors = [mean_pool(m) for m in payload["token_vectors"]]
            elif "vectors" in payload:
                vectors = [np.asarray(v, dtype=float) for v in payload["vectors"]]
            else:
                raise ProtocolError("embedding response lacks vectors/token_vectors")
            if len(vectors) != len(missing):
                raise ProtocolError(
                    f"asked for {len(missing)} embeddings, got {len(vectors)}"
                )
            for t, v in zip(missing, vectors):
                self._cache[t] = v
        return [self._cache[t] for t in texts]

    def cached_vectors(self) -> dict[str, np.ndarray]:
        return dict(self._cache)
