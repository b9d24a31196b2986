"""Rayleigh fading channel realizations and the channel container.

The channel matrix ``H`` is ``M x K``: column ``k`` holds the channel vector
of user ``k``.  Randomness is managed through :class:`numpy.random.SeedSequence`
so independent trials can be spawned from a single master seed.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

__all__ = [
    "ChannelMatrix",
    "DimensionError",
    "as_generator",
    "sample_rayleigh",
    "substream",
    "save_channel",
    "load_channel",
]


class DimensionError(ValueError):
    """Raised when matrix shapes are invalid or do not agree."""


@dataclass(frozen=True, eq=False)
class ChannelMatrix:
    """Immutable ``M x K`` complex channel matrix.

    Instances behave like arrays (``np.asarray(h)`` works) and are safe to
    share between threads: the wrapped buffer is marked read-only.
    """

    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=np.complex128, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError(f"channel must be a non-empty 2-D matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("channel entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def m_antennas(self) -> int:
        return self.entries.shape[0]

    @property
    def k_users(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self):
        return self.entries.shape

    def column(self, k: int) -> np.ndarray:
        """Channel vector of user ``k`` (0-based)."""
        return self.entries[:, k]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.entries
        return self.entries.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, ChannelMatrix):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash((self.shape, self.entries.tobytes()))


RngLike = Union[np.random.Generator, np.random.SeedSequence, int]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_rayleigh(m_antennas: int, k_users: int, rng: RngLike) -> ChannelMatrix:
    """Draw an i.i.d. CN(0, 1) channel.

    Real and imaginary parts are independent N(0, 1/2).  Passing the same
    integer seed (or an equal ``SeedSequence``) reproduces the matrix exactly.
    """
    if int(m_antennas) != m_antennas or int(k_users) != k_users:
        raise DimensionError("dimensions must be integers")
    if m_antennas < 1 or k_users < 1:
        raise DimensionError(f"dimensions must be positive, got M={m_antennas}, K={k_users}")
    gen = as_generator(rng)
    parts = gen.standard_normal((2, int(m_antennas), int(k_users)))
    return ChannelMatrix((parts[0] + 1j * parts[1]) * np.sqrt(0.5))


def substream(master_seed: int, *key: int) -> np.random.SeedSequence:
    """Deterministic child stream of ``master_seed`` addressed by an integer key.

    Two different keys never share a stream, and the stream for a key does not
    depend on which other keys have been requested before.
    """
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))


def save_channel(h, path) -> None:
    """Write ``h`` as text: a ``"M K"`` line then ``M*K`` ``"re im"`` lines, user-major."""
    arr = np.asarray(h)
    m, k = arr.shape
    lines = [f"{m} {k}"]
    for z in arr.T.ravel():
        lines.append(f"{float(z.real)!r} {float(z.imag)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_channel(path) -> ChannelMatrix:
    """Inverse of :func:`save_channel`."""
    rows = Path(path).read_text(encoding="ascii").split("\n")
    rows = [r for r in (r.strip() for r in rows) if r]
    if not rows:
        raise DimensionError(f"{path}: empty channel file")
    try:
        m, k = (int(tok) for tok in rows[0].split())
    except ValueError as exc:
        raise DimensionError(f"{path}: bad header {rows[0]!r}") from exc
    if m < 1 or k < 1:
        raise DimensionError(f"{path}: dimensions must be positive")
    body = rows[1:]
    if len(body) != m * k:
        raise DimensionError(f"{path}: expected {m * k} entries, found {len(body)}")
    vals = np.array([[float(t) for t in r.split()] for r in body])
    if vals.shape != (m * k, 2):
        raise DimensionError(f"{path}: each entry line must hold two numbers")
    z = vals[:, 0] + 1j * vals[:, 1]
    return ChannelMatrix(z.reshape(k, m).T)
