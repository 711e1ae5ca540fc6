"""
Splittable random streams.

A stream is addressed by a root seed and a path of labels
(experiment / replica / vertex / index ...). The path is hashed into a
SeedSequence spawn key that drives a counter-based Philox generator, so two
distinct paths give independent streams and the same path always gives the
same draws, whatever order or process the streams are used in.
"""

import hashlib
from typing import Tuple, Union

import numpy as np

Label = Union[int, str, Tuple[int, ...]]

SEED_BITS = 64


def _label_word(label: Label) -> int:
    if isinstance(label, (bool, np.bool_)):
        raise TypeError("boolean stream labels are ambiguous")
    if isinstance(label, (int, np.integer)):
        token = f"i:{int(label)}"
    elif isinstance(label, str):
        token = f"s:{label}"
    elif isinstance(label, tuple):
        token = "t:" + ",".join(str(int(c)) for c in label)
    else:
        raise TypeError(f"unsupported stream label type: {type(label).__name__}")
    digest = hashlib.blake2b(token.encode('utf-8'), digest_size=8).digest()
    return int.from_bytes(digest, 'little')


def derive_seed(root_seed: int, *labels: Label) -> int:
    """Deterministic 64-bit seed from a root seed and labels."""
    h = hashlib.blake2b(digest_size=8)
    h.update(int(root_seed).to_bytes(8, 'little', signed=False))
    for label in labels:
        h.update(_label_word(label).to_bytes(8, 'little'))
    return int.from_bytes(h.digest(), 'little')


class RngStream:
    """
    A labelled random stream.

    `child(...)` extends the label path without touching this stream;
    `generator()` hands out the numpy Generator once and marks the stream
    consumed, so a stream cannot feed two tasks.
    """

    __slots__ = ("root_seed", "path", "_consumed")

    def __init__(self, root_seed: int, path: Tuple[Label, ...] = ()):
        root_seed = int(root_seed)
        if not 0 <= root_seed < 2 ** SEED_BITS:
            raise ValueError(f"root seed must be a {SEED_BITS}-bit nonnegative integer, got {root_seed}")
        self.root_seed = root_seed
        self.path = tuple(path)
        self._consumed = False

    def __repr__(self) -> str:
        return f"RngStream(seed={self.root_seed}, path={self.path!r})"

    def child(self, *labels: Label) -> "RngStream":
        return RngStream(self.root_seed, self.path + tuple(labels))

    @property
    def consumed(self) -> bool:
        return self._consumed

    def spawn_key(self) -> Tuple[int, ...]:
        return tuple(_label_word(label) for label in self.path)

    def generator(self) -> np.random.Generator:
        if self._consumed:
            raise RuntimeError(f"{self!r} was already consumed; derive a child stream instead")
        self._consumed = True
        seq = np.random.SeedSequence(entropy=self.root_seed, spawn_key=self.spawn_key())
        return np.random.Generator(np.random.Philox(seq))
