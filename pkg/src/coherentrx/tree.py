"""Control-logic structures: M-ary decision trees and decision tables.

A depth-``N`` M-ary :class:`DecisionTree` stores one complex displacement per
measurement history (outcome prefix).  Nodes live in a flat breadth-first
array: level ``d`` occupies slots ``(M^d - 1)/(M - 1) ...`` in lexicographic
prefix order, which makes whole-level vectorized evaluation cheap.  A
:class:`DecisionTable` maps each complete length-``N`` outcome path to a
codeword guess.

This module also owns the receiver-spec JSON document, the unit of exchange
between the ``optimize`` and ``evaluate``/``metrics`` commands.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constellation import Constellation
from .photonics import NoiseModel

__all__ = [
    "DecisionTree",
    "DecisionTable",
    "Receiver",
    "num_nodes",
    "level_offset",
    "node_index",
    "leaf_index",
    "decode_node_index",
    "decode_leaf_index",
    "displacement_report",
    "save_receiver",
    "load_receiver",
]


def num_nodes(rounds: int, arity: int) -> int:
    """Internal node count of a full arity^rounds tree: (M^N - 1) / (M - 1)."""
    return (arity**rounds - 1) // (arity - 1)


def level_offset(arity: int, level: int) -> int:
    """Flat index of the first node at the given level."""
    return (arity**level - 1) // (arity - 1)


def _check_path(arity: int, path: Sequence[int]) -> None:
    for k in path:
        if not 0 <= int(k) < arity:
            raise ValueError(f"outcome {k} out of range for arity {arity}")


def node_index(arity: int, path: Sequence[int], rounds: int | None = None) -> int:
    """Flat breadth-first slot of the node reached by an outcome prefix.

    The empty prefix is the root (slot 0).  Bijective between length-d
    prefixes and level-d slots.
    """
    d = len(path)
    if rounds is not None and d >= rounds:
        raise ValueError(f"prefix of length {d} too long for {rounds} rounds")
    _check_path(arity, path)
    pos = 0
    for k in path:
        pos = pos * arity + int(k)
    return level_offset(arity, d) + pos


def leaf_index(arity: int, rounds: int, path: Sequence[int]) -> int:
    """Index of a complete outcome path in [0, M^N), base-M big-endian."""
    if len(path) != rounds:
        raise ValueError(f"path length {len(path)} != rounds {rounds}")
    _check_path(arity, path)
    pos = 0
    for k in path:
        pos = pos * arity + int(k)
    return pos


def decode_node_index(arity: int, index: int) -> tuple[int, ...]:
    """Inverse of :func:`node_index`: recover the outcome prefix from a slot."""
    if index < 0:
        raise ValueError("index must be non-negative")
    level = 0
    while level_offset(arity, level + 1) <= index:
        level += 1
    pos = index - level_offset(arity, level)
    path = []
    for _ in range(level):
        path.append(pos % arity)
        pos //= arity
    return tuple(reversed(path))


def decode_leaf_index(arity: int, rounds: int, index: int) -> tuple[int, ...]:
    """Inverse of :func:`leaf_index`."""
    if not 0 <= index < arity**rounds:
        raise ValueError("leaf index out of range")
    path = []
    for _ in range(rounds):
        path.append(index % arity)
        index //= arity
    return tuple(reversed(path))


@dataclass
class DecisionTree:
    """Per-history displacement parameters of an (N, M) receiver.

    ``nodes`` is complex of length ``(M^N - 1)/(M - 1)``, breadth-first.
    Trees are read-shared during evaluation; the optimizer mutates ``nodes``
    only in its single-writer update phase.
    """

    rounds: int
    arity: int
    nodes: np.ndarray

    def __post_init__(self) -> None:
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")
        if self.arity < 2:
            raise ValueError("arity must be at least 2")
        nodes = np.asarray(self.nodes, dtype=np.complex128)
        expected = num_nodes(self.rounds, self.arity)
        if nodes.shape != (expected,):
            raise ValueError(f"expected {expected} nodes, got shape {nodes.shape}")
        if not np.all(np.isfinite(nodes.view(np.float64))):
            raise ValueError("node displacements must be finite")
        self.nodes = nodes

    @classmethod
    def zeros(cls, rounds: int, arity: int) -> "DecisionTree":
        return cls(rounds, arity, np.zeros(num_nodes(rounds, arity), dtype=np.complex128))

    def level_nodes(self, level: int) -> np.ndarray:
        """View of the displacements at one level, in prefix order."""
        start = level_offset(self.arity, level)
        return self.nodes[start : start + self.arity**level]

    def node(self, path: Sequence[int]) -> complex:
        return complex(self.nodes[node_index(self.arity, path, self.rounds)])

    def copy(self) -> "DecisionTree":
        return DecisionTree(self.rounds, self.arity, self.nodes.copy())

    @property
    def n_parameters(self) -> int:
        """Real optimization variables: two per node."""
        return 2 * self.nodes.size


@dataclass(frozen=True)
class DecisionTable:
    """Map from complete outcome paths to codeword guesses."""

    rounds: int
    arity: int
    guesses: np.ndarray

    def __post_init__(self) -> None:
        guesses = np.asarray(self.guesses, dtype=np.int64)
        if guesses.shape != (self.arity**self.rounds,):
            raise ValueError("table must have one guess per complete path")
        if np.any(guesses < 0):
            raise ValueError("guesses must be valid labels")
        object.__setattr__(self, "guesses", guesses)

    def guess(self, path: Sequence[int]) -> int:
        return int(self.guesses[leaf_index(self.arity, self.rounds, path)])


def displacement_report(
    t: DecisionTree, reference: DecisionTree
) -> tuple[np.ndarray, np.ndarray]:
    """Per-node amplitude ratio in dB and relative sign against a reference.

    Returns ``(amp_db, sign)`` where ``amp_db = 20*log10(|u| / |u_ref|)`` and
    ``sign`` is +/-1 with the sign of the projection of ``u`` onto the
    reference phase.  Nodes with zero reference amplitude are undefined and
    reported as ``(nan, 0)``.
    """
    if (t.rounds, t.arity) != (reference.rounds, reference.arity):
        raise ValueError("trees must share the same (rounds, arity) shape")
    mag = np.abs(t.nodes)
    ref_mag = np.abs(reference.nodes)
    defined = ref_mag > 0
    amp_db = np.full(mag.shape, np.nan)
    with np.errstate(divide="ignore"):
        amp_db[defined] = 20.0 * np.log10(mag[defined] / ref_mag[defined])
    proj = (t.nodes * np.conj(reference.nodes)).real
    sign = np.zeros(mag.shape)
    sign[defined] = np.where(proj[defined] >= 0, 1.0, -1.0)
    return amp_db, sign


@dataclass
class Receiver:
    """A deployable receiver: control logic plus its design context."""

    tree: DecisionTree
    table: DecisionTable
    constellation: Constellation
    noise_model: NoiseModel
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "N": self.tree.rounds,
            "M": self.tree.arity,
            "constellation": self.constellation.to_records(),
            "noise_model": self.noise_model.to_dict(),
            "nodes": [
                {"re": float(u.real), "im": float(u.imag)} for u in self.tree.nodes
            ],
            "table": [int(g) for g in self.table.guesses],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Receiver":
        rounds, arity = int(d["N"]), int(d["M"])
        nodes = np.array([complex(n["re"], n["im"]) for n in d["nodes"]])
        tree = DecisionTree(rounds, arity, nodes)
        table = DecisionTable(rounds, arity, np.asarray(d["table"]))
        constellation = Constellation.from_records(
            d["constellation"], name=d.get("metadata", {}).get("encoding", "custom")
        )
        if np.any(table.guesses >= constellation.n_codewords):
            raise ValueError("table guesses exceed the constellation labels")
        nm = NoiseModel.from_dict(d["noise_model"])
        return cls(tree, table, constellation, nm, dict(d.get("metadata", {})))


def save_receiver(path: str, receiver: Receiver) -> None:
    """Write a receiver-spec JSON document atomically (temp + rename)."""
    payload = json.dumps(receiver.to_dict(), indent=2, sort_keys=True)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(payload + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_receiver(path: str) -> Receiver:
    with open(path) as fh:
        return Receiver.from_dict(json.load(fh))
