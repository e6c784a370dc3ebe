"""The orthogonal 2x2 kernel, its bit-permuted Kronecker powers and path indexing.

Path bits are stored first-perform first: ``bits[0]`` is the choice made at
the leaf level (pairing of adjacent inputs) and ``bits[-1]`` the choice made
at the root.  The 1-based output index is ``int(bits, 2) + 1`` with
``bits[0]`` as the most significant bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidInput, InvalidParameter

MAX_PATH_DEPTH = 24
DEFAULT_LAMBDA = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class PathSpec:
    bits: tuple[int, ...] = ()

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise InvalidParameter("path bits must be 0 or 1")
        if len(bits) > MAX_PATH_DEPTH:
            raise InvalidParameter(f"path depth is limited to {MAX_PATH_DEPTH}")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def parse(cls, text: str) -> "PathSpec":
        text = text.strip()
        if text and set(text) - {"0", "1"}:
            raise InvalidParameter(f"path must be a string of 0/1 characters, got {text!r}")
        return cls(tuple(int(c) for c in text))

    @classmethod
    def from_index(cls, depth: int, index: int) -> "PathSpec":
        """Inverse of :func:`path_index` (``index`` is 1-based)."""
        if not 1 <= index <= 2 ** depth:
            raise InvalidParameter(f"index {index} outside [1, 2^{depth}]")
        k = index - 1
        return cls(tuple((k >> (depth - 1 - i)) & 1 for i in range(depth)))

    @property
    def depth(self) -> int:
        return len(self.bits)

    def prefix(self, m: int) -> "PathSpec":
        return PathSpec(self.bits[:m])

    def __str__(self) -> str:
        return "".join(map(str, self.bits))


def path_index(p: PathSpec) -> int:
    k = 0
    for b in p.bits:
        k = 2 * k + b
    return k + 1


def children(p: PathSpec) -> tuple[PathSpec, PathSpec]:
    if p.depth >= MAX_PATH_DEPTH:
        raise InvalidParameter(f"path depth is limited to {MAX_PATH_DEPTH}")
    return PathSpec(p.bits + (0,)), PathSpec(p.bits + (1,))


def all_paths(depth: int) -> list[PathSpec]:
    """All paths of the given depth, ordered by path index."""
    return [PathSpec.from_index(depth, k) for k in range(1, 2 ** depth + 1)]


@dataclass(frozen=True)
class TransformPlan:
    lam: float
    n: int

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise InvalidParameter(f"lambda must lie in (0, 1), got {self.lam}")
        if not 0 <= self.n <= MAX_PATH_DEPTH:
            raise InvalidParameter(f"depth must lie in [0, {MAX_PATH_DEPTH}]")

    @property
    def mu(self) -> float:
        return math.sqrt(1.0 - self.lam * self.lam)

    @property
    def N(self) -> int:
        return 1 << self.n


def kernel(lam: float) -> np.ndarray:
    mu = math.sqrt(1.0 - lam * lam)
    return np.array([[lam, mu], [mu, -lam]])


@lru_cache(maxsize=32)
def _bitrev(n: int) -> np.ndarray:
    idx = np.arange(1 << n)
    rev = np.zeros_like(idx)
    for b in range(n):
        rev |= ((idx >> b) & 1) << (n - 1 - b)
    rev.setflags(write=False)
    return rev


def bit_reverse(v: np.ndarray) -> np.ndarray:
    """Apply the bit-reversal permutation along the last axis."""
    v = np.asarray(v)
    size = v.shape[-1]
    n = size.bit_length() - 1
    if size != 1 << n:
        raise InvalidInput("length must be a power of two")
    return v[..., _bitrev(n)]


def _butterflies(plan: TransformPlan, x: np.ndarray) -> np.ndarray:
    """``kernel^{(x) n} x``: pair element i of the first half with element i of the second."""
    lam, mu = plan.lam, plan.mu
    y = np.array(x, dtype=float)
    half = plan.N
    for _ in range(plan.n):
        half //= 2
        blocks = y.reshape(*y.shape[:-1], -1, 2, half)
        a = blocks[..., 0, :].copy()
        b = blocks[..., 1, :]
        blocks[..., 0, :] = lam * a + mu * b
        blocks[..., 1, :] = mu * a - lam * b
    return y


def _check_length(plan: TransformPlan, x: np.ndarray):
    if x.shape[-1] != plan.N:
        raise InvalidInput(f"expected vectors of length {plan.N}, got {x.shape[-1]}")


def apply_transform(plan: TransformPlan, x) -> np.ndarray:
    """Bit-reversed Kronecker power of the kernel applied along the last axis."""
    x = np.asarray(x, dtype=float)
    _check_length(plan, x)
    return bit_reverse(_butterflies(plan, x))


def inverse_transform(plan: TransformPlan, y) -> np.ndarray:
    """Inverse of :func:`apply_transform` (the kernel is a symmetric involution)."""
    y = np.asarray(y, dtype=float)
    _check_length(plan, y)
    return _butterflies(plan, bit_reverse(y))


def dense_matrix(plan: TransformPlan) -> np.ndarray:
    """Explicit ``N x N`` matrix; intended for tests and small ``n``."""
    m = np.ones((1, 1))
    k = kernel(plan.lam)
    for _ in range(plan.n):
        m = np.kron(m, k)
    return m[_bitrev(plan.n)]


def level_values(plan: TransformPlan, x) -> list[np.ndarray]:
    """Realized values of every node, level by level.

    Entry ``d`` has shape ``(..., N >> d, 2**d)``: block ``b`` at level ``d``
    covers leaves ``b*2**d .. (b+1)*2**d - 1`` and column ``c`` is the output
    whose prefix bits, read first-perform first, spell ``c`` in binary.  Two
    sibling blocks ``2b`` and ``2b+1`` combine into block ``b`` of the next
    level; columns ``2c`` and ``2c+1`` of the parent are the plus and minus
    outputs of column ``c`` of the children.  The last entry equals
    ``apply_transform(plan, x)`` with a singleton block axis.
    """
    x = np.asarray(x, dtype=float)
    _check_length(plan, x)
    lam, mu = plan.lam, plan.mu
    cur = x[..., :, None]
    out = [cur]
    for _ in range(plan.n):
        a = cur[..., 0::2, :]
        b = cur[..., 1::2, :]
        nxt = np.empty(a.shape[:-1] + (2 * a.shape[-1],))
        nxt[..., 0::2] = lam * a + mu * b
        nxt[..., 1::2] = mu * a - lam * b
        cur = nxt
        out.append(cur)
    return out
