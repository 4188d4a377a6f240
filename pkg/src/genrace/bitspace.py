"""Bitstrings, the even-parity solution space, the negative separation cost and
the reweighted training set.

Bitstrings are handled in bulk as integer codes, most-significant bit first, so
``"100"`` is code 4. Text forms are only used at the I/O boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

ENUMERATION_CAP = 24
MAX_RESAMPLE_ATTEMPTS = 1000


class EnumerationCapError(ValueError):
    pass


class TrainingSetError(ValueError):
    pass


# ---------------------------------------------------------------------------
# conversions


def parse_bitstring(text: str) -> np.ndarray:
    text = text.strip()
    if not text or set(text) - {"0", "1"}:
        raise ValueError(f"not a bitstring: {text!r}")
    return np.frombuffer(text.encode(), dtype=np.uint8) - ord("0")


def bits_to_text(bits: Sequence[int]) -> str:
    return "".join("1" if b else "0" for b in bits)


def codes_to_bits(codes: np.ndarray, n_var: int) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    shifts = np.arange(n_var - 1, -1, -1, dtype=np.int64)
    return ((codes[..., None] >> shifts) & 1).astype(np.uint8)


def bits_to_codes(bits: np.ndarray) -> np.ndarray:
    bits = np.asarray(bits)
    if bits.ndim == 1:
        bits = bits[None, :]
    n_var = bits.shape[-1]
    weights = np.left_shift(np.int64(1), np.arange(n_var - 1, -1, -1, dtype=np.int64))
    return bits.astype(np.int64) @ weights


def code_to_text(code: int, n_var: int) -> str:
    return format(int(code), f"0{n_var}b")


def text_to_code(text: str) -> int:
    parse_bitstring(text)
    return int(text.strip(), 2)


def popcount(codes: np.ndarray) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    count = np.zeros(codes.shape, dtype=np.int64)
    c = codes.copy()
    while np.any(c):
        count += c & 1
        c >>= 1
    return count


# ---------------------------------------------------------------------------
# cost and validity


def separation_costs(bits: np.ndarray) -> np.ndarray:
    """Vectorized negative separation cost for a ``(M, n_var)`` array of bits.

    Only zero-runs with a one on both sides count; strings with fewer than two
    ones cost -1.
    """
    bits = np.asarray(bits, dtype=bool)
    if bits.ndim == 1:
        bits = bits[None, :]
    m = bits.shape[0]
    run = np.zeros(m, dtype=np.int64)
    best = np.zeros(m, dtype=np.int64)
    seen = np.zeros(m, dtype=bool)
    for j in range(bits.shape[1]):
        b = bits[:, j]
        closing = b & seen
        best = np.where(closing, np.maximum(best, run), best)
        run = np.where(b, 0, run + 1)
        seen |= b
    return -(best + 1)


def separation_cost(x: str | Sequence[int]) -> int:
    bits = parse_bitstring(x) if isinstance(x, str) else np.asarray(x)
    if bits.size == 0:
        raise ValueError("empty bitstring")
    return int(separation_costs(bits)[0])


def codes_costs(codes: np.ndarray, n_var: int) -> np.ndarray:
    return separation_costs(codes_to_bits(codes, n_var))


def is_valid(x: str | Sequence[int]) -> bool:
    bits = parse_bitstring(x) if isinstance(x, str) else np.asarray(x)
    if bits.size == 0:
        raise ValueError("empty bitstring")
    return int(np.sum(bits)) % 2 == 0


def valid_codes_mask(codes: np.ndarray) -> np.ndarray:
    return popcount(codes) % 2 == 0


# ---------------------------------------------------------------------------
# solution space


@dataclass(frozen=True)
class SolutionSpace:
    n_var: int

    def __post_init__(self):
        if self.n_var < 1:
            raise ValueError(f"n_var must be positive, got {self.n_var}")

    @property
    def size(self) -> int:
        return 2 ** (self.n_var - 1)

    def contains(self, x: str | Sequence[int]) -> bool:
        bits = parse_bitstring(x) if isinstance(x, str) else np.asarray(x)
        return len(bits) == self.n_var and is_valid(bits)

    def index_to_code(self, index: np.ndarray) -> np.ndarray:
        """Bijection from ``[0, |S|)`` onto S: the index supplies the leading
        ``n_var - 1`` bits and the last bit restores even parity."""
        index = np.asarray(index, dtype=np.int64)
        return (index << 1) | (popcount(index) & 1)


def enumerate_solution_space(n_var: int, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """All even-parity codes of length ``n_var`` in increasing order."""
    if n_var < 1:
        raise ValueError(f"n_var must be positive, got {n_var}")
    if n_var > cap:
        raise EnumerationCapError(f"n_var={n_var} exceeds enumeration cap {cap}")
    codes = np.arange(2**n_var, dtype=np.int64)
    return codes[valid_codes_mask(codes)]


# ---------------------------------------------------------------------------
# reweighting and training set


def reweight(costs: Sequence[int]) -> tuple[float, float, np.ndarray]:
    """Return ``(beta_hat, beta, weights)`` with ``weights ~ exp(-beta * c)``."""
    c = np.asarray(costs, dtype=np.float64)
    if c.size == 0:
        raise ValueError("reweight needs at least one cost")
    beta_hat = float(np.std(c))
    beta = beta_hat / 2.0
    logits = -beta * c
    logits -= logits.max()
    w = np.exp(logits)
    return beta_hat, beta, w / w.sum()


def training_set_size(n_var: int, epsilon: float) -> int:
    # floor reproduces both quoted sizes at n_var=20 (5242 and 524)
    return max(1, int(math.floor(epsilon * 2 ** (n_var - 1) + 1e-9)))


@dataclass(frozen=True)
class TrainingSet:
    n_var: int
    epsilon: float
    seed: int
    codes: np.ndarray = field(repr=False)
    costs: np.ndarray = field(repr=False)
    beta_hat: float
    beta: float
    weights: np.ndarray = field(repr=False)
    draw_seed: int | None = None
    attempts: int = 1

    def __post_init__(self):
        for name in ("codes", "costs", "weights"):
            getattr(self, name).setflags(write=False)

    @property
    def size(self) -> int:
        return len(self.codes)

    @property
    def min_cost(self) -> int:
        return int(self.costs.min())

    @property
    def bits(self) -> np.ndarray:
        return codes_to_bits(self.codes, self.n_var)

    @property
    def strings(self) -> list[str]:
        return [code_to_text(c, self.n_var) for c in self.codes]

    def contains_codes(self, codes: np.ndarray) -> np.ndarray:
        return np.isin(np.asarray(codes, dtype=np.int64), self.codes)

    def probability(self, x: str) -> float:
        """P_train(x); zero off the training set."""
        hit = np.flatnonzero(self.codes == text_to_code(x))
        return float(self.weights[hit[0]]) if hit.size else 0.0

    def entropy(self) -> float:
        w = self.weights[self.weights > 0]
        return float(-(w * np.log(w)).sum())

    def sample_minibatch(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``size`` training bitstrings with replacement, weighted by P_train."""
        idx = rng.choice(self.size, size=size, replace=True, p=self.weights)
        return codes_to_bits(self.codes[idx], self.n_var)

    @classmethod
    def from_codes(cls, codes, n_var: int, epsilon: float, seed: int = 0,
                   require_valid: bool = True, **kw) -> "TrainingSet":
        """``require_valid=False`` admits odd-parity strings (toy targets outside S)."""
        codes = np.asarray(codes, dtype=np.int64)
        if len(np.unique(codes)) != len(codes):
            raise TrainingSetError("training codes must be distinct")
        if require_valid and not valid_codes_mask(codes).all():
            raise TrainingSetError("training codes must have even parity")
        costs = codes_costs(codes, n_var)
        beta_hat, beta, weights = reweight(costs)
        return cls(n_var, epsilon, seed, codes, costs, beta_hat, beta, weights, **kw)

    # -- canonical text file ------------------------------------------------

    def save(self, path: str | Path) -> None:
        lines = [
            f"# n_var={self.n_var} epsilon={self.epsilon!r} seed={self.seed} "
            f"beta_hat={self.beta_hat!r} draw_seed={self.draw_seed}"
        ]
        lines += [f"{s}\t{int(c)}" for s, c in zip(self.strings, self.costs)]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "TrainingSet":
        header, *rows = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
        if not header.startswith("#"):
            raise TrainingSetError(f"{path}: missing header line")
        meta = dict(item.split("=", 1) for item in header[1:].split())
        codes, costs = [], []
        for row in rows:
            text, cost = row.split("\t")
            codes.append(text_to_code(text))
            costs.append(int(cost))
        n_var = int(meta["n_var"])
        draw_seed = None if meta.get("draw_seed", "None") == "None" else int(meta["draw_seed"])
        ts = cls.from_codes(codes, n_var, float(meta["epsilon"]), int(meta["seed"]), draw_seed=draw_seed)
        if list(ts.costs) != costs:
            raise TrainingSetError(f"{path}: stored costs disagree with the separation cost")
        return ts


def _draw_codes(n_var: int, size: int, rng: np.random.Generator) -> np.ndarray:
    space = SolutionSpace(n_var)
    index = rng.choice(space.size, size=size, replace=False)
    return space.index_to_code(np.sort(index))


def build_training_set(
    n_var: int,
    epsilon: float,
    seed: int,
    target_min_cost: int | None = None,
    max_attempts: int = MAX_RESAMPLE_ATTEMPTS,
) -> TrainingSet:
    """Draw ``floor(epsilon * |S|)`` distinct uniform members of S.

    With ``target_min_cost`` the whole set is redrawn with seeds ``seed``,
    ``seed + 1``, ... until its minimum cost equals the target.
    """
    if not 0 < epsilon <= 1:
        raise TrainingSetError(f"epsilon must lie in (0, 1], got {epsilon}")
    if n_var < 2:
        raise TrainingSetError("n_var must be at least 2")
    size = training_set_size(n_var, epsilon)
    if target_min_cost is not None and not -(n_var - 1) <= target_min_cost <= -1:
        raise TrainingSetError(f"target_min_cost {target_min_cost} unreachable at n_var={n_var}")
    for attempt in range(max_attempts):
        draw_seed = seed + attempt
        codes = _draw_codes(n_var, size, np.random.default_rng(draw_seed))
        costs = codes_costs(codes, n_var)
        if target_min_cost is None or costs.min() == target_min_cost:
            return TrainingSet.from_codes(
                codes, n_var, epsilon, seed, draw_seed=draw_seed, attempts=attempt + 1
            )
    raise TrainingSetError(
        f"no training set with min cost {target_min_cost} after {max_attempts} attempts "
        f"(n_var={n_var}, epsilon={epsilon}, seed={seed})"
    )

