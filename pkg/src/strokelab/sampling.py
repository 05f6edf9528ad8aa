"""Seeded balanced downsampling, train/test splitting, and run-seed derivation.

All randomness flows through numpy's PCG64 generator; a given 64-bit seed
produces the same draw sequence on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MajoritySmallerThanMinority, NoMinoritySamples, TooFewRows
from .ingest import EncodedMatrix

#: PRNG used everywhere in the package (documented reproducibility contract).
RNG_ALGORITHM = "pcg64"


@dataclass(frozen=True)
class RandomSource:
    """A named, seeded random stream (numpy PCG64 starting at position 0)."""

    seed: int
    algorithm: str = RNG_ALGORITHM

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed & 0xFFFFFFFFFFFFFFFF))


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.70
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")


def balanced_downsample(data: EncodedMatrix, seed: int) -> EncodedMatrix:
    """Keep all positive rows plus an equal-count random subset of negatives.

    The negative subset is drawn uniformly without replacement and the
    combined rows are shuffled, both driven by ``seed``.

    Raises:
        NoMinoritySamples: no positive rows.
        MajoritySmallerThanMinority: fewer negatives than positives.
    """
    pos = np.flatnonzero(data.y == 1)
    neg = np.flatnonzero(data.y == 0)
    if len(pos) == 0:
        raise NoMinoritySamples("no positive rows to balance around")
    if len(neg) < len(pos):
        raise MajoritySmallerThanMinority(
            f"{len(neg)} negatives < {len(pos)} positives"
        )
    rng = RandomSource(seed).generator()
    keep_neg = rng.choice(neg, size=len(pos), replace=False)
    combined = np.concatenate([pos, keep_neg])
    return data.take(combined[rng.permutation(len(combined))])


def split(data: EncodedMatrix, spec: SplitSpec) -> tuple[EncodedMatrix, EncodedMatrix]:
    """Disjoint train/test partition of all rows.

    With ``stratified=True`` the per-class train count stays within one row
    of ``train_fraction`` (largest-remainder allocation of the global train
    total across classes).

    Raises:
        TooFewRows: fewer than 2 rows, or a stratum with fewer than 2 rows.
    """
    n = data.n_rows
    if n < 2:
        raise TooFewRows("need at least 2 rows to split")
    rng = RandomSource(spec.seed).generator()
    total_train = int(np.floor(spec.train_fraction * n + 0.5))
    total_train = min(max(total_train, 1), n - 1)

    if not spec.stratified:
        perm = rng.permutation(n)
        return data.take(perm[:total_train]), data.take(perm[total_train:])

    class_idx = [np.flatnonzero(data.y == c) for c in (0, 1)]
    if any(len(idx) < 2 for idx in class_idx):
        raise TooFewRows("stratified split needs at least 2 rows per class")
    exact = [spec.train_fraction * len(idx) for idx in class_idx]
    counts = [int(np.floor(e)) for e in exact]
    # Hand out the remaining rows by largest fractional part, class 0 first on ties.
    order = sorted(range(2), key=lambda c: (-(exact[c] - counts[c]), c))
    for c in order:
        if sum(counts) >= total_train:
            break
        counts[c] += 1
    train_parts, test_parts = [], []
    for c, idx in enumerate(class_idx):
        shuffled = idx[rng.permutation(len(idx))]
        train_parts.append(shuffled[: counts[c]])
        test_parts.append(shuffled[counts[c] :])
    train_idx = np.concatenate(train_parts)
    test_idx = np.concatenate(test_parts)
    return data.take(train_idx[rng.permutation(len(train_idx))]), data.take(
        test_idx[rng.permutation(len(test_idx))]
    )


def derive_run_seeds(master_seed: int, n_runs: int) -> list[int]:
    """Derive one independent 64-bit seed per run from a master seed.

    Pure function of (master_seed, run index): the list is the same
    regardless of execution order or platform.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    master = master_seed & 0xFFFFFFFFFFFFFFFF
    return [
        int(np.random.SeedSequence((master, k)).generate_state(1, np.uint64)[0])
        for k in range(n_runs)
    ]
