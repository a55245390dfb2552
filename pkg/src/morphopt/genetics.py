"""Binary chromosomes and the genetic operators acting on them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import GRID_MAX_INDEX, N_AXES

GENE_BITS = 7
CHROMOSOME_LENGTH = N_AXES * GENE_BITS
GENE_CODINGS = ("gray", "binary")


def gray_encode(value: int) -> int:
    return value ^ (value >> 1)


def gray_decode(code: int) -> int:
    value = 0
    while code:
        value ^= code
        code >>= 1
    return value


@dataclass(frozen=True, order=True)
class Chromosome:
    """Fixed-length bit string: three big-endian 7-bit genes, one per angle index.

    Gene values range over ``0..127``; anything above 64 has no grid point and
    such chromosomes are inadmissible. Genes are reflected-Gray coded by
    default so neighbouring grid indices differ in a single bit; pass
    ``coding="binary"`` for plain positional binary.
    """

    bits: tuple[int, ...]

    def __post_init__(self):
        if len(self.bits) != CHROMOSOME_LENGTH:
            raise ValueError(f"chromosome must have {CHROMOSOME_LENGTH} bits, got {len(self.bits)}")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("chromosome bits must be 0 or 1")

    @classmethod
    def from_array(cls, array) -> "Chromosome":
        return cls(tuple(int(b) for b in np.asarray(array).ravel()))

    @classmethod
    def from_string(cls, text: str) -> "Chromosome":
        return cls(tuple(int(c) for c in text))

    @classmethod
    def encode(cls, indices, coding: str = "gray") -> "Chromosome":
        _check_coding(coding)
        bits: list[int] = []
        for value in indices:
            value = int(value)
            if not 0 <= value < 2**GENE_BITS:
                raise ValueError(f"gene value {value} does not fit in {GENE_BITS} bits")
            if coding == "gray":
                value = gray_encode(value)
            bits.extend((value >> (GENE_BITS - 1 - k)) & 1 for k in range(GENE_BITS))
        return cls(tuple(bits))

    def genes(self, coding: str = "gray") -> tuple[int, int, int]:
        _check_coding(coding)
        values = []
        for g in range(N_AXES):
            chunk = self.bits[g * GENE_BITS:(g + 1) * GENE_BITS]
            code = int("".join(map(str, chunk)), 2)
            values.append(gray_decode(code) if coding == "gray" else code)
        return tuple(values)

    def on_grid(self, coding: str = "gray") -> bool:
        return all(v <= GRID_MAX_INDEX for v in self.genes(coding))

    def to_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=np.uint8)

    def __str__(self) -> str:
        return "".join(map(str, self.bits))


def _check_coding(coding: str) -> None:
    if coding not in GENE_CODINGS:
        raise ValueError(f"unknown gene coding {coding!r}; expected one of {GENE_CODINGS}")


def crossover(parent_a: Chromosome, parent_b: Chromosome, rng: np.random.Generator,
              n_points: int = 4) -> Chromosome:
    """Multi-point crossover with per-segment fair inheritance.

    ``n_points`` distinct cuts are drawn from the interior boundaries, and each
    of the resulting ``n_points + 1`` segments is copied from either parent with
    probability 1/2.
    """
    length = len(parent_a.bits)
    if len(parent_b.bits) != length:
        raise ValueError("parents differ in length")
    if not 0 <= n_points < length:
        raise ValueError(f"n_points must lie in [0, {length - 1}]")
    cuts = np.sort(rng.choice(np.arange(1, length), size=n_points, replace=False))
    from_a = rng.random(n_points + 1) < 0.5
    a, b = parent_a.to_array(), parent_b.to_array()
    child = np.empty(length, dtype=np.uint8)
    bounds = np.concatenate(([0], cuts, [length]))
    for seg, (lo, hi) in enumerate(zip(bounds[:-1], bounds[1:])):
        child[lo:hi] = a[lo:hi] if from_a[seg] else b[lo:hi]
    return Chromosome.from_array(child)


def mutate(chromosome: Chromosome, rate: float, rng: np.random.Generator) -> Chromosome:
    """Flip each bit independently with probability ``rate``."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"mutation rate must be in [0, 1], got {rate}")
    bits = chromosome.to_array()
    flips = rng.random(bits.size) < rate
    return Chromosome.from_array(bits ^ flips.astype(np.uint8))
