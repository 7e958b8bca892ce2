"""Exact sphere-packing arithmetic for binary codebooks.

Everything here runs on arbitrary-precision Python integers: the feasibility
test is evaluated as ``num_classes * volume <= alphabet**bits`` with no
division and no floating point, so boundary cases are decided exactly even
at 64 bits and beyond.

The quantity this module ultimately produces is a pair of inner-product
margins for a hinge loss: the positive margin equals the code length (same
class means identical codes), and the negative margin is placed so that two
codes from different classes are only penalized while their Hamming distance
is below the first separation the sphere-packing bound rules out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "BoundProblem",
    "MarginSet",
    "binomial",
    "sphere_volume",
    "bound_holds",
    "solve_target_distance",
    "derive_margins",
    "margins_from_negative",
]


def binomial(n: int, k: int) -> int:
    """Exact C(n, k) as an arbitrary-precision integer.

    ``k > n`` yields 0 (no ways to choose); negative arguments are rejected.
    """
    if n < 0 or k < 0:
        raise ValueError("binomial arguments must be nonnegative")
    return math.comb(n, k)


def sphere_volume(code_bits: int, distance: int, alphabet_size: int = 2) -> int:
    """Number of words within the packing radius of one codeword.

    For codewords of length ``code_bits`` and a minimum distance ``distance``,
    the packing radius is floor((distance - 1) / 2) and the volume is

        sum_{i=0}^{radius} C(code_bits, i) * (alphabet_size - 1)**i

    computed exactly.
    """
    if code_bits < 1:
        raise ValueError("code_bits must be >= 1")
    if distance < 1:
        raise ValueError("distance must be >= 1")
    if alphabet_size < 2:
        raise ValueError("alphabet_size must be >= 2")
    radius = (distance - 1) // 2
    return sum(
        binomial(code_bits, i) * (alphabet_size - 1) ** i for i in range(radius + 1)
    )


@dataclass(frozen=True)
class BoundProblem:
    """A codebook-size question: how far apart can num_classes codewords be?"""

    code_bits: int
    num_classes: int
    alphabet_size: int = 2

    def __post_init__(self) -> None:
        if self.code_bits < 1:
            raise ValueError("code_bits must be >= 1")
        if self.num_classes < 2:
            raise ValueError(
                "num_classes must be >= 2; minimum distance is undefined "
                "for a single codeword"
            )
        if self.alphabet_size < 2:
            raise ValueError("alphabet_size must be >= 2")
        if self.num_classes > self.alphabet_size**self.code_bits:
            raise ValueError(
                f"cannot place {self.num_classes} distinct codewords in "
                f"{self.alphabet_size}**{self.code_bits} words"
            )


def bound_holds(problem: BoundProblem, distance: int) -> bool:
    """Whether a codebook of that size and minimum distance can exist.

    Exact integer form of the packing condition:

        num_classes * sphere_volume(bits, distance) <= alphabet**bits

    A ``True`` result is necessary for the codebook to exist, not sufficient.
    """
    if distance < 1:
        raise ValueError("distance must be >= 1")
    lhs = problem.num_classes * sphere_volume(
        problem.code_bits, distance, problem.alphabet_size
    )
    return lhs <= problem.alphabet_size**problem.code_bits


def solve_target_distance(problem: BoundProblem) -> int:
    """Smallest distance the packing bound rules out, clamped to the length.

    Scans d = 1, 2, ... accumulating the sphere volume incrementally; the
    volume grows only at odd d (where the radius increments), so the first
    infeasible d, if any, is odd.  The bound always holds at d = 1 for a
    valid problem, and always fails by d = 2*code_bits + 1, so the scan
    terminates.  When the unclamped answer exceeds the code length (small
    codebooks), the result is clamped to ``code_bits``: distances beyond the
    length are unreachable and the clamp keeps the derived negative margin
    at or above the minimum attainable inner product.
    """
    bits = problem.code_bits
    space = problem.alphabet_size**bits
    weight = problem.alphabet_size - 1
    volume = 1  # radius-0 sphere
    radius = 0
    d = 1
    while problem.num_classes * volume <= space:
        d += 1
        if d > bits:
            return bits
        new_radius = (d - 1) // 2
        if new_radius > radius:
            radius = new_radius
            volume += binomial(bits, radius) * weight**radius
    return d


@dataclass(frozen=True)
class MarginSet:
    """Inner-product margins for the pairwise hinge loss.

    ``target_distance`` is the separation the loss pushes dissimilar pairs
    toward; ``positive_margin`` equals the code length; ``negative_margin``
    is ``code_length - 2 * target_distance``, the inner product two codes
    have when exactly ``target_distance`` bits apart.
    """

    target_distance: int
    positive_margin: int
    negative_margin: int

    def __post_init__(self) -> None:
        if self.target_distance < 1:
            raise ValueError("target_distance must be >= 1")
        if self.target_distance > self.positive_margin:
            raise ValueError("target_distance cannot exceed the code length")
        if self.positive_margin - self.negative_margin != 2 * self.target_distance:
            raise ValueError(
                "margins must satisfy positive - negative == 2 * target_distance"
            )

    @property
    def code_bits(self) -> int:
        return self.positive_margin


def derive_margins(problem: BoundProblem) -> MarginSet:
    """Margins implied by the packing bound for (code_bits, num_classes)."""
    target = solve_target_distance(problem)
    return MarginSet(
        target_distance=target,
        positive_margin=problem.code_bits,
        negative_margin=problem.code_bits - 2 * target,
    )


def margins_from_negative(code_bits: int, negative_margin: int) -> MarginSet:
    """MarginSet with an explicitly chosen negative margin (for sweeps).

    The value must share the code length's parity and lie in
    [-code_bits, code_bits - 2] so the implied target distance is a valid
    Hamming distance.
    """
    if (code_bits - negative_margin) % 2 != 0:
        raise ValueError(
            f"negative margin {negative_margin} has wrong parity for "
            f"{code_bits}-bit codes (code_bits - margin must be even)"
        )
    target = (code_bits - negative_margin) // 2
    if not 1 <= target <= code_bits:
        raise ValueError(
            f"negative margin {negative_margin} is outside [-{code_bits}, "
            f"{code_bits - 2}]"
        )
    return MarginSet(
        target_distance=target,
        positive_margin=code_bits,
        negative_margin=negative_margin,
    )
