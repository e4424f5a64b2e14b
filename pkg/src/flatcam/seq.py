"""
Mask sequences and patterns
===========================

1-D pseudo-random sequences (maximum-length LFSR sequences) and 2-D mask
patterns built from them, plus the random, uniform and pinhole baselines
used when comparing mask designs.

Two representations are used throughout:

* ``signed``: entries in {-1, +1}. This is the mathematical form in which a
  separable mask is an outer product of two sign sequences.
* ``optical``: transmittance in [0, 1] (0 opaque, 1 transparent). The
  printable mask obtained from a signed one is ``(signed + 1) / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (
    BadFraction,
    NotMaximalLength,
    NotPowerOfTwo,
    ValidationError,
    WidthTooLarge,
    WrongForm,
    ZeroSeed,
)

SIGNED = "signed"
OPTICAL = "optical"

# Primitive polynomials over GF(2), bit i = coefficient of x**i.
PRIMITIVE_TAPS = {
    2: 0b111,  # x^2 + x + 1
    3: 0b1011,  # x^3 + x + 1
    4: 0b10011,  # x^4 + x + 1
    5: 0b100101,  # x^5 + x^2 + 1
    6: 0b1000011,  # x^6 + x + 1
    7: 0b10000011,  # x^7 + x + 1
    8: 0x11D,  # x^8 + x^4 + x^3 + x^2 + 1
    9: 0x211,  # x^9 + x^4 + 1
    10: 0x409,  # x^10 + x^3 + 1
    11: 0x805,  # x^11 + x^2 + 1
    12: 0x1053,  # x^12 + x^6 + x^4 + x + 1
    13: 0x201B,  # x^13 + x^4 + x^3 + x + 1
    14: 0x4443,  # x^14 + x^10 + x^6 + x + 1
    15: 0x8003,  # x^15 + x + 1
    16: 0x1100B,  # x^16 + x^12 + x^3 + x + 1
}


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SignSequence:
    """A 1-D pattern of +1/-1 entries, the factor of a separable mask."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 1 or v.size == 0:
            raise ValidationError("SignSequence must be a non-empty 1-D array")
        if not np.all(np.abs(v) == 1):
            raise ValidationError("SignSequence entries must be exactly +1 or -1")
        object.__setattr__(self, "values", _frozen(v.astype(np.int8)))

    @property
    def length(self) -> int:
        return int(self.values.size)

    def __len__(self):
        return self.length

    def to_optical(self) -> np.ndarray:
        """0/1 transmittance of the sequence (+1 -> open)."""
        return (self.values.astype(float) + 1.0) / 2.0

    def tile(self, repeats: int) -> "SignSequence":
        return SignSequence(np.tile(self.values, repeats))

    def autocorrelation(self) -> np.ndarray:
        """Periodic autocorrelation for every lag 0..length-1 (exact integers)."""
        s = self.values.astype(np.int64)
        return np.array([int(np.dot(s, np.roll(s, -k))) for k in range(s.size)])


@dataclass(frozen=True)
class MaskPattern:
    """Mask transmittance in signed or optical form.

    ``factors`` holds the two 1-D factors when the pattern was built as an
    outer product; they are kept after conversion to optical form even
    though the optical mask itself is no longer separable.
    """

    transmittance: np.ndarray
    form: str
    feature_size_um: Optional[float] = None
    factors: Optional[Tuple[np.ndarray, np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self):
        t = np.asarray(self.transmittance, dtype=float)
        if t.ndim not in (1, 2) or t.size == 0:
            raise ValidationError("mask transmittance must be a non-empty 1-D or 2-D array")
        if self.form == SIGNED:
            if not np.all(np.abs(t) == 1):
                raise ValidationError("signed mask entries must be exactly +1 or -1")
        elif self.form == OPTICAL:
            if not np.all((t >= 0) & (t <= 1)):
                raise ValidationError("optical mask entries must lie in [0, 1]")
        else:
            raise ValidationError(f"unknown mask form {self.form!r}")
        if self.feature_size_um is not None and not self.feature_size_um > 0:
            raise ValidationError("feature_size_um must be positive")
        object.__setattr__(self, "transmittance", _frozen(t))
        if self.factors is not None:
            a, b = (np.asarray(f, dtype=float) for f in self.factors)
            object.__setattr__(self, "factors", (_frozen(a), _frozen(b)))

    @property
    def shape(self):
        return self.transmittance.shape

    @property
    def is_separable(self) -> bool:
        """True when the transmittance is exactly the outer product of the factors."""
        if self.factors is None:
            return False
        return bool(np.array_equal(np.outer(*self.factors), self.transmittance))

    def open_fraction(self) -> float:
        """Fraction of fully/partly open area (mean optical transmittance)."""
        t = self.transmittance if self.form == OPTICAL else (self.transmittance + 1) / 2
        return float(t.mean())

    def with_feature_size(self, feature_size_um: float) -> "MaskPattern":
        return MaskPattern(self.transmittance, self.form, feature_size_um, self.factors)


SequenceLike = Union[SignSequence, np.ndarray, Sequence[float]]


def _as_vector(seq: SequenceLike) -> np.ndarray:
    if isinstance(seq, SignSequence):
        return seq.values.astype(float)
    v = np.asarray(seq, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValidationError("expected a non-empty 1-D sequence")
    return v


def gen_m_sequence(degree: int = 8, taps: Optional[int] = None, seed_state: Optional[int] = None) -> SignSequence:
    """Maximum-length sequence from a Fibonacci LFSR.

    Parameters
    ----------
    degree : int
        Register length r, 2 <= r <= 16. The sequence has length 2**r - 1.
    taps : int, optional
        Feedback polynomial as a bitmask (bit i = coefficient of x**i); bit
        ``degree`` must be set. Defaults to the entry of ``PRIMITIVE_TAPS``.
    seed_state : int, optional
        Initial register contents, bit i = s[i]. Defaults to all ones.

    Returns
    -------
    SignSequence
        Bit 1 maps to +1 and bit 0 to -1.

    Raises
    ------
    ZeroSeed
        If the seed state is zero.
    NotMaximalLength
        If the register state repeats before 2**r - 1 steps.
    """
    if not 2 <= degree <= 16:
        raise ValidationError("degree must be in [2, 16]")
    if taps is None:
        taps = PRIMITIVE_TAPS[degree]
    if taps >> degree != 1:
        raise ValidationError(f"taps {taps:#x} does not encode a degree-{degree} polynomial")
    mask = (1 << degree) - 1
    if seed_state is None:
        seed_state = mask
    if seed_state & mask == 0:
        raise ZeroSeed("LFSR seed state must be nonzero")
    state = seed_state & mask
    start = state
    feedback = taps & mask
    period = mask
    bits = np.empty(period, dtype=np.int8)
    for n in range(period):
        bits[n] = state & 1
        # s[n + r] = sum_i c_i s[n + i] (mod 2)
        fb = bin(state & feedback).count("1") & 1
        state = (state >> 1) | (fb << (degree - 1))
        if state == start and n < period - 1:
            raise NotMaximalLength(
                f"LFSR with taps {taps:#x} has period {n + 1} < {period}"
            )
    if state != start:
        raise NotMaximalLength(f"LFSR with taps {taps:#x} did not return to its seed after {period} steps")
    return SignSequence(2 * bits - 1)


def outer_mask(row_seq: SequenceLike, col_seq: SequenceLike, repeats: int = 1,
               feature_size_um: Optional[float] = None) -> MaskPattern:
    """Signed separable mask ``M[i, j] = row_seq[i] * col_seq[j]``.

    ``row_seq`` is indexed by the mask row (the vertical profile) and
    ``col_seq`` by the mask column. Each factor is tiled ``repeats`` times
    before the outer product.
    """
    if repeats < 1:
        raise ValidationError("repeats must be a positive integer")
    a = np.tile(_as_vector(row_seq), repeats)
    b = np.tile(_as_vector(col_seq), repeats)
    return MaskPattern(np.outer(a, b), SIGNED, feature_size_um, (a, b))


def to_optical(mask: MaskPattern) -> MaskPattern:
    """Printable 0/1 mask ``(signed + 1) / 2``; the factors are kept for reference."""
    if mask.form != SIGNED:
        raise WrongForm("to_optical expects a signed mask")
    return MaskPattern((mask.transmittance + 1.0) / 2.0, OPTICAL, mask.feature_size_um, mask.factors)


def to_signed(mask: MaskPattern) -> MaskPattern:
    """Inverse of :func:`to_optical` for binary optical masks."""
    if mask.form != OPTICAL:
        raise WrongForm("to_signed expects an optical mask")
    return MaskPattern(2.0 * mask.transmittance - 1.0, SIGNED, mask.feature_size_um, mask.factors)


def gen_hadamard(order: int) -> np.ndarray:
    """Sylvester Hadamard matrix of the given power-of-two order (int64 entries)."""
    if order < 1 or order & (order - 1):
        raise NotPowerOfTwo(f"Hadamard order must be a power of two, got {order}")
    h = np.ones((1, 1), dtype=np.int64)
    while h.shape[0] < order:
        h = np.block([[h, h], [h, -h]])
    return h


def gen_random_binary(n: Union[int, Tuple[int, int]], open_fraction: float = 0.5,
                      rng_seed: int = 0) -> Union[SignSequence, MaskPattern]:
    """Random binary pattern with exactly ``floor(open_fraction * size)`` open features.

    An integer ``n`` gives a :class:`SignSequence` (open -> +1); a shape
    tuple gives an optical, non-separable :class:`MaskPattern`.
    """
    if not 0 < open_fraction < 1:
        raise BadFraction("open_fraction must lie strictly between 0 and 1")
    shape = (n,) if np.isscalar(n) else tuple(n)
    size = int(np.prod(shape))
    if size < 1:
        raise ValidationError("pattern size must be at least 1")
    k = int(np.floor(open_fraction * size))
    bits = np.zeros(size, dtype=np.int8)
    bits[:k] = 1
    bits = np.random.default_rng(rng_seed).permutation(bits)
    if len(shape) == 1:
        return SignSequence(2 * bits - 1)
    return MaskPattern(bits.reshape(shape).astype(float), OPTICAL)


def gen_uniform_random(n: Union[int, Tuple[int, int]], rng_seed: int = 0) -> MaskPattern:
    """Optical pattern with transmittance drawn uniformly from [0, 1]."""
    shape = (n,) if np.isscalar(n) else tuple(n)
    if int(np.prod(shape)) < 1:
        raise ValidationError("pattern size must be at least 1")
    return MaskPattern(np.random.default_rng(rng_seed).uniform(0.0, 1.0, size=shape), OPTICAL)


def gen_pinhole(n: int, width_features: int = 1) -> MaskPattern:
    """1-D opaque pattern with a centered open block of ``width_features``."""
    if n < 1 or width_features < 1:
        raise ValidationError("n and width_features must be positive")
    if width_features > n:
        raise WidthTooLarge(f"pinhole width {width_features} exceeds pattern length {n}")
    t = np.zeros(n)
    start = (n - width_features) // 2
    t[start:start + width_features] = 1.0
    return MaskPattern(t, OPTICAL)
