"""Canonical response functions of binary margin models.

Every margin variable gets the exhaustive space of boolean functions of its
within-margin parents; with margins fully connected in causal order, the
variable at position t has k = t parents and 2**(2**t) candidate functions.

Encoding conventions (fixed here, relied on everywhere else):

* truth table: bit c of the function index is the output for parent
  configuration c, with c = sum(parent_values[t] << t) over parents in
  ascending variable order (bit 0 = all-zeros configuration);
* joint response index: mixed radix over the margin's variables with the
  first (causally earliest) variable's digit least significant.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import RegimeOutsideMarginError, TooLargeError, UnsupportedArityError
from .model import MarginSpec, Regime

MAX_PARENTS = 5
MAX_BLOCK_SIZE = 1 << 20  # enumeration guard for joint response spaces


def response_space_size(k: int) -> int:
    """Number of boolean functions of k binary inputs: 2**(2**k)."""
    if k < 0:
        raise ValueError("parent count must be nonnegative")
    if k > MAX_PARENTS:
        raise UnsupportedArityError(
            f"{k} parents would need 2**{1 << k} function indices; supported maximum is {MAX_PARENTS}"
        )
    return 1 << (1 << k)


def eval_response(function_index: int, parent_values: Sequence[int]) -> int:
    """Output bit of the function for the given parent values."""
    c = 0
    for t, v in enumerate(parent_values):
        if v:
            c |= 1 << t
    return (function_index >> c) & 1


@dataclass(frozen=True)
class ResponseSpace:
    """Joint response-function index space of one margin."""

    margin: MarginSpec
    per_var_parent_counts: tuple[int, ...]
    per_var_radix: tuple[int, ...]
    total_size: int

    @classmethod
    def for_margin(cls, margin: MarginSpec) -> "ResponseSpace":
        counts = tuple(range(margin.size))  # position t has t within-margin parents
        radixes = tuple(response_space_size(k) for k in counts)
        total = 1
        for r in radixes:
            total *= r
        return cls(margin, counts, radixes, total)

    def strides(self) -> tuple[int, ...]:
        out = []
        s = 1
        for r in self.per_var_radix:
            out.append(s)
            s *= r
        return tuple(out)

    def decode(self, value: int) -> tuple[int, ...]:
        """Per-variable function indices of a joint index (first var first)."""
        digits = []
        for r in self.per_var_radix:
            digits.append(value % r)
            value //= r
        return tuple(digits)

    def encode(self, digits: Sequence[int]) -> int:
        value = 0
        for d, s, r in zip(digits, self.strides(), self.per_var_radix):
            if not 0 <= d < r:
                raise ValueError(f"digit {d} outside radix {r}")
            value += d * s
        return value


def propagate(r: int, margin: MarginSpec, regime: Regime) -> tuple[int, ...]:
    """Deterministic margin outcome implied by joint response index ``r``.

    Visits margin variables in causal order: intervened ones take their
    forced value, the rest evaluate their decoded response function on the
    already-computed values of the preceding margin variables.
    """
    _check_regime(margin, regime)
    space = ResponseSpace.for_margin(margin)
    digits = space.decode(r)
    values: list[int] = []
    for pos, v in enumerate(margin.vars):
        forced = regime.value_of(v)
        if forced is not None:
            values.append(forced)
        else:
            values.append(eval_response(digits[pos], values))
    return tuple(values)


def _check_regime(margin: MarginSpec, regime: Regime) -> None:
    outside = [v for v in regime.vars if v not in margin.vars]
    if outside:
        raise RegimeOutsideMarginError(
            f"regime {regime.label()} intervenes outside margin {margin.label()}"
        )


@lru_cache(maxsize=None)
def outcome_codes(margin: MarginSpec, regime: Regime) -> np.ndarray:
    """Margin outcomes for every joint response index, as little-endian codes.

    Entry r = sum(value_of_position_t << t) for the assignment propagate(r)
    produces.  Cached; the array is read-only.
    """
    _check_regime(margin, regime)
    space = ResponseSpace.for_margin(margin)
    if space.total_size > MAX_BLOCK_SIZE:
        raise TooLargeError(
            f"margin {margin.label()} has {space.total_size} joint response indices; "
            f"enumeration is capped at {MAX_BLOCK_SIZE}"
        )
    r = np.arange(space.total_size, dtype=np.int64)
    strides = space.strides()
    # codes accumulates bits 0..pos-1, which is exactly the parent configuration
    # for the variable at position pos
    codes = np.zeros(space.total_size, dtype=np.int64)
    for pos, v in enumerate(margin.vars):
        forced = regime.value_of(v)
        if forced is not None:
            vals = np.full(space.total_size, forced, dtype=np.int64)
        else:
            digits = (r // strides[pos]) % space.per_var_radix[pos]
            vals = (digits >> codes) & 1
        codes |= vals << pos
    codes.flags.writeable = False
    return codes


def margin_event_code(margin: MarginSpec, event: dict[int, int]) -> tuple[int, int]:
    """(mask, want) over margin positions for a partial margin assignment."""
    mask = 0
    want = 0
    for v, b in event.items():
        pos = margin.position_of(v)
        mask |= 1 << pos
        if b:
            want |= 1 << pos
    return mask, want
