"""Flat parameter storage with a named layout."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

Layout = tuple[tuple[str, tuple[int, ...]], ...]


def _normalize_layout(layout: Iterable[tuple[str, Sequence[int]]]) -> Layout:
    out = []
    seen = set()
    for name, shape in layout:
        shape = tuple(int(s) for s in shape)
        if any(s < 0 for s in shape):
            raise ValueError(f"negative dimension in layout entry {name!r}: {shape}")
        if name in seen:
            raise ValueError(f"duplicate layout entry {name!r}")
        seen.add(name)
        out.append((str(name), shape))
    return tuple(out)


def layout_size(layout: Layout) -> int:
    return int(sum(int(np.prod(shape)) for _, shape in layout))


class ParamVector:
    """A float64 vector whose slices are named, shaped parameter blocks.

    Arithmetic (``+``, ``-``, scalar ``*``) produces new vectors and never
    changes the layout. Two vectors are compatible iff their layouts are equal.
    """

    __slots__ = ("_values", "_layout", "_offsets")

    def __init__(self, values, layout):
        layout = _normalize_layout(layout)
        values = np.array(values, dtype=np.float64, copy=True).reshape(-1)
        n = layout_size(layout)
        if values.size != n:
            raise ValueError(f"layout describes {n} values but got {values.size}")
        self._values = values
        self._layout = layout
        offsets = {}
        pos = 0
        for name, shape in layout:
            size = int(np.prod(shape))
            offsets[name] = (pos, pos + size, shape)
            pos += size
        self._offsets = offsets

    def _new(self, values: np.ndarray) -> "ParamVector":
        # values must be a fresh float64 array of the right size
        out = object.__new__(ParamVector)
        out._values = values
        out._layout = self._layout
        out._offsets = self._offsets
        return out

    @classmethod
    def zeros(cls, layout) -> "ParamVector":
        layout = _normalize_layout(layout)
        return cls(np.zeros(layout_size(layout)), layout)

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def layout(self) -> Layout:
        return self._layout

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self._layout]

    def __len__(self) -> int:
        return self._values.size

    def view(self, name: str) -> np.ndarray:
        """Shaped view into the block ``name`` (writes go through)."""
        start, stop, shape = self._offsets[name]
        return self._values[start:stop].reshape(shape)

    def span(self, first: str, last: str) -> np.ndarray:
        """Flat view covering the blocks from ``first`` through ``last``."""
        return self._values[self._offsets[first][0]:self._offsets[last][1]]

    def copy(self) -> "ParamVector":
        return self._new(self._values.copy())

    def zeros_like(self) -> "ParamVector":
        return self._new(np.zeros_like(self._values))

    def with_values(self, values) -> "ParamVector":
        """New vector with this layout and the given flat values (copied)."""
        values = np.array(values, dtype=np.float64, copy=True).reshape(-1)
        if values.size != self._values.size:
            raise ValueError(f"expected {self._values.size} values, got {values.size}")
        return self._new(values)

    def _check(self, other: "ParamVector") -> None:
        if not isinstance(other, ParamVector):
            raise TypeError(f"expected ParamVector, got {type(other).__name__}")
        if other._layout != self._layout:
            raise ValueError("ParamVector layouts differ")

    def __add__(self, other: "ParamVector") -> "ParamVector":
        self._check(other)
        return self._new(self._values + other._values)

    def __sub__(self, other: "ParamVector") -> "ParamVector":
        self._check(other)
        return self._new(self._values - other._values)

    def __mul__(self, c: float) -> "ParamVector":
        return self._new(self._values * float(c))

    __rmul__ = __mul__

    def __neg__(self) -> "ParamVector":
        return self._new(-self._values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParamVector):
            return NotImplemented
        return self._layout == other._layout and np.array_equal(self._values, other._values)

    __hash__ = None

    def __repr__(self) -> str:
        return f"ParamVector(n={self._values.size}, blocks={len(self._layout)})"


# Gradients share the parameter layout and arithmetic.
GradVector = ParamVector


def add(a: ParamVector, b: ParamVector) -> ParamVector:
    return a + b


def sub(a: ParamVector, b: ParamVector) -> ParamVector:
    return a - b


def scale(a: ParamVector, c: float) -> ParamVector:
    return a * c


def l2_norm_sq(a: ParamVector) -> float:
    v = a.values
    return float(v @ v)
