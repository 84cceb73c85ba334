"""Rectangular workspace, uniform square tiling and static occupancy.

Cells are addressed either by ``CellIndex(col, row)`` or, on hot paths, by a
flat row-major id ``row * cols + col``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import kernels
from .geometry import Point2, Segment2


class CellIndex(NamedTuple):
    col: int
    row: int


class MapFormatError(ValueError):
    def __init__(self, msg, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + msg)


@dataclass(frozen=True)
class Tiling:
    width: float
    height: float
    cell_size: float
    origin: Point2 = Point2(0.0, 0.0)

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0 and self.cell_size > 0):
            raise ValueError("workspace dimensions and cell size must be positive")

    @cached_property
    def cols(self) -> int:
        return math.ceil(self.width / self.cell_size)

    @cached_property
    def rows(self) -> int:
        return math.ceil(self.height / self.cell_size)

    @property
    def n_cells(self) -> int:
        return self.cols * self.rows

    def contains(self, p) -> bool:
        x = p[0] - self.origin.x
        y = p[1] - self.origin.y
        return 0.0 <= x <= self.width and 0.0 <= y <= self.height

    def cell_id(self, x: float, y: float) -> int:
        """Flat id of the cell holding (x, y); far-boundary points clamp inward."""
        c = int((x - self.origin.x) // self.cell_size)
        r = int((y - self.origin.y) // self.cell_size)
        if c >= self.cols:
            c = self.cols - 1
        elif c < 0:
            c = 0
        if r >= self.rows:
            r = self.rows - 1
        elif r < 0:
            r = 0
        return r * self.cols + c

    def flat(self, c: CellIndex) -> int:
        return c[1] * self.cols + c[0]

    def index(self, flat: int) -> CellIndex:
        return CellIndex(flat % self.cols, flat // self.cols)

    def centroid(self, flat: int) -> Point2:
        col = flat % self.cols
        row = flat // self.cols
        cs = self.cell_size
        return Point2(self.origin.x + (col + 0.5) * cs, self.origin.y + (row + 0.5) * cs)

    def block(self, flat: int, half: int) -> list[int]:
        """Flat ids of the in-bounds (2*half+1)^2 block around ``flat``, row-major."""
        col = flat % self.cols
        row = flat // self.cols
        c0 = max(col - half, 0)
        c1 = min(col + half, self.cols - 1)
        r0 = max(row - half, 0)
        r1 = min(row + half, self.rows - 1)
        cols = self.cols
        return [r * cols + c for r in range(r0, r1 + 1) for c in range(c0, c1 + 1)]

    @cached_property
    def _blocks3(self) -> list[list[int]]:
        return [self.block(i, 1) for i in range(self.n_cells)]

    def block3(self, flat: int) -> list[int]:
        return self._blocks3[flat]

    def cells_in_box(self, xmin, ymin, xmax, ymax) -> list[int]:
        """Flat ids of cells whose closed squares meet the box (clipped)."""
        cs = self.cell_size
        ox, oy = self.origin
        c0 = max(math.ceil((xmin - ox) / cs) - 1, 0)
        c1 = min(math.floor((xmax - ox) / cs), self.cols - 1)
        r0 = max(math.ceil((ymin - oy) / cs) - 1, 0)
        r1 = min(math.floor((ymax - oy) / cs), self.rows - 1)
        cols = self.cols
        return [r * cols + c for r in range(r0, r1 + 1) for c in range(c0, c1 + 1)]


def cell_of(t: Tiling, p) -> CellIndex:
    if not t.contains(p):
        raise ValueError(f"point {tuple(p)} lies outside the workspace")
    return t.index(t.cell_id(p[0], p[1]))


def neighborhood(t: Tiling, c: CellIndex, l: int) -> set[CellIndex]:
    if l < 1 or l % 2 == 0:
        raise ValueError(f"neighborhood size must be a positive odd integer, got {l}")
    return {t.index(f) for f in t.block(t.flat(c), (l - 1) // 2)}


@dataclass
class StaticMap:
    tiling: Tiling
    occupied: np.ndarray = field(default=None)  # uint8 [row, col]

    def __post_init__(self):
        shape = (self.tiling.rows, self.tiling.cols)
        if self.occupied is None:
            self.occupied = np.zeros(shape, dtype=np.uint8)
        else:
            self.occupied = np.ascontiguousarray(self.occupied, dtype=np.uint8)
            if self.occupied.shape != shape:
                raise ValueError(f"occupancy shape {self.occupied.shape} != {shape}")
        self._checker = None

    @classmethod
    def empty(cls, width, height, cell_size=1.0):
        return cls(Tiling(width, height, cell_size))

    def is_occupied(self, flat: int) -> bool:
        t = self.tiling
        return bool(self.occupied[flat // t.cols, flat % t.cols])

    def point_free(self, p) -> bool:
        t = self.tiling
        if not t.contains(p):
            return False
        return not self.is_occupied(t.cell_id(p[0], p[1]))

    def free_cells(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.occupied.ravel() == 0)]

    def checker(self, discs=(), backend=None):
        """A fresh edge checker over this map, with ``discs`` as extra blockers."""
        mod = kernels.get_backend(backend)
        t = self.tiling
        ch = mod.EdgeChecker(self.occupied, t.origin.x, t.origin.y, t.cell_size)
        ch.set_discs([(d.center[0], d.center[1], d.radius) for d in discs])
        return ch

    def inflated(self, radius: float) -> "StaticMap":
        """Copy with every cell within ``radius`` of an occupied cell marked occupied."""
        if radius <= 0:
            return StaticMap(self.tiling, self.occupied.copy())
        cs = self.tiling.cell_size
        k = math.ceil(radius / cs) + 1
        src = self.occupied.astype(bool)
        out = src.copy()
        rows, cols = src.shape
        for dr in range(-k, k + 1):
            for dc in range(-k, k + 1):
                gap = math.hypot(max(abs(dc) - 1, 0) * cs, max(abs(dr) - 1, 0) * cs)
                if gap >= radius or (dr == 0 and dc == 0):
                    continue
                shifted = np.zeros_like(src)
                ys = slice(max(dr, 0), rows + min(dr, 0))
                xs = slice(max(dc, 0), cols + min(dc, 0))
                yd = slice(max(-dr, 0), rows + min(-dr, 0))
                xd = slice(max(-dc, 0), cols + min(-dc, 0))
                shifted[ys, xs] = src[yd, xd]
                out |= shifted
        return StaticMap(self.tiling, out.astype(np.uint8))


def segment_blocked_static(m: StaticMap, s: Segment2) -> bool:
    if m._checker is None:
        m._checker = m.checker()
    return m._checker.static_blocked(s.a[0], s.a[1], s.b[0], s.b[1])


def parse_map(text: str) -> StaticMap:
    """Parse the plain-text map format (header line, then rows top-down in file
    order with the first grid line being row 0 at the bottom)."""
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise MapFormatError("empty map file", 1)
    parts = lines[0].split()
    if len(parts) != 3:
        raise MapFormatError("header must be 'width height cell_size'", 1, 1)
    try:
        width, height, cs = (float(v) for v in parts)
        tiling = Tiling(width, height, cs)
    except ValueError as exc:
        raise MapFormatError(f"bad header: {exc}", 1, 1) from None
    grid = lines[1:]
    if len(grid) != tiling.rows:
        raise MapFormatError(f"expected {tiling.rows} grid rows, found {len(grid)}", len(lines))
    occ = np.zeros((tiling.rows, tiling.cols), dtype=np.uint8)
    for r, row in enumerate(grid):
        row = row.rstrip("\r\n")
        if len(row) != tiling.cols:
            raise MapFormatError(f"expected {tiling.cols} cells, found {len(row)}", r + 2, 1)
        for c, ch in enumerate(row):
            if ch == "#":
                occ[r, c] = 1
            elif ch != ".":
                raise MapFormatError(f"unexpected character {ch!r}", r + 2, c + 1)
    return StaticMap(tiling, occ)


def format_map(m: StaticMap) -> str:
    t = m.tiling
    out = [f"{t.width:g} {t.height:g} {t.cell_size:g}"]
    for r in range(t.rows):
        out.append("".join("#" if v else "." for v in m.occupied[r]))
    return "\n".join(out) + "\n"


def load_map(path) -> StaticMap:
    return parse_map(Path(path).read_text())
