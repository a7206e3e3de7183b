"""Rectangular phase-space grids and their CSV serialization.

A grid stores samples of a phase-space function over the complex plane,
alpha = x + i*y, on a uniform rectangular lattice.  Wigner grids follow the
normalization (1/pi) * integral W d^2alpha = 1, so the vacuum peaks at
W(0) = 2.  Characteristic-function grids hold complex samples.

File format (one grid per file):

    # x_min,x_max,nx,y_min,y_max,ny,kind
    x,y,value
    ...

with x varying fastest (row-major over (y, x)) and 17 significant digits,
enough for doubles to round-trip exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

WIGNER_NORMALIZATION = "(1/pi) int W d2alpha = 1"

_KINDS = ("wigner", "chi")


@dataclass(frozen=True)
class GridSpec:
    """Extents and resolution of a rectangular alpha-plane lattice."""

    x_min: float
    x_max: float
    nx: int
    y_min: float
    y_max: float
    ny: int

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise DomainError("grids need at least 2 points per axis")
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise DomainError("grid extents must be increasing")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.ny)

    @classmethod
    def square(cls, half_width: float, n: int) -> "GridSpec":
        return cls(-half_width, half_width, n, -half_width, half_width, n)


def parse_grid_spec(text: str) -> GridSpec:
    """Parse 'x0:x1:nx' (square) or 'x0:x1:nx,y0:y1:ny'."""
    try:
        parts = text.split(",")
        if len(parts) == 1:
            lo, hi, n = parts[0].split(":")
            return GridSpec(float(lo), float(hi), int(n), float(lo), float(hi), int(n))
        if len(parts) == 2:
            xlo, xhi, nx = parts[0].split(":")
            ylo, yhi, ny = parts[1].split(":")
            return GridSpec(float(xlo), float(xhi), int(nx), float(ylo), float(yhi), int(ny))
    except ValueError as exc:
        raise DomainError(f"bad grid spec {text!r}: {exc}") from None
    raise DomainError(f"bad grid spec {text!r}")


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Samples of a Wigner function or characteristic function on a lattice.

    values has shape (ny, nx); values[j, i] is the sample at
    (x_i, y_j) = (x_min + i*dx, y_min + j*dy).
    """

    x_min: float
    x_max: float
    nx: int
    y_min: float
    y_max: float
    ny: int
    kind: str
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown grid kind {self.kind!r}")
        if self.nx < 2 or self.ny < 2:
            raise DomainError("grids need at least 2 points per axis")
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise DomainError("grid extents must be increasing")
        vals = np.asarray(self.values)
        if vals.shape != (self.ny, self.nx):
            raise DomainError(
                f"values shape {vals.shape} does not match (ny, nx)=({self.ny}, {self.nx})"
            )
        object.__setattr__(self, "values", vals)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.ny)

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y)

    def alpha(self) -> np.ndarray:
        """Complex sample points, shape (ny, nx)."""
        gx, gy = self.meshgrid()
        return gx + 1j * gy

    def cell_area(self) -> float:
        dx = (self.x_max - self.x_min) / (self.nx - 1)
        dy = (self.y_max - self.y_min) / (self.ny - 1)
        return dx * dy

    def normalization(self) -> float:
        """(1/pi) * trapezoid integral of the samples (real part)."""
        trapz = getattr(np, "trapezoid", None) or np.trapz
        w = np.real(self.values)
        return float(trapz(trapz(w, self.x, axis=1), self.y) / np.pi)

    def section_y0(self) -> np.ndarray:
        """The row nearest y = 0 (useful for axis cuts)."""
        j = int(np.argmin(np.abs(self.y)))
        return self.values[j, :]

    def to_csv(self, path) -> None:
        write_grid_csv(self, path)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _fmt_value(v, kind: str) -> str:
    if kind == "chi":
        c = complex(v)
        return f"{_fmt(c.real)}{'+' if c.imag >= 0 else '-'}{_fmt(abs(c.imag))}j"
    return _fmt(np.real(v))


def write_grid_csv(grid: PhaseSpaceGrid, path) -> None:
    xs = grid.x
    ys = grid.y
    lines = [
        "# {},{},{},{},{},{},{}".format(
            _fmt(grid.x_min), _fmt(grid.x_max), grid.nx,
            _fmt(grid.y_min), _fmt(grid.y_max), grid.ny, grid.kind,
        ),
        "x,y,value",
    ]
    for j in range(grid.ny):
        for i in range(grid.nx):
            lines.append(
                f"{_fmt(xs[i])},{_fmt(ys[j])},{_fmt_value(grid.values[j, i], grid.kind)}"
            )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_grid_csv(path) -> PhaseSpaceGrid:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("# "):
            raise DomainError(f"{path}: missing grid header")
        parts = header[2:].split(",")
        if len(parts) != 7:
            raise DomainError(f"{path}: malformed grid header {header!r}")
        x_min, x_max = float(parts[0]), float(parts[1])
        nx = int(parts[2])
        y_min, y_max = float(parts[3]), float(parts[4])
        ny = int(parts[5])
        kind = parts[6]
        columns = fh.readline().strip()
        if columns != "x,y,value":
            raise DomainError(f"{path}: expected column line 'x,y,value'")
        dtype = complex if kind == "chi" else float
        values = np.empty((ny, nx), dtype=dtype)
        count = 0
        for line in fh:
            line = line.strip()
            if not line:
                continue
            x_s, y_s, v_s = line.split(",")
            j, i = divmod(count, nx)
            values[j, i] = complex(v_s) if kind == "chi" else float(v_s)
            count += 1
    if count != nx * ny:
        raise DomainError(f"{path}: expected {nx * ny} rows, found {count}")
    return PhaseSpaceGrid(x_min, x_max, nx, y_min, y_max, ny, kind, values)
