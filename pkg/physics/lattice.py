"""Rectangular lattice geometry and the snake ordering onto a 1D chain.

The snake starts at (0, 0) and runs left-to-right on even rows and
right-to-left on odd rows. Chain indices are the site identity everywhere
downstream; (row, col) pairs are only a view.
"""

from dataclasses import dataclass
from typing import List, Tuple

from utils.errors import DomainError


Bond = Tuple[int, int]


@dataclass(frozen=True)
class LatticeGeometry:
    """Open-boundary rows x cols lattice."""

    rows: int
    cols: int

    def __post_init__(self):
        for name in ("rows", "cols"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise DomainError(f"{name} must be a positive integer, got {value!r}")

    @property
    def num_sites(self) -> int:
        return self.rows * self.cols

    @property
    def label(self) -> str:
        return f"{self.rows}x{self.cols}"

    def snake_index(self, row: int, col: int) -> int:
        """
        Map lattice coordinates to the chain index.

        Args:
            row: Row in [0, rows)
            col: Column in [0, cols)

        Returns:
            Chain index in [0, N)
        """
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise DomainError(f"({row}, {col}) outside {self.label} lattice")
        if row % 2 == 0:
            return row * self.cols + col
        return row * self.cols + (self.cols - 1 - col)

    def coordinates(self, index: int) -> Tuple[int, int]:
        """Inverse of snake_index."""
        self._check_site(index)
        row, offset = divmod(index, self.cols)
        col = offset if row % 2 == 0 else self.cols - 1 - offset
        return row, col

    def bonds(self) -> List[Bond]:
        """
        Nearest-neighbour bonds in chain indices.

        Returns:
            Sorted list of (i, j) pairs with i < j, each unordered pair once.
        """
        pairs = []
        for row in range(self.rows):
            for col in range(self.cols):
                here = self.snake_index(row, col)
                if col + 1 < self.cols:
                    pairs.append(_ordered(here, self.snake_index(row, col + 1)))
                if row + 1 < self.rows:
                    pairs.append(_ordered(here, self.snake_index(row + 1, col)))
        return sorted(pairs)

    def neighbors(self, site: int) -> List[int]:
        """Chain indices of the lattice neighbours of a site."""
        row, col = self.coordinates(site)
        result = []
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            r, c = row + dr, col + dc
            if 0 <= r < self.rows and 0 <= c < self.cols:
                result.append(self.snake_index(r, c))
        return sorted(result)

    def max_bond_range(self) -> int:
        """Largest |i - j| over all bonds (2*cols - 1 for rows > 1)."""
        return max((j - i for i, j in self.bonds()), default=0)

    def _check_site(self, site: int) -> None:
        if not 0 <= site < self.num_sites:
            raise DomainError(f"site {site} outside [0, {self.num_sites})")


def _ordered(i: int, j: int) -> Bond:
    return (i, j) if i < j else (j, i)


def parse_label(label: str) -> LatticeGeometry:
    """Build a geometry from a "RxC" label."""
    try:
        rows, cols = (int(part) for part in label.lower().split("x"))
    except ValueError as exc:
        raise DomainError(f"cannot parse geometry label {label!r}") from exc
    return LatticeGeometry(rows, cols)
