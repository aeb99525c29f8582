import pytest

from physics.lattice import LatticeGeometry, parse_label
from utils.errors import DomainError


def test_snake_order_3x3(square3):
    order = [[square3.snake_index(r, c) for c in range(3)] for r in range(3)]
    assert order == [[0, 1, 2], [5, 4, 3], [6, 7, 8]]


def test_coordinates_invert_snake_index():
    geom = LatticeGeometry(4, 5)
    for k in range(geom.num_sites):
        assert geom.snake_index(*geom.coordinates(k)) == k


def test_bond_counts():
    assert len(LatticeGeometry(3, 3).bonds()) == 12
    assert len(LatticeGeometry(2, 2).bonds()) == 4
    assert len(LatticeGeometry(9, 1).bonds()) == 8
    assert LatticeGeometry(1, 1).bonds() == []


def test_bonds_are_unique_and_ordered(square3):
    bonds = square3.bonds()
    assert bonds == sorted(set(bonds))
    assert all(i < j for i, j in bonds)
    assert (0, 5) in bonds and (2, 3) in bonds


def test_max_bond_range():
    assert LatticeGeometry(3, 3).max_bond_range() == 5
    assert LatticeGeometry(4, 4).max_bond_range() == 7
    assert LatticeGeometry(1, 6).max_bond_range() == 1


def test_neighbors_follow_lattice_not_chain(square3):
    # 0-5 is a vertical bond five chain steps apart
    assert square3.neighbors(0) == [1, 5]
    assert square3.neighbors(4) == [1, 3, 5, 7]


@pytest.mark.parametrize("rows, cols", [(0, 3), (3, -1), (2.0, 2)])
def test_rejects_bad_dimensions(rows, cols):
    with pytest.raises(DomainError):
        LatticeGeometry(rows, cols)


def test_out_of_range_site(square3):
    with pytest.raises(DomainError):
        square3.coordinates(9)
    with pytest.raises(DomainError):
        square3.snake_index(3, 0)


def test_parse_label():
    assert parse_label("7x7") == LatticeGeometry(7, 7)
    assert parse_label("49X1").label == "49x1"
    with pytest.raises(DomainError):
        parse_label("7by7")
