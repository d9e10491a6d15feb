import numpy as np
import pytest

from nanoimaging.grid import FieldGrid


def test_centered_geometry():
    g = FieldGrid.centered(5, 0.25)
    assert np.allclose(g.origin, -0.5)
    assert g.points().shape == (5, 5, 5, 3)
    assert np.allclose(g.points()[2, 2, 2], 0.0)
    assert g.index_of([0.25, 0.0, -0.5]) == (3, 2, 0)
    assert g.index_of([0.1, 0.0, 0.0]) is None
    assert g.contains([0.5, 0.5, -0.5]) and not g.contains([0.6, 0, 0])


def test_masks():
    g = FieldGrid.centered(6, 0.1)
    assert g.interior_mask().sum() == 4 ** 3
    assert g.boundary_mask().sum() == 6 ** 3 - 4 ** 3


def test_validation():
    with pytest.raises(ValueError):
        FieldGrid(np.zeros(3), 0.0, (3, 3, 3), np.zeros((3, 3, 3)))
    with pytest.raises(ValueError):
        FieldGrid(np.zeros(3), 0.1, (1, 3, 3), np.zeros((1, 3, 3)))
    with pytest.raises(ValueError):
        FieldGrid(np.zeros(3), 0.1, (3, 3, 3), np.zeros((3, 3, 4)))


def test_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    vals = rng.standard_normal((3, 4, 5)) + 1j * rng.standard_normal((3, 4, 5))
    g = FieldGrid([0.1, -0.2, 0.3], 0.05, (3, 4, 5), vals)
    g.to_csv(tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "x,y,z,re,im"
    assert len(lines) == 61
    first = [float(t) for t in lines[1].split(",")]
    assert first == [0.1, -0.2, 0.3, vals[0, 0, 0].real, vals[0, 0, 0].imag]
    second = [float(t) for t in lines[2].split(",")]
    assert second[2] == pytest.approx(0.35)  # last index varies fastest
    back = FieldGrid.from_csv(tmp_path / "f.csv")
    assert back.dims == g.dims and np.array_equal(back.values, vals)
    assert back.same_geometry(g)
