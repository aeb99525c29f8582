from analysis.clusters import Snapshot
from experiment.render import DOWN_COLOR, UP_COLOR, render_snapshots, snapshot_image
from physics.lattice import LatticeGeometry


def test_image_layout():
    geom = LatticeGeometry(2, 3)
    # chain site 3 is (1, 2)
    img = snapshot_image(Snapshot(geom, [1, 0, 0, 1, 0, 0]), cell=4)
    assert img.size == (12, 8)
    assert img.getpixel((0, 0)) == UP_COLOR
    assert img.getpixel((5, 1)) == DOWN_COLOR
    assert img.getpixel((11, 7)) == UP_COLOR


def test_render_limit(tmp_path):
    geom = LatticeGeometry(2, 2)
    shots = [Snapshot(geom, [k % 2] * 4) for k in range(5)]
    paths = render_snapshots(shots, str(tmp_path), "t0001.0000", limit=3)
    assert len(paths) == 3
    assert paths[0].endswith("t0001.0000_shot0000.png")
    assert render_snapshots(shots, str(tmp_path), "none", limit=0) == []
