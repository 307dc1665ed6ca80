import numpy as np
import pytest

from sparsetomo.phantoms import Image, generate_phantom, load_image, rescale_clip

KINDS = ["plant_like", "shepp_logan_like", "blocks"]


@pytest.mark.parametrize("kind", KINDS)
def test_generate_range_and_shape(kind):
    img = generate_phantom(kind, 32, seed=11)
    assert img.side == 32
    assert img.values.shape == (32 * 32,)
    assert img.values.dtype == np.float64
    assert img.values.min() >= 0.0
    assert img.values.max() <= 1.0
    assert img.values.max() > 0.2  # not empty


@pytest.mark.parametrize("kind", KINDS)
def test_generate_deterministic(kind):
    a = generate_phantom(kind, 32, seed=5)
    b = generate_phantom(kind, 32, seed=5)
    assert np.array_equal(a.values, b.values)
    c = generate_phantom(kind, 32, seed=6)
    assert not np.array_equal(a.values, c.values)


def test_plant_like_structure():
    img = generate_phantom("plant_like", 64, seed=1)
    assert img.values.max() == 1.0
    frac = np.mean(img.values > 0.05)
    assert 0.05 < frac < 0.8  # sparse-ish support, neither empty nor full


def test_blocks_levels():
    img = generate_phantom("blocks", 32, seed=2)
    assert set(np.unique(img.values)) <= {0.0, 0.25, 0.5, 1.0}


def test_generate_rejects_bad_input():
    with pytest.raises(ValueError):
        generate_phantom("bogus", 32, seed=0)
    with pytest.raises(ValueError):
        generate_phantom("plant_like", 8, seed=0)


def test_image_validation():
    with pytest.raises(ValueError):
        Image(4, np.zeros(15))
    with pytest.raises(ValueError):
        Image(4, np.full(16, np.nan))
    with pytest.raises(ValueError):
        Image(1, np.zeros(1))
    img = Image(4, np.arange(16.0))
    assert img.pixel_size == 0.25
    assert img.as2d().shape == (4, 4)


def _write_pgm(path, arr, maxval):
    arr = np.asarray(arr)
    hdr = f"P5\n# comment line\n{arr.shape[1]} {arr.shape[0]}\n{maxval}\n".encode()
    dt = ">u2" if maxval > 255 else "u1"
    path.write_bytes(hdr + arr.astype(dt).tobytes())


def test_load_pgm_8bit(tmp_path):
    arr = np.array([[0, 50], [100, 200]])
    p = tmp_path / "a.pgm"
    _write_pgm(p, arr, 255)
    img = load_image(p, "pgm")
    assert img.side == 2
    assert np.allclose(img.as2d(), arr / 200.0)


def test_load_pgm_16bit(tmp_path):
    arr = np.array([[0, 500], [1000, 40000]])
    p = tmp_path / "b.pgm"
    _write_pgm(p, arr, 65535)
    img = load_image(p, "pgm")
    assert np.allclose(img.as2d(), arr / 40000.0)


def test_load_pgm_malformed(tmp_path):
    p = tmp_path / "bad.pgm"
    p.write_bytes(b"P6\n2 2\n255\n" + bytes(12))
    with pytest.raises(ValueError):
        load_image(p, "pgm")
    p.write_bytes(b"P5\n2 2\n255\n" + bytes(2))  # truncated pixels
    with pytest.raises(ValueError):
        load_image(p, "pgm")
    p.write_bytes(b"P5\n3 2\n255\n" + bytes(6))  # non-square
    with pytest.raises(ValueError):
        load_image(p, "pgm")


def test_load_raw_f64(tmp_path):
    vals = np.arange(16.0)
    p = tmp_path / "c.raw"
    vals.astype("<f8").tofile(p)
    img = load_image(p, "raw_f64")
    assert img.side == 4
    assert np.allclose(img.values, vals / 15.0)


def test_load_raw_f64_rejects(tmp_path):
    p = tmp_path / "d.raw"
    np.arange(15.0).astype("<f8").tofile(p)  # not a square
    with pytest.raises(ValueError):
        load_image(p, "raw_f64")
    np.array([-1.0, 0, 0, 1]).astype("<f8").tofile(p)
    with pytest.raises(ValueError):
        load_image(p, "raw_f64")
    with pytest.raises(ValueError):
        load_image(p, "png")


def test_rescale_clip():
    img = Image(2, np.array([-1.0, 0.0, 2.0, 4.0]))
    out = rescale_clip(img)
    assert np.array_equal(out.values, [0.0, 0.0, 0.5, 1.0])
    with pytest.raises(ValueError):
        rescale_clip(Image(2, np.array([-1.0, -2.0, 0.0, 0.0])))
