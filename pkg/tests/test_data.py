import numpy as np
import pytest

from picardkit.data import (
    FORMATS,
    MAX_MIXING_CONDITION,
    Dataset,
    SourceSpec,
    dead_leaves_image,
    dependent_latents,
    extract_patches,
    generate_dependent,
    generate_synthetic,
    load_matrix,
    load_pgm,
    save_matrix,
    save_pgm,
)
from picardkit.errors import DimensionError, FormatError
from picardkit.linalg import whiten


# --------------------------------------------------------------------------
# synthetic sources

@pytest.mark.parametrize("dist", ["laplace", "uniform", "gauss-mixture"])
def test_sources_are_standardized(dist):
    T = 60000
    ds = generate_synthetic(3, T, seed=1, spec=SourceSpec(distribution=dist))
    for row in ds.S:
        assert abs(row.mean()) < 5.0 / np.sqrt(T)
        assert abs(row.var() - 1.0) < 25.0 / np.sqrt(T)


def test_source_tail_weights_differ():
    # fourth moments: heavy-tailed laplace ~6, uniform ~1.8, both far from
    # the gaussian 3  (this is what makes the mixtures separable)
    T = 60000
    lap = generate_synthetic(2, T, seed=2).S
    uni = generate_synthetic(2, T, seed=2,
                             spec=SourceSpec(distribution="uniform")).S
    assert np.mean(lap ** 4) > 4.5
    assert np.mean(uni ** 4) < 2.1


def test_gauss_mixture_parameters():
    spec = SourceSpec(distribution="gauss-mixture",
                      params={"mu": 2.0, "sigma": 0.25})
    ds = generate_synthetic(2, 50000, seed=3, spec=spec)
    assert abs(ds.S.var() - 1.0) < 0.02
    # strongly bimodal at mu/sigma = 8: hardly any mass near zero
    assert np.mean(np.abs(ds.S) < 0.3) < 0.01


def test_unknown_distribution_and_stray_params_rejected():
    with pytest.raises(ValueError):
        generate_synthetic(2, 1000, seed=0, spec=SourceSpec(distribution="cauchy"))
    with pytest.raises(ValueError):
        generate_synthetic(2, 1000, seed=0,
                           spec=SourceSpec(params={"scale": 2.0}))
    with pytest.raises(ValueError):
        generate_synthetic(
            2, 1000, seed=0,
            spec=SourceSpec(distribution="gauss-mixture", params={"nu": 1.0}))


def test_generate_synthetic_mixes_exactly():
    ds = generate_synthetic(4, 2000, seed=4)
    np.testing.assert_array_equal(ds.X, ds.A @ ds.S)
    assert np.linalg.cond(ds.A) <= MAX_MIXING_CONDITION
    assert "seed=4" in ds.provenance and "n=4" in ds.provenance


def test_generate_synthetic_is_deterministic():
    a = generate_synthetic(3, 1500, seed=5)
    b = generate_synthetic(3, 1500, seed=5)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.A, b.A)
    c = generate_synthetic(3, 1500, seed=6)
    assert not np.array_equal(a.X, c.X)


def test_generate_synthetic_validates_shape():
    with pytest.raises(DimensionError):
        generate_synthetic(1, 1000, seed=0)
    with pytest.raises(DimensionError):
        generate_synthetic(4, 159, seed=0)   # below 10 N^2


# --------------------------------------------------------------------------
# dependent signals

def test_dependent_latents_share_and_correlate():
    S = dependent_latents(6, 40000, seed=7, overcomplete_factor=2.0)
    assert S.shape == (6, 40000)
    # 3 latents cycled over 6 rows: row k and row k+3 are the same signal
    np.testing.assert_array_equal(S[0], S[3])
    np.testing.assert_array_equal(S[1], S[4])
    # leakage makes cyclic neighbours substantially correlated
    corr = np.corrcoef(S[0], S[1])[0, 1]
    assert abs(corr) > 0.1
    assert abs(S.var(axis=1) - 1.0).max() < 0.05


def test_dependent_latents_validation():
    with pytest.raises(DimensionError):
        dependent_latents(1, 1000, seed=0)
    with pytest.raises(ValueError):
        dependent_latents(4, 1000, seed=0, overcomplete_factor=0.0)


def test_generate_dependent_has_no_ground_truth_but_full_rank():
    ds = generate_dependent(6, 20000, seed=8)
    assert ds.A is None and ds.S is None
    assert "overcomplete_factor" in ds.provenance
    Z, _ = whiten(ds.X)   # noise keeps the covariance invertible
    assert Z.shape == ds.X.shape
    again = generate_dependent(6, 20000, seed=8)
    np.testing.assert_array_equal(ds.X, again.X)


# --------------------------------------------------------------------------
# patches

def test_extract_patches_content_matches_image_windows():
    img = np.arange(16, dtype=float).reshape(4, 4)
    ds = extract_patches(img, 2, 50, seed=9)
    assert ds.X.shape == (4, 50)
    valid = {tuple(img[r:r + 2, c:c + 2].ravel())
             for r in range(3) for c in range(3)}
    for col in ds.X.T:
        assert tuple(col) in valid


def test_extract_patches_full_size_patch_is_the_image():
    img = np.arange(9, dtype=float).reshape(3, 3)
    ds = extract_patches(img, 3, 4, seed=10)
    for col in ds.X.T:
        np.testing.assert_array_equal(col, img.ravel())


def test_extract_patches_deterministic():
    img = dead_leaves_image(size=64, seed=11)
    a = extract_patches(img, 8, 300, seed=12)
    b = extract_patches(img, 8, 300, seed=12)
    np.testing.assert_array_equal(a.X, b.X)


def test_extract_patches_validation():
    img = np.zeros((8, 8))
    with pytest.raises(DimensionError):
        extract_patches(np.zeros(8), 2, 5, seed=0)
    with pytest.raises(DimensionError):
        extract_patches(img, 9, 5, seed=0)
    with pytest.raises(DimensionError):
        extract_patches(img, 0, 5, seed=0)
    with pytest.raises(DimensionError):
        extract_patches(img, 2, 0, seed=0)


def test_dead_leaves_image_statistics():
    img = dead_leaves_image(size=128, seed=13)
    assert img.shape == (128, 128)
    assert img.min() >= 0.0 and img.max() <= 255.0
    # occluding disks of many shades: high contrast, not a flat canvas
    assert img.std() > 30.0
    np.testing.assert_array_equal(img, dead_leaves_image(size=128, seed=13))
    assert not np.array_equal(img, dead_leaves_image(size=128, seed=14))


def test_dead_leaves_image_size_guard():
    with pytest.raises(DimensionError):
        dead_leaves_image(size=8)


# --------------------------------------------------------------------------
# PGM files

def test_pgm_round_trip_8bit(tmp_path):
    rng = np.random.default_rng(15)
    img = rng.uniform(0, 255, size=(11, 7))
    path = tmp_path / "img.pgm"
    save_pgm(path, img)
    back = load_pgm(path)
    np.testing.assert_array_equal(back, np.rint(img))


def test_pgm_round_trip_16bit(tmp_path):
    rng = np.random.default_rng(16)
    img = np.rint(rng.uniform(0, 60000, size=(5, 9)))
    path = tmp_path / "img16.pgm"
    save_pgm(path, img, maxval=65535)
    np.testing.assert_array_equal(load_pgm(path), img)


def test_pgm_clips_out_of_range_values(tmp_path):
    img = np.array([[-10.0, 300.0], [12.4, 12.6]])
    path = tmp_path / "clip.pgm"
    save_pgm(path, img)
    np.testing.assert_array_equal(load_pgm(path),
                                  np.array([[0.0, 255.0], [12.0, 13.0]]))


def test_pgm_ascii_with_comments(tmp_path):
    path = tmp_path / "ascii.pgm"
    path.write_bytes(b"P2 # ascii variant\n# size next\n3 2\n255\n"
                     b"0 10 20\n30 40 255\n")
    np.testing.assert_array_equal(
        load_pgm(path), np.array([[0.0, 10.0, 20.0], [30.0, 40.0, 255.0]]))


@pytest.mark.parametrize("body,message", [
    (b"", "empty"),
    (b"P6\n2 2\n255\n" + b"\0" * 12, "magic"),
    (b"P5\n2 2\n255\n\0\0\0", "pixel bytes"),
    (b"P5\n2 2\n", "truncated"),
    (b"P5\nx 2\n255\n\0\0\0\0", "non-numeric"),
    (b"P2\n2 1\n255\n7 skip\n", "non-numeric pixel"),
    (b"P2\n2 1\n255\n1 2 3\n", "expected 2 pixel"),
    (b"P2\n2 1\n100\n7 101\n", "exceeds"),
])
def test_pgm_malformed_inputs(tmp_path, body, message):
    path = tmp_path / "bad.pgm"
    path.write_bytes(body)
    with pytest.raises(FormatError, match=message.split()[0]):
        load_pgm(path)


def test_save_pgm_validation(tmp_path):
    with pytest.raises(DimensionError):
        save_pgm(tmp_path / "x.pgm", np.zeros(4))
    with pytest.raises(ValueError):
        save_pgm(tmp_path / "x.pgm", np.zeros((2, 2)), maxval=0)


# --------------------------------------------------------------------------
# matrix files

@pytest.mark.parametrize("format", FORMATS)
def test_matrix_round_trip_is_exact(tmp_path, format):
    rng = np.random.default_rng(17)
    X = rng.standard_normal((6, 11)) * 10.0 ** rng.integers(-12, 12, (6, 11))
    path = tmp_path / "m.dat"
    save_matrix(path, format, X)
    np.testing.assert_array_equal(load_matrix(path, format), X)


def test_matrix_csv_layout(tmp_path):
    path = tmp_path / "m.csv"
    save_matrix(path, "csv", np.array([[1.5, -2.0], [3.25, 0.0], [0.5, 1.0]]))
    lines = path.read_text().splitlines()
    assert lines[0] == "3,2"
    assert lines[1] == "1.5,-2"
    assert len(lines) == 4


def test_matrix_unknown_format(tmp_path):
    with pytest.raises(FormatError):
        save_matrix(tmp_path / "m", "npz", np.eye(2))
    with pytest.raises(FormatError):
        load_matrix(tmp_path / "m", "npz")


def test_matrix_save_rejects_non_2d(tmp_path):
    with pytest.raises(DimensionError):
        save_matrix(tmp_path / "m.bin", "f64-binary", np.zeros(3))


@pytest.mark.parametrize("text,message", [
    ("", "empty"),
    ("2\n1,2\n", "header"),
    ("a,b\n1,2\n", "header"),
    ("0,2\n", "non-positive"),
    ("2,2\n1,2\n", "2 rows"),
    ("1,3\n1,2\n", "row 1 has 2 values"),
    ("1,2\n1,zap\n", "'zap' at row 1, column 2"),
])
def test_matrix_csv_malformed(tmp_path, text, message):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(FormatError, match=message.split()[0]):
        load_matrix(path, "csv")


def test_matrix_binary_malformed(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"")
    with pytest.raises(FormatError, match="empty"):
        load_matrix(path, "f64-binary")
    path.write_bytes(b"\x01\x02\x03")
    with pytest.raises(FormatError, match="short"):
        load_matrix(path, "f64-binary")
    save_matrix(path, "f64-binary", np.eye(3))
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(FormatError, match="declares"):
        load_matrix(path, "f64-binary")


def test_dataset_defaults():
    ds = Dataset(X=np.eye(2), provenance="test")
    assert ds.A is None and ds.S is None
