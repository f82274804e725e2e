'''Dataset construction and file I/O.

Generators are pure functions of their parameters and seed; the random
stream is numpy's default PCG64, which is a fixed, portable algorithm, so a
given (parameters, seed) pair reproduces bit-identically on any platform.
Signals are (channels, samples) float64 matrices.

File formats:
  f64-binary  16-byte header (rows, cols as little-endian uint64) followed
              by row-major little-endian float64 entries; bit-exact.
  csv         first line "rows,cols" as two integers, then one line per row
              of comma-separated values at 17 significant digits (enough to
              round-trip float64 exactly).
  PGM         P2 (ascii) and P5 (binary) grayscale images, maxval up to
              65535, for patch extraction input.
'''

import math
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionError, FormatError

MAX_MIXING_CONDITION = 100.0


@dataclass(frozen=True)
class SourceSpec:
    '''Which i.i.d. distribution source rows are drawn from.

    Every distribution is parameterized to have zero mean and unit variance
    in expectation:
      laplace        the default heavy-tailed source
      uniform        on [-sqrt(3), sqrt(3)]
      gauss-mixture  symmetric two-component normal mixture; params may set
                     "mu" (component offset, default 1.0) and "sigma"
                     (component spread, default 0.5) before standardization
    '''

    distribution: str = "laplace"
    params: dict = field(default_factory=dict)


@dataclass
class Dataset:
    '''A signal matrix plus where it came from. A and S are the ground-truth
    mixing matrix and sources when the generator knows them, else None.'''

    X: np.ndarray
    provenance: str
    A: Optional[np.ndarray] = None
    S: Optional[np.ndarray] = None


def _draw_sources(rng, N, T, spec):
    dist = spec.distribution
    params = dict(spec.params)
    if dist == "laplace":
        if params:
            raise ValueError(f"laplace takes no parameters, got {sorted(params)}")
        return rng.laplace(0.0, 1.0 / math.sqrt(2.0), size=(N, T))
    if dist == "uniform":
        if params:
            raise ValueError(f"uniform takes no parameters, got {sorted(params)}")
        half = math.sqrt(3.0)
        return rng.uniform(-half, half, size=(N, T))
    if dist == "gauss-mixture":
        mu = float(params.pop("mu", 1.0))
        sigma = float(params.pop("sigma", 0.5))
        if params:
            raise ValueError(f"unknown gauss-mixture parameters {sorted(params)}")
        centers = np.where(rng.random(size=(N, T)) < 0.5, mu, -mu)
        S = centers + sigma * rng.standard_normal(size=(N, T))
        return S / math.sqrt(mu * mu + sigma * sigma)
    raise ValueError(
        f"unknown distribution {dist!r}, expected laplace, uniform, or gauss-mixture")


def _draw_mixing(rng, N):
    # redraw until reasonably conditioned so the mixture is invertible in
    # a numerically meaningful way
    while True:
        A = rng.standard_normal(size=(N, N))
        if np.linalg.cond(A) <= MAX_MIXING_CONDITION:
            return A


def generate_synthetic(N, T, seed, spec=None):
    '''Independent sources through a random square mixing matrix.

    Parameters
    ----------
    N : int
        Number of sources/channels, at least 2.
    T : int
        Samples, at least 10 * N^2 so moment estimates are meaningful.
    seed : int
    spec : SourceSpec, optional

    Returns
    -------
    Dataset
        With X = A @ S exactly; A has standard-normal entries redrawn until
        its condition number is at most 100; S rows are i.i.d. draws. The
        same arguments always return a bit-identical Dataset.
    '''
    if N < 2:
        raise DimensionError(f"need at least 2 channels, got N = {N}")
    if T < 10 * N * N:
        raise DimensionError(
            f"need T >= 10 N^2 = {10 * N * N} samples for N = {N}, got T = {T}")
    spec = spec if spec is not None else SourceSpec()
    rng = np.random.default_rng(seed)
    S = _draw_sources(rng, N, T, spec)
    A = _draw_mixing(rng, N)
    X = A @ S
    params = ", ".join(f"{k}={v}" for k, v in sorted(spec.params.items()))
    provenance = (f"synthetic(n={N}, t={T}, seed={seed}, "
                  f"distribution={spec.distribution}"
                  + (f", {params}" if params else "") + ")")
    return Dataset(X=X, provenance=provenance, A=A, S=S)


def dependent_latents(N, T, seed, overcomplete_factor=2.0):
    '''The pre-mixing signal rows used by generate_dependent.

    ceil(N / overcomplete_factor) independent Laplace latents are stacked
    cyclically with 0.3 leakage from the next latent, so rows share latents
    (duplication when the factor exceeds 1) and neighbours correlate even
    without duplication. Exposed so the dependence structure can be audited.
    '''
    if N < 2:
        raise DimensionError(f"need at least 2 channels, got N = {N}")
    if not overcomplete_factor > 0:
        raise ValueError(f"overcomplete_factor must be positive, got {overcomplete_factor}")
    latent_rng, _ = np.random.default_rng(seed).spawn(2)
    K = max(1, math.ceil(N / overcomplete_factor))
    U = latent_rng.laplace(0.0, 1.0 / math.sqrt(2.0), size=(K, T))
    rows = np.arange(N)
    S = U[rows % K] + 0.3 * U[(rows + 1) % K]
    return S / math.sqrt(1.09)


def generate_dependent(N, T, seed, overcomplete_factor=2.0, noise_level=0.1):
    '''Mixtures that violate the independent-source model.

    The latent rows of `dependent_latents` (fewer true degrees of freedom
    than channels, mutually correlated) are mixed and perturbed by isotropic
    noise. No ground truth exists, so A and S are absent. noise_level must
    be positive when overcomplete_factor > 1, otherwise the output is rank
    deficient and whitening will reject it.
    '''
    S = dependent_latents(N, T, seed, overcomplete_factor)
    _, mix_rng = np.random.default_rng(seed).spawn(2)
    A = _draw_mixing(mix_rng, N)
    X = A @ S + noise_level * mix_rng.standard_normal(size=(N, T))
    provenance = (f"dependent(n={N}, t={T}, seed={seed}, "
                  f"overcomplete_factor={overcomplete_factor}, "
                  f"noise_level={noise_level})")
    return Dataset(X=X, provenance=provenance)


def extract_patches(image, patch_edge, count, seed):
    '''Random square patches of a grayscale image, flattened into columns.

    Top-left corners are sampled uniformly with replacement. Each patch is
    flattened row-major, giving a (patch_edge^2, count) signal matrix.
    '''
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise DimensionError(f"expected a 2-d grayscale image, got shape {img.shape}")
    H, W = img.shape
    e = int(patch_edge)
    if e < 1 or count < 1:
        raise DimensionError("patch_edge and count must be positive")
    if H < e or W < e:
        raise DimensionError(
            f"image {H}x{W} is smaller than the {e}x{e} patch size")
    rng = np.random.default_rng(seed)
    r = rng.integers(0, H - e + 1, size=count)
    c = rng.integers(0, W - e + 1, size=count)
    windows = np.lib.stride_tricks.sliding_window_view(img, (e, e))
    X = windows[r, c].reshape(count, e * e).T.copy()
    provenance = (f"patches(image={H}x{W}, patch_edge={e}, count={count}, "
                  f"seed={seed})")
    return Dataset(X=X, provenance=provenance)


def dead_leaves_image(size=512, seed=0, disks=2000, noise=1.0):
    '''Synthetic grayscale scene with natural-image statistics.

    Opaque disks with power-law radii (density proportional to r^-3) are
    painted in random order over a mid-gray canvas, producing occlusions,
    long edges, and flat regions; a little sensor noise keeps patch
    covariances full rank. Values lie in [0, 255].
    '''
    if size < 16:
        raise DimensionError(f"image size must be at least 16, got {size}")
    rng = np.random.default_rng(seed)
    img = np.full((size, size), 128.0)
    r_min, r_max = 4.0, size / 4.0
    u = rng.random(disks)
    radii = (r_min ** -2 - u * (r_min ** -2 - r_max ** -2)) ** -0.5
    cx = rng.uniform(0, size, disks)
    cy = rng.uniform(0, size, disks)
    shade = rng.uniform(0.0, 255.0, disks)
    for k in range(disks):
        r = radii[k]
        x0, x1 = int(max(0, cx[k] - r)), int(min(size, cx[k] + r + 1))
        y0, y1 = int(max(0, cy[k] - r)), int(min(size, cy[k] + r + 1))
        if x0 >= x1 or y0 >= y1:
            continue
        yy, xx = np.ogrid[y0:y1, x0:x1]
        mask = (xx - cx[k]) ** 2 + (yy - cy[k]) ** 2 <= r * r
        img[y0:y1, x0:x1][mask] = shade[k]
    img += noise * rng.standard_normal(img.shape)
    return np.clip(img, 0.0, 255.0)


def _pgm_tokens(data, n):
    '''First n whitespace-separated header tokens of a PGM byte stream,
    skipping # comments; returns (tokens, offset past the final token's
    single trailing whitespace byte).'''
    tokens = []
    i = 0
    while len(tokens) < n:
        if i >= len(data):
            raise FormatError("truncated image header")
        ch = data[i:i + 1]
        if ch == b"#":
            while i < len(data) and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
        elif ch.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
                j += 1
            tokens.append(data[i:j])
            i = j
    if i >= len(data) or not data[i:i + 1].isspace():
        raise FormatError("image header not terminated by whitespace")
    return tokens, i + 1


def load_pgm(path):
    '''Read a P2 or P5 grayscale image as a float64 array of intensities.'''
    with open(path, "rb") as f:
        data = f.read()
    if len(data) == 0:
        raise FormatError(f"empty file: {path}")
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise FormatError(f"not a PGM file (magic {magic!r}): {path}")
    tokens, offset = _pgm_tokens(data[2:], 3)
    offset += 2
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise FormatError(f"non-numeric image header in {path}") from None
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise FormatError(f"invalid image dimensions or maxval in {path}")
    n = width * height
    if magic == b"P5":
        itemsize = 1 if maxval < 256 else 2
        body = data[offset:offset + n * itemsize]
        if len(body) != n * itemsize:
            raise FormatError(
                f"expected {n * itemsize} pixel bytes, found {len(body)} in {path}")
        dtype = np.uint8 if itemsize == 1 else np.dtype(">u2")
        pixels = np.frombuffer(body, dtype=dtype).astype(np.float64)
    else:
        fields = data[offset:].split()
        if len(fields) != n:
            raise FormatError(
                f"expected {n} pixel values, found {len(fields)} in {path}")
        try:
            pixels = np.array([int(t) for t in fields], dtype=np.float64)
        except ValueError:
            raise FormatError(f"non-numeric pixel value in {path}") from None
    if pixels.max(initial=0.0) > maxval:
        raise FormatError(f"pixel value exceeds declared maxval in {path}")
    return pixels.reshape(height, width)


def save_pgm(path, image, maxval=255):
    '''Write a grayscale image as binary P5, clipping and rounding to
    [0, maxval].'''
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise DimensionError(f"expected a 2-d image, got shape {img.shape}")
    if not 0 < maxval < 65536:
        raise ValueError(f"maxval must be in [1, 65535], got {maxval}")
    pixels = np.clip(np.rint(img), 0, maxval)
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    height, width = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n{maxval}\n".encode("ascii"))
        f.write(pixels.astype(dtype).tobytes())


_BIN_HEADER = struct.Struct("<QQ")
FORMATS = ("csv", "f64-binary")


def save_matrix(path, format, X):
    '''Write a matrix in one of the supported on-disk formats.'''
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got shape {X.shape}")
    rows, cols = X.shape
    if format == "f64-binary":
        with open(path, "wb") as f:
            f.write(_BIN_HEADER.pack(rows, cols))
            f.write(X.astype("<f8").tobytes(order="C"))
    elif format == "csv":
        with open(path, "w", encoding="ascii") as f:
            f.write(f"{rows},{cols}\n")
            for row in X:
                f.write(",".join(f"{v:.17g}" for v in row))
                f.write("\n")
    else:
        raise FormatError(f"unknown format {format!r}, expected one of {FORMATS}")


def _load_csv(path):
    with open(path, "r", encoding="ascii") as f:
        lines = f.read().splitlines()
    lines = [ln for ln in lines if ln.strip() != ""]
    if not lines:
        raise FormatError(f"empty file: {path}")
    head = lines[0].split(",")
    try:
        rows, cols = (int(t) for t in head)
    except ValueError:
        raise FormatError(
            f"header line must hold 'rows,cols' as two integers, got {lines[0]!r}") from None
    if rows < 1 or cols < 1:
        raise FormatError(f"non-positive dimensions in header: {lines[0]!r}")
    if len(lines) - 1 != rows:
        raise FormatError(
            f"header declares {rows} rows but file has {len(lines) - 1} data lines")
    X = np.empty((rows, cols))
    for i, line in enumerate(lines[1:]):
        fields = line.split(",")
        if len(fields) != cols:
            raise FormatError(
                f"row {i + 1} has {len(fields)} values, header declares {cols}")
        for j, tok in enumerate(fields):
            try:
                X[i, j] = float(tok)
            except ValueError:
                raise FormatError(
                    f"non-numeric value {tok.strip()!r} at row {i + 1}, "
                    f"column {j + 1}") from None
    return X


def load_matrix(path, format):
    '''Read a matrix written by save_matrix; f64-binary round-trips
    bit-exactly, csv within its 17-significant-digit encoding (which also
    recovers float64 exactly).'''
    if format == "f64-binary":
        with open(path, "rb") as f:
            data = f.read()
        if len(data) == 0:
            raise FormatError(f"empty file: {path}")
        if len(data) < _BIN_HEADER.size:
            raise FormatError(f"file too short for a header: {path}")
        rows, cols = _BIN_HEADER.unpack_from(data)
        expected = _BIN_HEADER.size + 8 * rows * cols
        if rows < 1 or cols < 1 or len(data) != expected:
            raise FormatError(
                f"header declares {rows}x{cols} ({expected} bytes) but file "
                f"has {len(data)} bytes: {path}")
        body = np.frombuffer(data, dtype="<f8", offset=_BIN_HEADER.size)
        return body.reshape(rows, cols).astype(np.float64)
    if format == "csv":
        return _load_csv(path)
    raise FormatError(f"unknown format {format!r}, expected one of {FORMATS}")
