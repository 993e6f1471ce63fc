"""Toy image-classification data.

Uses real MNIST IDX files when a directory with them is supplied (or set
in SNNTRAINER_MNIST_DIR), otherwise generates a seeded synthetic task:
ten low-frequency class templates under amplitude jitter and pixel noise.
Images are u8 in [0, 255]; models consume them scaled by 1/255.
"""
from __future__ import annotations

import os
import struct

import numpy as np

MNIST_FILES = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte",
               "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")


def _read_idx(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    magic = struct.unpack(">I", raw[:4])[0]
    ndim = magic & 0xFF
    dims = struct.unpack(f">{ndim}I", raw[4:4 + 4 * ndim])
    return np.frombuffer(raw[4 + 4 * ndim:], dtype=np.uint8).reshape(dims)


def _smooth_templates(rng: np.ndarray, classes: int, size: int) -> np.ndarray:
    coarse = rng.normal(size=(classes, size // 4, size // 4))
    up = np.kron(coarse, np.ones((4, 4)))
    # box blur to keep the patterns low frequency
    blurred = up.copy()
    for shift in (1, 2):
        blurred += np.roll(up, shift, axis=1) + np.roll(up, -shift, axis=1)
        blurred += np.roll(up, shift, axis=2) + np.roll(up, -shift, axis=2)
    blurred -= blurred.min(axis=(1, 2), keepdims=True)
    blurred /= blurred.max(axis=(1, 2), keepdims=True) + 1e-9
    return blurred


def synthetic_dataset(n_train: int, n_test: int, seed: int = 0,
                      classes: int = 10, size: int = 28, noise: float = 0.35):
    """Seeded synthetic task; returns (x_train, y_train, x_test, y_test)."""
    rng = np.random.default_rng(seed)
    templates = _smooth_templates(rng, classes, size)

    def sample(n):
        y = rng.integers(0, classes, size=n)
        amp = rng.uniform(0.6, 1.0, size=(n, 1, 1))
        x = amp * templates[y] + rng.normal(0.0, noise, size=(n, size, size))
        return (np.clip(x, 0.0, 1.0) * 255).astype(np.uint8), y.astype(np.uint8)

    x_train, y_train = sample(n_train)
    x_test, y_test = sample(n_test)
    return x_train, y_train, x_test, y_test


def load_dataset(n_train: int, n_test: int, seed: int = 0,
                 mnist_dir: str | None = None):
    """MNIST subset when available, synthetic otherwise."""
    mnist_dir = mnist_dir or os.environ.get("SNNTRAINER_MNIST_DIR")
    if mnist_dir and all(os.path.exists(os.path.join(mnist_dir, f))
                         for f in MNIST_FILES):
        rng = np.random.default_rng(seed)
        xs = _read_idx(os.path.join(mnist_dir, MNIST_FILES[0]))
        ys = _read_idx(os.path.join(mnist_dir, MNIST_FILES[1]))
        xt = _read_idx(os.path.join(mnist_dir, MNIST_FILES[2]))
        yt = _read_idx(os.path.join(mnist_dir, MNIST_FILES[3]))
        tr = rng.permutation(len(xs))[:n_train]
        te = rng.permutation(len(xt))[:n_test]
        return xs[tr], ys[tr], xt[te], yt[te]
    return synthetic_dataset(n_train, n_test, seed)
