"""Binary PGM (P5, maxval 255) reading and writing.

The adapter exchanges images and masks with the extraction pipeline only
through files, so it carries its own minimal PGM codec rather than
importing the pipeline package.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def read_pgm(path: str | Path) -> np.ndarray:
    path = Path(path)
    data = path.read_bytes()
    tokens: list[bytes] = []
    i = 0
    while len(tokens) < 4 and i < len(data):
        c = data[i:i + 1]
        if c == b"#":
            while i < len(data) and data[i:i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
                j += 1
            tokens.append(data[i:j])
            i = j
    if len(tokens) < 4 or tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    raster = data[i + 1:i + 1 + w * h]
    if len(raster) != w * h:
        raise ValueError(f"{path}: truncated raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w).copy()


def write_pgm(path: str | Path, img: np.ndarray) -> None:
    img = np.asarray(img, dtype=np.uint8)
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())


def read_mask(path: str | Path) -> np.ndarray:
    img = read_pgm(path)
    if ((img != 0) & (img != 255)).any():
        raise ValueError(f"{path}: mask contains values other than 0/255")
    return img == 255


def write_mask(path: str | Path, mask: np.ndarray) -> None:
    write_pgm(path, np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8))
