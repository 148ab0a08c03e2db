#!/usr/bin/env python3
"""Builds the bundled MNIST test fixture in IDX format.

Source: the `mnist` npm package (https://www.npmjs.com/package/mnist),
which ships 10,000 MNIST test-set digits as JSON float arrays, one file per
digit class, each pixel stored as round(byte/255, 3). That rounding is
injective on bytes: round(v*255) recovers the original pixel byte exactly,
so the fixture is byte-faithful to the underlying images.

Usage:
    python3 tools/make_mnist_fixture.py <digits_dir> <out_dir>

where <digits_dir> holds 0.json .. 9.json from mnist/src/digits. Writes
mnist-images.idx.gz and mnist-labels.idx.gz with fixed gzip metadata so the
output bytes are reproducible.
"""

import gzip
import json
import struct
import sys
from pathlib import Path

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
SIDE = 28
DIM = SIDE * SIDE


def load_digit(path: Path) -> bytes:
    values = json.loads(path.read_text())["data"]
    if len(values) % DIM != 0:
        raise SystemExit(f"{path}: length {len(values)} is not a multiple of {DIM}")
    out = bytearray(len(values))
    for i, v in enumerate(values):
        b = round(v * 255)
        if not 0 <= b <= 255 or abs(b / 255 - v) > 5e-4:
            raise SystemExit(f"{path}: value {v} at {i} is not a rounded byte")
        out[i] = b
    return bytes(out)


def write_gz(path: Path, payload: bytes) -> None:
    with open(path, "wb") as raw:
        with gzip.GzipFile(fileobj=raw, mode="wb", compresslevel=9, mtime=0) as gz:
            gz.write(payload)


def main() -> None:
    if len(sys.argv) != 3:
        raise SystemExit(__doc__)
    digits_dir = Path(sys.argv[1])
    out_dir = Path(sys.argv[2])
    out_dir.mkdir(parents=True, exist_ok=True)

    pixels = bytearray()
    labels = bytearray()
    for digit in range(10):
        data = load_digit(digits_dir / f"{digit}.json")
        count = len(data) // DIM
        pixels.extend(data)
        labels.extend([digit] * count)
        print(f"digit {digit}: {count} images")

    total = len(labels)
    images_payload = struct.pack(">IIII", IMAGE_MAGIC, total, SIDE, SIDE) + bytes(pixels)
    labels_payload = struct.pack(">II", LABEL_MAGIC, total) + bytes(labels)
    write_gz(out_dir / "mnist-images.idx.gz", images_payload)
    write_gz(out_dir / "mnist-labels.idx.gz", labels_payload)
    print(f"wrote {total} images to {out_dir}")


if __name__ == "__main__":
    main()
