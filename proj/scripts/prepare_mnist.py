#!/usr/bin/env python3
"""Build the MNIST subset under data/mnist from the `mnist` npm package.

The package ships 10,000 MNIST digits as JSON (pixel bytes stored as
byte/255 rounded to 3 decimals, so round(v*255) recovers them exactly).
They are shuffled with a fixed seed and split 9000 train / 1000 test,
written as gzipped IDX files.

    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python3 scripts/prepare_mnist.py package/src/digits data/mnist
"""
import gzip
import json
import random
import struct
import sys
from pathlib import Path

TEST_COUNT = 1000
SEED = 20240601


def load_digits(src):
    samples = []
    for digit in range(10):
        flat = json.loads((src / f"{digit}.json").read_text())["data"]
        if len(flat) % 784:
            raise SystemExit(f"{digit}.json: length {len(flat)} is not a multiple of 784")
        for i in range(0, len(flat), 784):
            pix = bytes(round(v * 255) for v in flat[i:i + 784])
            samples.append((pix, digit))
    return samples


def write_split(dst, prefix, samples):
    with gzip.GzipFile(dst / f"{prefix}-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x803, len(samples), 28, 28))
        for pix, _ in samples:
            f.write(pix)
    with gzip.GzipFile(dst / f"{prefix}-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x801, len(samples)))
        f.write(bytes(label for _, label in samples))


def main():
    if len(sys.argv) != 3:
        raise SystemExit(__doc__)
    src, dst = Path(sys.argv[1]), Path(sys.argv[2])
    samples = load_digits(src)
    random.Random(SEED).shuffle(samples)
    dst.mkdir(parents=True, exist_ok=True)
    write_split(dst, "t10k", samples[:TEST_COUNT])
    write_split(dst, "train", samples[TEST_COUNT:])
    print(f"{len(samples) - TEST_COUNT} train / {TEST_COUNT} test -> {dst}")


if __name__ == "__main__":
    main()
