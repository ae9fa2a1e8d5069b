#!/usr/bin/env python3
"""Build the bundled desk-scale IDX caches for MNIST (3 vs 6) and
Fashion-MNIST (dress vs shirt).

The canonical download hosts are not always reachable, so the repository
ships a small class-filtered subset in the original IDX layout. The source
images come from the `mnist` and `fashion-mnist` npm packages, which carry
the original 28x28 images as JSON (MNIST as value/255 rounded to three
decimals, which round-trips to the exact byte).

Usage:
    npm pack mnist@1.1.0 fashion-mnist@1.1.0
    tar xzf mnist-1.1.0.tgz && mv package mnist
    tar xzf fashion-mnist-1.1.0.tgz && mv package fashion-mnist
    python3 scripts/build_desk_cache.py mnist fashion-mnist crates/core/resources/desk-cache
"""

import gzip
import hashlib
import json
import os
import struct
import sys

TRAIN_PER_CLASS = 300
TEST_PER_CLASS = 75
CLASSES = (3, 6)


def mnist_images(pkg, digit):
    flat = json.load(open(os.path.join(pkg, "src", "digits", f"{digit}.json")))["data"]
    n = len(flat) // 784
    return [bytes(round(v * 255) for v in flat[i * 784:(i + 1) * 784]) for i in range(n)]


def fashion_images(pkg, label):
    rows = json.load(open(os.path.join(pkg, "src", "clothes", f"{label}.json")))["data"]
    return [bytes(r) for r in rows]


def write_gz(path, payload):
    with open(path, "wb") as raw:
        with gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0) as gz:
            gz.write(payload)


def emit(out_dir, per_class):
    os.makedirs(out_dir, exist_ok=True)
    for split, lo, hi in (("train", 0, TRAIN_PER_CLASS), ("t10k", TRAIN_PER_CLASS, TRAIN_PER_CLASS + TEST_PER_CLASS)):
        images, labels = [], []
        # interleave classes so the file is not sorted by label
        for i in range(lo, hi):
            for c in CLASSES:
                images.append(per_class[c][i])
                labels.append(c)
        img = struct.pack(">IIII", 0x00000803, len(images), 28, 28) + b"".join(images)
        lab = struct.pack(">II", 0x00000801, len(labels)) + bytes(labels)
        write_gz(os.path.join(out_dir, f"{split}-images-idx3-ubyte.gz"), img)
        write_gz(os.path.join(out_dir, f"{split}-labels-idx1-ubyte.gz"), lab)
    names = sorted(f for f in os.listdir(out_dir) if f.endswith(".gz"))
    with open(os.path.join(out_dir, "checksums.txt"), "w") as f:
        for name in names:
            digest = hashlib.sha256(open(os.path.join(out_dir, name), "rb").read()).hexdigest()
            f.write(f"{digest}  {name}\n")


def main():
    mnist_pkg, fashion_pkg, out = sys.argv[1:4]
    emit(os.path.join(out, "mnist"), {c: mnist_images(mnist_pkg, c) for c in CLASSES})
    emit(os.path.join(out, "fashion"), {c: fashion_images(fashion_pkg, c) for c in CLASSES})


if __name__ == "__main__":
    main()
