#!/usr/bin/env python3
"""Build gzipped IDX files from the digits bundled in the `mnist` npm package.

The package ships 10,000 MNIST digits as JSON arrays of byte/255 values
rounded to three decimals; rounding back to bytes recovers them exactly.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/mnist_from_npm.py package/src/digits data/mnist
"""
import gzip
import json
import struct
import sys
from pathlib import Path

import numpy as np


def write_idx(path, magic, dims, payload):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">I", magic))
        for d in dims:
            f.write(struct.pack(">I", d))
        f.write(payload.tobytes())


def main(src, dst, n_train=8000):
    images, labels = [], []
    for digit in range(10):
        data = json.loads((Path(src) / f"{digit}.json").read_text())["data"]
        arr = np.rint(np.asarray(data, dtype=np.float64) * 255.0).astype(np.uint8)
        arr = arr.reshape(-1, 784)
        images.append(arr)
        labels.append(np.full(len(arr), digit, dtype=np.uint8))
    images = np.concatenate(images)
    labels = np.concatenate(labels)
    order = np.random.default_rng(0).permutation(len(labels))
    images, labels = images[order], labels[order]
    dst = Path(dst)
    dst.mkdir(parents=True, exist_ok=True)
    for name, sl in (("train", slice(0, n_train)), ("t10k", slice(n_train, None))):
        im, lb = images[sl], labels[sl]
        write_idx(dst / f"{name}-images-idx3-ubyte.gz", 0x803, (len(im), 28, 28), im)
        write_idx(dst / f"{name}-labels-idx1-ubyte.gz", 0x801, (len(lb),), lb)
        print(name, len(lb), np.bincount(lb, minlength=10).tolist())


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
