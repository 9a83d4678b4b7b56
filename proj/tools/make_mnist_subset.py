#!/usr/bin/env python3
# Copyright 2026 The robustprune Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Writes a small MNIST subset in gzipped IDX format.

The source is the 5000-example MNIST sample shipped inside the mlxtend wheel
(mlxtend/data/data/mnist_5k.csv.gz, 784 pixel columns then the label). It is
sorted by class, so the split is stratified: per class, a seeded shuffle puts
the first 400 examples in train and the remaining 100 in test. Both files are
then shuffled with the same seed.
"""

import argparse
import gzip
import io
import struct
import zipfile
from pathlib import Path

import numpy as np

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def write_idx(path, array, dtype_code=0x08):
    header = struct.pack(">HBB", 0, dtype_code, array.ndim)
    header += b"".join(struct.pack(">I", d) for d in array.shape)
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(header + array.astype(np.uint8).tobytes())


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--wheel", required=True, help="path to an mlxtend wheel")
    ap.add_argument("--out", default="data/mnist5k")
    ap.add_argument("--train-per-class", type=int, default=400)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    raw = gzip.decompress(zipfile.ZipFile(args.wheel).read(MEMBER))
    table = np.loadtxt(io.BytesIO(raw), delimiter=",", dtype=np.int64)
    images = table[:, :-1].reshape(-1, 28, 28)
    labels = table[:, -1]

    rng = np.random.default_rng(args.seed)
    train, test = [], []
    for c in np.unique(labels):
        ids = rng.permutation(np.flatnonzero(labels == c))
        train.extend(ids[: args.train_per_class])
        test.extend(ids[args.train_per_class:])
    train = rng.permutation(train)
    test = rng.permutation(test)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_idx(out / "train-images-idx3-ubyte.gz", images[train])
    write_idx(out / "train-labels-idx1-ubyte.gz", labels[train])
    write_idx(out / "t10k-images-idx3-ubyte.gz", images[test])
    write_idx(out / "t10k-labels-idx1-ubyte.gz", labels[test])
    print(f"wrote {len(train)} train and {len(test)} test examples to {out}")


if __name__ == "__main__":
    main()
