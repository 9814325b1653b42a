#!/usr/bin/env python3
# Copyright 2026 The antforge Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Converts the digit JSON files of the `mnist` npm package into IDX files.

Each src/digits/<d>.json holds {"data": [...]} with 28x28 images of digit d
flattened back to back, pixels as byte/255 rounded to three decimals. The
script splits every class deterministically into train/test and writes the
four standard file names, so the output directory works as data.source=mnist.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/mnist_json_to_idx.py package/src/digits /path/to/mnist
"""

import argparse
import hashlib
import json
import pathlib
import random
import struct


def write_idx(path, magic, dims, payload):
    with open(path, "wb") as f:
        f.write(struct.pack(">I", magic))
        for d in dims:
            f.write(struct.pack(">I", d))
        f.write(bytes(payload))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("digits_dir", type=pathlib.Path)
    ap.add_argument("out_dir", type=pathlib.Path)
    ap.add_argument("--test-fraction", type=float, default=0.2)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    train, test = [], []
    for digit in range(10):
        data = json.loads((args.digits_dir / f"{digit}.json").read_text())["data"]
        if len(data) % 784:
            raise SystemExit(f"{digit}.json: length {len(data)} is not a multiple of 784")
        images = [
            [min(255, max(0, round(v * 255))) for v in data[i : i + 784]]
            for i in range(0, len(data), 784)
        ]
        n_test = round(len(images) * args.test_fraction)
        test += [(img, digit) for img in images[:n_test]]
        train += [(img, digit) for img in images[n_test:]]

    rng = random.Random(args.seed)
    rng.shuffle(train)
    rng.shuffle(test)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for name, rows in (("train", train), ("t10k", test)):
        pixels = [p for img, _ in rows for p in img]
        write_idx(args.out_dir / f"{name}-images-idx3-ubyte", 0x803, (len(rows), 28, 28), pixels)
        write_idx(args.out_dir / f"{name}-labels-idx1-ubyte", 0x801, (len(rows),), [l for _, l in rows])
        print(f"{name}: {len(rows)} images")
    with open(args.out_dir / "SHA256SUMS", "w") as f:
        for p in sorted(args.out_dir.glob("*-ubyte")):
            f.write(f"{hashlib.sha256(p.read_bytes()).hexdigest()}  {p.name}\n")


if __name__ == "__main__":
    main()
