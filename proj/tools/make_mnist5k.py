#!/usr/bin/env python3
"""Convert the 5,000-sample MNIST subset bundled with mlxtend into IDX files.

    pip download mlxtend --no-deps -d /tmp/mlx
    python3 tools/make_mnist5k.py /tmp/mlx/mlxtend-*.whl data/mnist5k

The CSV has 785 columns per row: 784 pixel values (0-255) followed by the label.
"""
import gzip
import io
import struct
import sys
import zipfile
from pathlib import Path

CSV_MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def main() -> None:
    wheel, out = Path(sys.argv[1]), Path(sys.argv[2])
    with zipfile.ZipFile(wheel) as z:
        rows = gzip.decompress(z.read(CSV_MEMBER)).decode().splitlines()
    pixels = bytearray()
    labels = bytearray()
    for row in rows:
        values = [int(float(v)) for v in row.split(",")]
        pixels.extend(values[:784])
        labels.append(values[784])
    n = len(rows)
    out.mkdir(parents=True, exist_ok=True)
    (out / "images-idx3-ubyte").write_bytes(struct.pack(">IIII", 0x803, n, 28, 28) + bytes(pixels))
    (out / "labels-idx1-ubyte").write_bytes(struct.pack(">II", 0x801, n) + bytes(labels))
    print(f"wrote {n} samples to {out}")


if __name__ == "__main__":
    main()
