#!/usr/bin/env python3
"""Build data/mnist_10k.csv.gz from the 10,000 MNIST digits bundled in the
`mnist` npm package (https://github.com/cazala/mnist).

The package stores pixels as intensity/255 rounded to three decimals, which is
precise enough to recover the original 0-255 integers exactly. Output rows use
the Kaggle layout: label,p0,...,p783 with a header line. Samples are
interleaved round-robin across the ten digit files so any prefix is balanced.
"""
import gzip
import json
import pathlib
import subprocess
import sys
import tarfile
import tempfile

VERSION = "1.1.0"


def main(out_path: str) -> None:
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(["npm", "pack", f"mnist@{VERSION}"], cwd=tmp, check=True,
                       stdout=subprocess.DEVNULL)
        with tarfile.open(pathlib.Path(tmp) / f"mnist-{VERSION}.tgz") as tar:
            tar.extractall(tmp)
        digits = []
        for d in range(10):
            raw = json.loads((pathlib.Path(tmp) / "package/src/digits" / f"{d}.json").read_text())
            flat = raw["data"]
            assert len(flat) % 784 == 0
            digits.append([flat[i:i + 784] for i in range(0, len(flat), 784)])

    out = pathlib.Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = 0
    with gzip.open(out, "wt", newline="\n") as f:
        f.write("label," + ",".join(f"pixel{i}" for i in range(784)) + "\n")
        longest = max(len(d) for d in digits)
        for i in range(longest):
            for label, samples in enumerate(digits):
                if i < len(samples):
                    px = [round(v * 255) for v in samples[i]]
                    assert all(0 <= p <= 255 for p in px)
                    f.write(f"{label}," + ",".join(map(str, px)) + "\n")
                    rows += 1
    print(f"wrote {rows} rows to {out}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/mnist_10k.csv.gz")
