"""Download and unpack the Stanford bunny scan into data/bunny.ply.

Needs network access; the test suite never calls this (it uses the
checked-in data/blob_mesh.ply instead).  Pass a target path to override
the default location.
"""

import sys
import tarfile
import tempfile
import urllib.request
from pathlib import Path

URL = "http://graphics.stanford.edu/pub/3Dscanrep/bunny.tar.gz"
MEMBER = "bunny/reconstruction/bun_zipper.ply"


def main(out_path):
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile(suffix=".tar.gz") as tmp:
        print(f"downloading {URL} ...")
        urllib.request.urlretrieve(URL, tmp.name)
        with tarfile.open(tmp.name, "r:gz") as tar:
            src = tar.extractfile(MEMBER)
            if src is None:
                raise RuntimeError(f"{MEMBER} missing from archive")
            out_path.write_bytes(src.read())
    print(f"wrote {out_path}")


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else \
        Path(__file__).resolve().parent.parent / "data" / "bunny.ply"
    main(target)
