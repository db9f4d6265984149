import argparse
from pathlib import Path


def out_dir(description, default):
    ap = argparse.ArgumentParser(description=description)
    ap.add_argument("--out", default=default, help="output directory")
    args = ap.parse_args()
    path = Path(args.out)
    path.mkdir(parents=True, exist_ok=True)
    return path
