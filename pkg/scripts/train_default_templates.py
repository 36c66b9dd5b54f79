"""Regenerate the bundled texture templates from synthetic training patches.

    python scripts/train_default_templates.py [--out src/mfc/data/default_templates.txt]
"""
import argparse
from pathlib import Path

from mfc.synthetic import texture_patches
from mfc.texture import save_templates, train_templates

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "mfc" / "data" / "default_templates.txt"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=DEFAULT_OUT)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--per-class", type=int, default=21)
    args = parser.parse_args()
    templates = train_templates(texture_patches(args.seed, args.per_class))
    save_templates(templates, args.out)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
