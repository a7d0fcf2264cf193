"""Write the synthetic ellipsoid-volume dataset to disk.

Produces ``<out>/templates/slice_XX.raw`` (float64 + sidecar), ``<out>/test.raw``
and 16-bit PNG previews, ready for ``tomoprior reconstruct`` / ``table`` / ``tune``.
"""
import argparse
from pathlib import Path

from tomoprior import dataio
from tomoprior.phantoms import slice_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data/synthetic")
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--templates", type=int, default=6)
    ap.add_argument("--perturbation", type=float, default=2.0,
                    help="scale of the test slice's out-of-span residual")
    args = ap.parse_args()

    ds = slice_dataset(args.size, args.templates, perturbation=args.perturbation)
    out = Path(args.out)
    for i, t in enumerate(ds.templates):
        dataio.save_image_raw(t, out / "templates" / f"slice_{i:02d}.raw")
        dataio.save_image_png(t, out / "preview" / f"slice_{i:02d}.png")
    dataio.save_image_raw(ds.test, out / "test.raw")
    dataio.save_image_png(ds.test, out / "preview" / "test.png")
    print(f"wrote {len(ds.templates)} templates (z = {', '.join(f'{z:.2f}' for z in ds.template_z)}) "
          f"and a test slice at z = {ds.test_z:.2f} to {out}")


if __name__ == "__main__":
    main()
