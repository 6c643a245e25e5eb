"""Train-and-export entry point: scenario config in, weights JSON out."""

from __future__ import annotations

import argparse
import dataclasses
import sys

from trainkit import dataset as dsmod
from trainkit import scenario as sn
from trainkit.config import TrainConfig


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="trainkit",
        description="Clone a scenario's analytic controller into a "
                    "sinusoidal network and export the weights.")
    ap.add_argument("--config", required=True, help="scenario config JSON")
    ap.add_argument("--out", required=True, help="weights JSON to write")
    ap.add_argument("--curve", help="training-curve CSV to write")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--toy", action="store_true",
                    help="small preset: three sine layers of 16, 20 epochs")
    ap.add_argument("--epochs", type=int)
    ap.add_argument("--batch", type=int)
    ap.add_argument("--lr", type=float)
    ap.add_argument("--k", type=int)
    ap.add_argument("--omega", type=float)
    ap.add_argument("--layers", help="comma-separated widths, e.g. 16,16,16")
    ap.add_argument("--sizes", help="train,val,test counts, e.g. 2048,512,100")
    ap.add_argument("--normalize", action="store_true",
                    help="exported network emits unit directions")
    return ap


def _config_from(args) -> TrainConfig:
    cfg = TrainConfig.toy() if args.toy else TrainConfig()
    tweaks = {}
    for name in ("epochs", "batch", "lr", "k", "omega"):
        v = getattr(args, name)
        if v is not None:
            tweaks[name] = v
    if args.layers is not None:
        tweaks["layers"] = tuple(int(w) for w in args.layers.split(","))
    if args.sizes is not None:
        sizes = tuple(int(s) for s in args.sizes.split(","))
        tweaks["sizes"] = sizes
    return dataclasses.replace(cfg, **tweaks) if tweaks else cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _config_from(args)
        setup = sn.load_config(args.config)
        ds = dsmod.make_dataset(setup, cfg, seed=args.seed)
        # imported late so config mistakes surface without touching torch
        from trainkit import training
        res = training.train(cfg, ds, seed=args.seed, weights_path=args.out,
                             curve_path=args.curve, normalize=args.normalize)
    except (sn.ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    print(f"trained on {len(ds.train_x)} samples ({ds.skipped} skipped), "
          f"val mse {res.val_mse:.3e} vs constant baseline "
          f"{res.baseline_mse:.3e}, test mse {res.test_mse:.3e}")
    print(f"weights written to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
