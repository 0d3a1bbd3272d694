import argparse
import os

from cdsar.config import load_config

CONFIG_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), os.pardir, "configs")


def parse(default_config, default_out, description):
    ap = argparse.ArgumentParser(description=description)
    ap.add_argument("--config", default=os.path.join(CONFIG_DIR, default_config))
    ap.add_argument("--out", default=default_out)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--size", type=int, help="override train and eval ensemble sizes")
    args = ap.parse_args()
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if args.size is not None:
        cfg = cfg.replace(train_size=args.size, eval_size=args.size)
    return args, cfg
