"""Cross-validated model selection over the desk-scale alpha grid for each MMD objective.

    python scripts/sweep_synthetic.py --out results/sweep.csv --seeds 1
"""

import warnings

from fairshift.config import SYNTHETIC_ALPHA_GRID, train_config
from fairshift.experiments import make_bundle, train_validation, with_seed
from fairshift.modelselect import select

from _common import load, parser, write_rows


def main():
    ap = parser(__doc__.splitlines()[0], seeds=1)
    ap.add_argument("--config-grid", action="store_true", help="use sweep.alpha from the config instead")
    args = ap.parse_args()
    base = load(args)
    alphas = base["sweep"]["alpha"] if args.config_grid else SYNTHETIC_ALPHA_GRID
    rows = []
    for seed in range(args.seeds):
        cfg = with_seed(base, seed)
        fit_set, val = train_validation(cfg, make_bundle(cfg).train)
        for obj in ("m_mmd", "c_mmd", "wm_mmd"):
            grid = [train_config(cfg, obj, alpha=float(a), gamma=float(g))
                    for a in alphas for g in cfg["sweep"]["gamma"]]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                _, points = select(grid, fit_set, val, k=cfg["sweep"]["folds"])
            rows += [{"seed": seed, **p.row()} for p in points]
            print(f"seed {seed} {obj} done", flush=True)
    write_rows(args.out, rows)


if __name__ == "__main__":
    main()
