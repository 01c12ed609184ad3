"""Per-slice conditional MMD and weighted marginal MMD on fit, validation and test splits.

    python scripts/replicate_stability.py --out results/stability.csv
"""

from fairshift.experiments import run_seed, slice_mmds, with_seed

from _common import load, parser, write_rows


def main():
    args = parser(__doc__.splitlines()[0]).parse_args()
    base = load(args)
    rows = []
    for seed in range(args.seeds):
        run = run_seed(with_seed(base, seed), objectives=("c_mmd", "wm_mmd"))
        splits = {"train": run.fit_set, "validation": run.validation, "test": run.bundle.test}
        for name, m in run.models.items():
            gamma = run.cfg["models"][name].get("gamma", run.cfg["train"]["gamma"])
            for split_name, d in splits.items():
                for (stat, y), value in slice_mmds(m, d, gamma).items():
                    rows.append({"seed": seed, "model": name, "split": split_name,
                                 "statistic": stat, "y_slice": y, "value": value})
        print(f"seed {seed} done", flush=True)
    write_rows(args.out, rows)


if __name__ == "__main__":
    main()
