"""Risk and AUROC of the oracle and the four trained objectives across the shift family.

    python scripts/replicate_shift.py --out results/shift.csv --seeds 10
"""

from fairshift import metrics as M
from fairshift.experiments import default_family, oracle_scorer, run_seed, with_seed

from _common import load, parser, write_rows


def main():
    args = parser(__doc__.splitlines()[0]).parse_args()
    base = load(args)
    rows = []
    for seed in range(args.seeds):
        run = run_seed(with_seed(base, seed))
        sets = M.family_test_sets(run.bundle.pool, default_family(run.cfg), run.cfg["evaluate"]["n_per"], seed)
        models = dict(run.models, oracle=oracle_scorer(run.bundle))
        for name, m in models.items():
            for mu, d in sets.items():
                rows.append({"seed": seed, "model": name, "mu": mu,
                             "risk": M.risk(m, d), "auroc": M.model_auroc(m, d)})
        print(f"seed {seed} done", flush=True)
    write_rows(args.out, rows)


if __name__ == "__main__":
    main()
