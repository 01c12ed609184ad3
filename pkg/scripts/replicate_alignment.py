"""Robustness range against EO and DP violation for each trained objective.

    python scripts/replicate_alignment.py --out results/alignment.csv
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
        fam, n_per = default_family(run.cfg), run.cfg["evaluate"]["n_per"]
        for name, m in dict(run.models, oracle=oracle_scorer(run.bundle)).items():
            rng_, _ = M.robustness_range(m, run.bundle.pool, fam, n_per, seed)
            rows.append({"seed": seed, "model": name, "robustness_range": rng_,
                         "eo_violation": M.eo_violation(m, run.bundle.test),
                         "dp_violation": M.dp_violation(m, run.bundle.test)})
        print(f"seed {seed} done", flush=True)
    write_rows(args.out, rows)


if __name__ == "__main__":
    main()
