"""Command-line interface.

Subcommands: gen (synthetic data), attack (corrupt a dataset CSV),
run (one defense on a train/test pair), sweep (full experiment grid
from a config file). Exit codes: 0 success, 1 usage error, 2 runtime
failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .attacks import AttackSpec, attack_label_flip, attack_ridge
from .baselines import RansacConfig, run_baseline, run_ransac
from .core import SeverConfig, run_sever
from .data import (
    compute_p,
    gen_classification,
    gen_regression,
    load_csv,
    load_provenance,
    save_csv,
    save_provenance,
    save_scores,
    test_error,
)
from .learners import LearnerConfig, fit_ridge_closed_form, fit_subgradient
from .losses import LossModel
from .sweep import RESULTS_HEADER, run_sweep

CLI_DEFENSES = ("sever", "l2", "loss", "gradient", "gradientCentered", "ransac", "none")


class _Parser(argparse.ArgumentParser):
    """argparse variant exiting with code 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sever", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", help="generate a synthetic dataset CSV")
    gen.add_argument("--task", choices=("regression", "classification"), required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--d", type=int, required=True)
    gen.add_argument("--noise", type=float, default=0.1)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.add_argument("--test-n", type=int, default=0, help="also draw a test split")
    gen.add_argument("--test-out", default=None)

    att = sub.add_parser("attack", help="append outliers to a dataset CSV")
    att.add_argument("--in", dest="infile", required=True)
    att.add_argument("--method", choices=("ridge-alpha-beta", "label-flip"), required=True)
    att.add_argument("--eps", type=float, required=True)
    att.add_argument("--alpha", type=float, default=1.0)
    att.add_argument("--beta", type=float, default=1.0)
    att.add_argument("--noise-scale", type=float, default=None)
    att.add_argument("--center", default=None, help="comma-separated cluster center")
    att.add_argument("--seed", type=int, default=0)
    att.add_argument("--out", required=True)
    att.add_argument("--provenance-out", default=None,
                     help="default: <out> with a .provenance.csv suffix")

    run = sub.add_parser("run", help="run one defense on a train/test pair")
    run.add_argument("--train", required=True)
    run.add_argument("--test", required=True)
    run.add_argument("--defense", choices=CLI_DEFENSES, required=True)
    run.add_argument("--learner", choices=("ridge", "svm", "logistic"), required=True)
    run.add_argument("--p", type=float, default=None,
                     help="per-round removal fraction; default: class formula")
    run.add_argument("--rounds", type=int, default=2)
    run.add_argument("--sigma", type=float, default=None,
                     help="spread bound; switches the filter to the randomized variant")
    run.add_argument("--per-class", action="store_true")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--lambda", dest="lam", type=float, default=None,
                     help="regularization; default 0.01 (ridge) or 1/n")
    run.add_argument("--gamma-target", type=float, default=1e-3)
    run.add_argument("--max-epochs", type=int, default=400)
    run.add_argument("--step-size", type=float, default=0.5)
    run.add_argument("--eps", type=float, default=0.02,
                     help="assumed contamination level (sets default p)")
    run.add_argument("--provenance", default=None, help="ground-truth flags CSV")
    run.add_argument("--ransac-subsample", type=int, default=None)
    run.add_argument("--ransac-rounds", type=int, default=100)
    run.add_argument("--ransac-selection", default="median_train_loss",
                     choices=("median_train_loss", "oracle_test"))
    run.add_argument("--scores-out", default=None)
    run.add_argument("--out", default=None, help="write a one-row results CSV")

    swp = sub.add_parser("sweep", help="run a config-driven experiment grid")
    swp.add_argument("--config", required=True)
    swp.add_argument("--out-dir", required=True)
    return parser


def _cmd_gen(args) -> None:
    gen = gen_regression if args.task == "regression" else gen_classification
    n_test = args.test_n if args.test_n > 0 else 1
    train, test, _ = gen(args.n, args.d, args.noise, seed=args.seed, n_test=n_test)
    save_csv(train, args.out)
    if args.test_out is not None:
        if args.test_n <= 0:
            raise ValueError("--test-out requires --test-n")
        save_csv(test, args.test_out)


def _cmd_attack(args) -> None:
    data = load_csv(args.infile)
    if args.method == "ridge-alpha-beta":
        spec = AttackSpec(
            eps=args.eps, kind="ridge_alpha_beta", alpha=args.alpha, beta=args.beta,
            noise_scale=args.noise_scale, seed=args.seed,
        )
        out = attack_ridge(data, spec)
    else:
        center = None
        if args.center is not None:
            center = np.array([float(t) for t in args.center.split(",")])
        spec = AttackSpec(
            eps=args.eps, kind="label_flip_cluster", noise_scale=args.noise_scale,
            cluster_center=center, seed=args.seed,
        )
        out = attack_label_flip(data, spec)
    save_csv(out, args.out)
    prov_path = args.provenance_out
    if prov_path is None:
        base = args.out[:-4] if args.out.endswith(".csv") else args.out
        prov_path = base + ".provenance.csv"
    save_provenance(out, prov_path)


def _cmd_run(args) -> None:
    train = load_csv(args.train)
    test = load_csv(args.test)
    if args.provenance is not None:
        train.provenance = load_provenance(args.provenance, train.n)

    kind = {"ridge": "squared", "svm": "hinge", "logistic": "logistic"}[args.learner]
    lam = args.lam
    if lam is None:
        lam = 0.01 if args.learner == "ridge" else 1.0 / train.n
    model = LossModel(kind, lam=lam)
    if args.learner == "ridge":
        learner = lambda mo, da: fit_ridge_closed_form(da, mo.lam)
    else:
        lcfg = LearnerConfig(
            gamma_target=args.gamma_target, max_epochs=args.max_epochs,
            step_size=args.step_size,
        )
        learner = lambda mo, da: fit_subgradient(mo, da, lcfg).w

    p = args.p
    if p is None:
        if model.is_classification:
            n_plus, n_minus = train.class_counts()
            p = compute_p(n_plus, n_minus, args.eps, args.rounds)
        else:
            p = args.eps / 2.0

    if args.defense == "none":
        out = run_baseline("noDefense", model, train, learner, SeverConfig())
    elif args.defense == "ransac":
        rcfg = RansacConfig(
            subsample_size=args.ransac_subsample, num_rounds=args.ransac_rounds,
            selection=args.ransac_selection, seed=args.seed,
        )
        td = test if args.ransac_selection == "oracle_test" else None
        out = run_ransac(model, train, learner, rcfg, test_data=td)
    else:
        if args.sigma is not None:
            scfg = SeverConfig(
                variant="theoretical", sigma=args.sigma,
                per_class=args.per_class, seed=args.seed,
            )
        else:
            scfg = SeverConfig(
                variant="practical", p_fraction=p, num_rounds=args.rounds,
                per_class=args.per_class, seed=args.seed,
            )
        if args.defense == "sever":
            out = run_sever(model, train, learner, scfg)
        else:
            out = run_baseline(args.defense, model, train, learner, scfg)

    err = test_error(model, out.w, test)
    removed = out.removed_total
    prov = train.provenance
    bad = int(prov[removed].sum()) if prov is not None and removed.size else 0
    good = int(removed.size) - bad
    print(
        f"defense={args.defense} learner={args.learner} test_error={err:.6g} "
        f"rounds={out.rounds_run} removed={removed.size} achieved_gamma={out.achieved_gamma:.3g}"
    )
    if args.scores_out is not None:
        save_scores(out.score_history, args.scores_out, provenance=prov)
    if args.out is not None:
        label = args.defense
        if args.defense == "ransac" and args.ransac_selection == "oracle_test":
            label = "ransac:oracle_test"
        with open(args.out, "w") as fh:
            fh.write(RESULTS_HEADER + "\n")
            err_txt = format(err, ".17g")
            fh.write(
                f"{format(args.eps, '.17g')},cli,{label},{args.learner},0,"
                f"{err_txt},{out.rounds_run},{good},{bad}\n"
            )


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "gen":
            _cmd_gen(args)
        elif args.command == "attack":
            _cmd_attack(args)
        elif args.command == "run":
            _cmd_run(args)
        else:
            run_sweep(args.config, args.out_dir)
    except Exception as exc:  # runtime failure -> exit 2
        print(f"sever: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
