"""Seeded epsilon-sweep experiment runner.

A sweep config is an INI file (flat key=value under [section] headers)
describing one task: data generation, an attack hyperparameter grid,
the defenses to compare, and learner settings. For every cell
(eps, attack setting, trial) the runner draws fresh data, corrupts it,
runs each requested defense, and records the test error. Per-cell
seeds derive deterministically from the master seed and the cell
coordinates, so identical configs produce byte-identical CSVs no
matter how cells are scheduled.

Outputs: results.csv (one row per run), summary.csv (median over
trials), worst_case.csv (per-defense worst median over the attack
grid, the strongest-attack view).
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .attacks import AttackSpec, attack_label_flip, attack_ridge
from .baselines import RansacConfig, run_baseline, run_ransac
from .core import SeverConfig, run_sever
from .data import (
    Dataset,
    compute_p,
    gen_classification,
    gen_regression,
    robust_center_scale,
    test_error,
)
from .learners import LearnerConfig, fit_ridge_closed_form, fit_subgradient
from .losses import LossModel

RESULTS_HEADER = "eps,attack,defense,learner,trial,test_error,rounds,removed_good,removed_bad"


def save_results(records, path) -> None:
    """Write experiment records to a results CSV (shared header)."""
    with open(path, "w") as fh:
        fh.write(RESULTS_HEADER + "\n")
        for record in records:
            fh.write(record.csv_row() + "\n")

DEFENSES = ("sever", "l2", "loss", "gradient", "gradientCentered", "ransac", "noDefense")

_SCHEMA = {
    "sweep": {
        "task", "n", "n_test", "d", "noise", "trials", "seed", "eps",
        "defenses", "center", "scale",
    },
    "attack": {"kind", "alphas", "noise_scale", "cluster_geometry", "classes"},
    "defense": {"rounds", "p_mode", "sigma", "threshold_mult", "per_class"},
    "learner": {
        "kind", "lambda", "gamma_target", "max_epochs", "step_size", "domain_radius",
    },
    "ransac": {"subsample_size", "num_rounds", "selection"},
}


@dataclass
class SweepConfig:
    task: str = "regression"
    n: int = 1000
    n_test: int = 200
    d: int = 20
    noise: float = 0.1
    trials: int = 3
    seed: int = 0
    eps: tuple = (0.02, 0.04, 0.06, 0.08, 0.10)
    defenses: tuple = ("sever", "noDefense")
    center: bool = False
    scale: bool = False

    attack_kind: str = "ridge_alpha_beta"
    alphas: tuple = (1.0,)
    attack_noise_scale: float | None = None
    cluster_geometry: tuple = ((1.0, 4.0),)  # (signal, torque) pairs
    classes: tuple = (1.0, -1.0)

    rounds: int = 4
    p_mode: str = "half_eps"  # half_eps | class_formula
    sigma: float = 1.0
    threshold_mult: float = 12.0
    per_class: bool | None = None  # None: True iff classification

    learner_kind: str = "ridge"
    lam: float = 0.01
    gamma_target: float = 1e-3
    max_epochs: int = 400
    step_size: float = 0.5
    domain_radius: float | None = None

    ransac_subsample: int | None = None
    ransac_rounds: int = 100
    ransac_selection: str = "median_train_loss"


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _floats(text: str) -> tuple:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def parse_config(path) -> SweepConfig:
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    cfg = SweepConfig()
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ValueError(f"unknown config section [{section}]")
        for key, value in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ValueError(f"unknown config key [{section}] {key}")
            _apply_key(cfg, section, key, value.strip())
    _validate(cfg)
    return cfg


def _apply_key(cfg: SweepConfig, section: str, key: str, value: str) -> None:
    if section == "sweep":
        if key == "task":
            cfg.task = value
        elif key == "n":
            cfg.n = int(value)
        elif key == "n_test":
            cfg.n_test = int(value)
        elif key == "d":
            cfg.d = int(value)
        elif key == "noise":
            cfg.noise = float(value)
        elif key == "trials":
            cfg.trials = int(value)
        elif key == "seed":
            cfg.seed = int(value)
        elif key == "eps":
            cfg.eps = _floats(value)
        elif key == "defenses":
            cfg.defenses = tuple(tok.strip() for tok in value.split(",") if tok.strip())
        elif key == "center":
            cfg.center = _parse_bool(value)
        elif key == "scale":
            cfg.scale = _parse_bool(value)
    elif section == "attack":
        if key == "kind":
            cfg.attack_kind = value
        elif key == "alphas":
            cfg.alphas = _floats(value)
        elif key == "noise_scale":
            cfg.attack_noise_scale = float(value) if value else None
        elif key == "cluster_geometry":
            pairs = []
            for tok in value.split(","):
                tok = tok.strip()
                if not tok:
                    continue
                a, dist = tok.split(":")
                pairs.append((float(a), float(dist)))
            cfg.cluster_geometry = tuple(pairs)
        elif key == "classes":
            cfg.classes = _floats(value)
    elif section == "defense":
        if key == "rounds":
            cfg.rounds = int(value)
        elif key == "p_mode":
            cfg.p_mode = value
        elif key == "sigma":
            cfg.sigma = float(value)
        elif key == "threshold_mult":
            cfg.threshold_mult = float(value)
        elif key == "per_class":
            cfg.per_class = _parse_bool(value)
    elif section == "learner":
        if key == "kind":
            cfg.learner_kind = value
        elif key == "lambda":
            cfg.lam = float(value)
        elif key == "gamma_target":
            cfg.gamma_target = float(value)
        elif key == "max_epochs":
            cfg.max_epochs = int(value)
        elif key == "step_size":
            cfg.step_size = float(value)
        elif key == "domain_radius":
            cfg.domain_radius = float(value) if value else None
    elif section == "ransac":
        if key == "subsample_size":
            cfg.ransac_subsample = int(value) if value else None
        elif key == "num_rounds":
            cfg.ransac_rounds = int(value)
        elif key == "selection":
            cfg.ransac_selection = value


def _validate(cfg: SweepConfig) -> None:
    if cfg.task not in ("regression", "classification"):
        raise ValueError(f"unknown task {cfg.task!r}")
    if cfg.learner_kind not in ("ridge", "svm", "logistic"):
        raise ValueError(f"unknown learner {cfg.learner_kind!r}")
    if cfg.p_mode not in ("half_eps", "class_formula"):
        raise ValueError(f"unknown p_mode {cfg.p_mode!r}")
    if cfg.attack_kind not in ("ridge_alpha_beta", "label_flip_cluster"):
        raise ValueError(f"unknown attack kind {cfg.attack_kind!r}")
    for name in cfg.defenses:
        if name not in DEFENSES and name != "uncorrupted":
            raise ValueError(f"unknown defense {name!r}")
    if cfg.task == "regression" and cfg.learner_kind != "ridge":
        raise ValueError("regression sweeps use the ridge learner")
    if cfg.task == "classification" and cfg.learner_kind == "ridge":
        raise ValueError("classification sweeps need the svm or logistic learner")


def make_model(cfg: SweepConfig) -> LossModel:
    kind = {"ridge": "squared", "svm": "hinge", "logistic": "logistic"}[cfg.learner_kind]
    return LossModel(kind, lam=cfg.lam)


def make_learner(cfg: SweepConfig):
    if cfg.learner_kind == "ridge":
        return lambda model, data: fit_ridge_closed_form(data, model.lam)
    lcfg = LearnerConfig(
        gamma_target=cfg.gamma_target,
        max_epochs=cfg.max_epochs,
        step_size=cfg.step_size,
        domain_radius=cfg.domain_radius,
    )
    return lambda model, data: fit_subgradient(model, data, lcfg).w


@dataclass
class SweepRecord:
    eps: float
    attack: str
    defense: str
    learner: str
    trial: int
    test_error: float
    rounds: int
    removed_good: int
    removed_bad: int

    def csv_row(self) -> str:
        err = "nan" if math.isnan(self.test_error) else format(self.test_error, ".17g")
        return (
            f"{format(self.eps, '.17g')},{self.attack},{self.defense},"
            f"{self.learner},{self.trial},{err},{self.rounds},"
            f"{self.removed_good},{self.removed_bad}"
        )


@dataclass
class SweepResult:
    records: list = field(default_factory=list)

    def median_error(self, eps: float, attack: str, defense: str) -> float:
        vals = [
            r.test_error
            for r in self.records
            if r.eps == eps and r.attack == attack and r.defense == defense
        ]
        return float(np.median(vals)) if vals else float("nan")

    def attacks(self) -> list:
        seen = []
        for r in self.records:
            if r.attack not in seen and r.attack != "none":
                seen.append(r.attack)
        return seen

    def worst_median(self, eps: float, defense: str) -> float:
        vals = [self.median_error(eps, a, defense) for a in self.attacks()]
        vals = [v for v in vals if not math.isnan(v)]
        return max(vals) if vals else float("nan")


def _attack_grid(cfg: SweepConfig) -> list:
    """(name, params) rows of the attack hyperparameter grid."""
    if cfg.attack_kind == "ridge_alpha_beta":
        return [(f"alpha={a:g}", {"alpha": a}) for a in cfg.alphas]
    rows = []
    for lab in cfg.classes:
        for a, dist in cfg.cluster_geometry:
            name = f"c={'+' if lab > 0 else '-'}1;a={a:g};D={dist:g}"
            rows.append((name, {"label": lab, "signal": a, "torque": dist}))
    return rows


def _cluster_center(train: Dataset, clean_w, params, rng) -> np.ndarray:
    """Attack center: signal * (class mean) + torque * u.

    u is a seeded random unit direction orthogonal to the attacker's own
    clean fit, so the pull rotates the decision boundary instead of
    merely rescaling it.
    """
    lab = params["label"]
    mu = train.active_X[train.active_y == lab].mean(axis=0)
    u = rng.standard_normal(train.d)
    w_hat = clean_w / max(np.linalg.norm(clean_w), 1e-12)
    u -= (u @ w_hat) * w_hat
    u /= np.linalg.norm(u)
    return params["signal"] * mu + params["torque"] * u


def _corrupt(cfg: SweepConfig, train, clean_w, params, eps, seed) -> Dataset:
    if cfg.attack_kind == "ridge_alpha_beta":
        spec = AttackSpec(
            eps=eps,
            kind="ridge_alpha_beta",
            alpha=params["alpha"],
            beta=params["alpha"],
            noise_scale=cfg.attack_noise_scale,
            seed=seed,
        )
        return attack_ridge(train, spec)
    rng = np.random.default_rng(seed)
    center = _cluster_center(train, clean_w, params, rng)
    spec = AttackSpec(
        eps=eps,
        kind="label_flip_cluster",
        noise_scale=cfg.attack_noise_scale,
        cluster_center=center,
        seed=int(rng.integers(2**62)),
    )
    return attack_label_flip(train, spec)


def _defense_label(cfg: SweepConfig, defense: str) -> str:
    """CSV label; RANSAC's test-peeking variant is flagged explicitly."""
    if defense == "ransac" and cfg.ransac_selection == "oracle_test":
        return "ransac:oracle_test"
    return defense


def _removal_fraction(cfg: SweepConfig, eps: float, corrupted: Dataset) -> float:
    if cfg.p_mode == "half_eps":
        return eps / 2.0
    n_plus, n_minus = corrupted.class_counts()
    return compute_p(n_plus, n_minus, eps, cfg.rounds)


def _run_defense(cfg, defense, model, learner, corrupted, test, p, seed):
    """Returns (test_error, rounds, removed ids array)."""
    empty = np.empty(0, dtype=int)
    if defense == "noDefense" or (p == 0.0 and defense != "ransac"):
        out = run_baseline("noDefense", model, corrupted, learner, SeverConfig())
        return test_error(model, out.w, test), out.rounds_run, empty
    if defense == "ransac":
        rcfg = RansacConfig(
            subsample_size=cfg.ransac_subsample,
            num_rounds=cfg.ransac_rounds,
            selection=cfg.ransac_selection,
            seed=seed,
        )
        td = test if cfg.ransac_selection == "oracle_test" else None
        out = run_ransac(model, corrupted, learner, rcfg, test_data=td)
        return test_error(model, out.w, test), out.rounds_run, empty
    per_class = cfg.per_class
    if per_class is None:
        per_class = cfg.task == "classification"
    scfg = SeverConfig(
        variant="practical",
        p_fraction=p,
        num_rounds=cfg.rounds,
        per_class=per_class,
        threshold_mult=cfg.threshold_mult,
        seed=seed,
    )
    if defense == "sever":
        out = run_sever(model, corrupted, learner, scfg)
    else:
        out = run_baseline(defense, model, corrupted, learner, scfg)
    return test_error(model, out.w, test), out.rounds_run, out.removed_total


def run_sweep(config_path, out_dir=None) -> SweepResult:
    """Execute every sweep cell and write the results CSVs.

    Per-cell failures are recorded as rows with test_error nan and do
    not abort the sweep; rows are flushed as they are produced.
    """
    cfg = parse_config(config_path)
    model = make_model(cfg)
    learner = make_learner(cfg)
    gen = gen_regression if cfg.task == "regression" else gen_classification

    result = SweepResult()
    out_fh = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        out_fh = open(os.path.join(out_dir, "results.csv"), "w")
        out_fh.write(RESULTS_HEADER + "\n")

    def emit(record: SweepRecord):
        result.records.append(record)
        if out_fh is not None:
            out_fh.write(record.csv_row() + "\n")
            out_fh.flush()

    try:
        for i_eps, eps in enumerate(cfg.eps):
            for i_att, (att_name, params) in enumerate(_attack_grid(cfg)):
                for trial in range(cfg.trials):
                    ss = np.random.SeedSequence(
                        entropy=(cfg.seed, i_eps, i_att, trial)
                    )
                    data_seed, attack_seed, defense_seed = ss.spawn(3)
                    train, test, _ = gen(
                        cfg.n, cfg.d, cfg.noise, seed=data_seed, n_test=cfg.n_test
                    )
                    clean_w = learner(model, train)
                    if "uncorrupted" in cfg.defenses:
                        emit(
                            SweepRecord(
                                eps, att_name, "uncorrupted", cfg.learner_kind,
                                trial, test_error(model, clean_w, test), 1, 0, 0,
                            )
                        )
                    if eps > 0:
                        corrupted = _corrupt(cfg, train, clean_w, params, eps, attack_seed)
                    else:
                        corrupted = train.copy()
                        corrupted.provenance = np.zeros(corrupted.n, dtype=bool)
                    if cfg.center:
                        corrupted, test_used, _, _ = robust_center_scale(
                            corrupted, test, eps, do_scale=cfg.scale, seed=defense_seed
                        )
                    else:
                        test_used = test
                    p = _removal_fraction(cfg, eps, corrupted) if eps > 0 else 0.0
                    for i_def, defense in enumerate(cfg.defenses):
                        if defense == "uncorrupted":
                            continue
                        dseed = np.random.SeedSequence(
                            entropy=(cfg.seed, i_eps, i_att, trial, 1000 + i_def)
                        )
                        try:
                            err, rounds, removed = _run_defense(
                                cfg, defense, model, learner, corrupted, test_used,
                                p, dseed,
                            )
                            prov = corrupted.provenance
                            bad = int(prov[removed].sum()) if removed.size else 0
                            good = int(removed.size) - bad
                            emit(
                                SweepRecord(
                                    eps, att_name, _defense_label(cfg, defense),
                                    cfg.learner_kind, trial, err, rounds, good, bad,
                                )
                            )
                        except Exception:
                            emit(
                                SweepRecord(
                                    eps, att_name, _defense_label(cfg, defense),
                                    cfg.learner_kind, trial, float("nan"), 0, 0, 0,
                                )
                            )
    finally:
        if out_fh is not None:
            out_fh.close()

    if out_dir is not None:
        _write_summaries(cfg, result, out_dir)
    return result


def _write_summaries(cfg: SweepConfig, result: SweepResult, out_dir) -> None:
    defenses = [_defense_label(cfg, d) for d in cfg.defenses]
    with open(os.path.join(out_dir, "summary.csv"), "w") as fh:
        fh.write("eps,attack,defense,learner,median_test_error\n")
        for eps in cfg.eps:
            for att_name, _ in _attack_grid(cfg):
                for defense in defenses:
                    med = result.median_error(eps, att_name, defense)
                    fh.write(
                        f"{format(eps, '.17g')},{att_name},{defense},"
                        f"{cfg.learner_kind},{format(med, '.17g')}\n"
                    )
    with open(os.path.join(out_dir, "worst_case.csv"), "w") as fh:
        fh.write("eps,defense,learner,worst_median_test_error\n")
        for eps in cfg.eps:
            for defense in defenses:
                worst = result.worst_median(eps, defense)
                fh.write(
                    f"{format(eps, '.17g')},{defense},{cfg.learner_kind},"
                    f"{format(worst, '.17g')}\n"
                )
