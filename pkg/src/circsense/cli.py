"""``circsense`` command-line benchmark harness.

Subcommands: ``lemma-check``, ``rip``, ``tail``, ``recover``, ``sweep``.
Output is CSV: one comment line recording the tool version and the full
configuration, then a header row, then data rows in a fixed order.  Exit
status is 0 on success, 1 when an assertion or budget check fails and 2
for configuration errors.
"""

import argparse
import csv
import io
import math
import sys

import numpy as np

from circsense import rip, rng, spectral
from circsense.circulant import MODELS, OMEGA_MODES, sample_set
from circsense.recovery import (
    ALGORITHM_CONSTANTS,
    ALGORITHMS,
    RecoveryProblem,
    recover,
    stability_ratio,
)

COMMANDS = ("lemma-check", "rip", "tail", "recover", "sweep")
METHODS = ("auto", "exact", "monte-carlo", "both")

DEFAULTS = {
    "n": 64,
    "m": "32",
    "s": "2",
    "model": "rademacher",
    "omega_mode": "uniform",
    "draws": 200,
    "trials": 100,
    "seed": 0,
    "out": None,
    "c1": 1.0,
    "c2": 1.0,
    "c3": 1.0,
    "algorithm": "all",
    "method": "auto",
    "mc_trials": 1000,
    "tau": 0.0,
    "lambda_max": 1.0,
    "lambda_steps": 101,
    "workers": 1,
}
COMMAND_DEFAULTS = {
    "lemma-check": {"n": 8, "draws": 50},
    "tail": {"draws": 2000},
    "sweep": {"algorithm": "iht", "m": "", "s": ""},
}
INT_KEYS = {"n", "draws", "trials", "seed", "mc_trials", "lambda_steps", "workers"}
FLOAT_KEYS = {"c1", "c2", "c3", "tau", "lambda_max"}
# keys that do not influence results and are left out of the CSV header
UNRECORDED = {"out", "workers", "config"}

LEMMA_PROPERTIES = (
    "circulant",
    "conjugate_symmetric",
    "diagonal",
    "off_diagonal",
    "row_energy",
    "eigenvalues",
    "spectral_norm",
    "frobenius",
    "modulation_identity",
)


class ConfigError(ValueError):
    pass


def _version():
    from circsense import __version__

    return __version__


# ---------------------------------------------------------------------------
# configuration


def read_config_file(path):
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in DEFAULTS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def _int_list(text, name):
    items = [item.strip() for item in str(text).split(",") if item.strip()]
    try:
        return [int(item) for item in items]
    except ValueError:
        raise ConfigError(f"--{name} expects comma-separated integers, got {text!r}") from None


def resolve_config(command, args):
    """Merge built-in defaults, the optional config file and explicit flags."""
    cfg = dict(DEFAULTS)
    cfg.update(COMMAND_DEFAULTS.get(command, {}))
    if args.get("config"):
        cfg.update(read_config_file(args["config"]))
    cfg.update({k: v for k, v in args.items() if v is not None and k in DEFAULTS})
    try:
        for key in INT_KEYS:
            cfg[key] = int(cfg[key])
        for key in FLOAT_KEYS:
            cfg[key] = float(cfg[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad numeric option: {exc}") from None
    cfg["m"] = _int_list(cfg["m"], "m")
    cfg["s"] = _int_list(cfg["s"], "s")
    _validate(command, cfg)
    return cfg


def _validate(command, cfg):
    if cfg["n"] < 1:
        raise ConfigError("--n must be positive")
    if cfg["model"] not in MODELS:
        raise ConfigError(f"--model must be one of {', '.join(MODELS)}")
    if cfg["omega_mode"] not in OMEGA_MODES:
        raise ConfigError(f"--omega-mode must be one of {', '.join(OMEGA_MODES)}")
    if cfg["method"] not in METHODS:
        raise ConfigError(f"--method must be one of {', '.join(METHODS)}")
    if cfg["workers"] < 1 or cfg["trials"] < 1 or cfg["draws"] < 1 or cfg["mc_trials"] < 1:
        raise ConfigError("--workers, --trials, --draws and --mc-trials must be positive")
    if cfg["tau"] < 0:
        raise ConfigError("--tau must be non-negative")
    for key in ("c1", "c2", "c3"):
        if cfg[key] < 0 or not math.isfinite(cfg[key]):
            raise ConfigError(f"--{key} must be a finite non-negative number")
    if command == "lemma-check":
        return
    if not cfg["m"] or not cfg["s"]:
        raise ConfigError("empty grid: --m and --s need at least one value each")
    for m in cfg["m"]:
        if not 1 <= m <= cfg["n"]:
            raise ConfigError(f"every m must satisfy 1 <= m <= n={cfg['n']}, got {m}")
    for s in cfg["s"]:
        if not 1 <= s <= cfg["n"]:
            raise ConfigError(f"every s must satisfy 1 <= s <= n={cfg['n']}, got {s}")
    if command in ("tail", "recover") and (len(cfg["m"]) != 1 or len(cfg["s"]) != 1):
        raise ConfigError(f"{command} takes a single --m and --s")
    if command == "tail" and cfg["draws"] < 2:
        raise ConfigError("tail needs at least 2 draws")
    algos = _algorithms(cfg["algorithm"])
    if command == "sweep" and len(algos) != 1:
        raise ConfigError("sweep takes a single --algorithm")


def _algorithms(text):
    if text == "all":
        return list(ALGORITHMS)
    names = [a.strip() for a in str(text).split(",") if a.strip()]
    for name in names:
        if name not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHMS)} or all")
    if not names:
        raise ConfigError("--algorithm is empty")
    return names


# ---------------------------------------------------------------------------
# CSV output


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (tuple, list)):
        return ";".join(str(v) for v in value)
    return str(value)


def render_csv(command, cfg, header, rows):
    buf = io.StringIO()
    recorded = " ".join(
        f"{k}={_fmt(v) if not isinstance(v, list) else ','.join(map(str, v))}"
        for k, v in sorted(cfg.items())
        if k not in UNRECORDED
    )
    buf.write(f"# circsense {_version()} {command} {recorded} "
              f"(c1/c2/c3: {rip.SHAPE_ONLY_NOTE})\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def emit(text, out, stdout):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)


# ---------------------------------------------------------------------------
# commands; each returns (exit status, csv text or None)


def cmd_lemma_check(cfg, projector_fn=spectral.fourier_projector, stdout=sys.stdout):
    """Check the Fourier projector properties and the shift/modulation identity.

    ``projector_fn`` maps a sample set to an object with a ``matrix``
    attribute; tests substitute a corrupted projector here.
    """
    n, draws, seed = cfg["n"], cfg["draws"], cfg["seed"]
    if n > spectral.DENSE_LIMIT:
        raise ConfigError(f"lemma-check needs n <= {spectral.DENSE_LIMIT}")
    worst = dict.fromkeys(LEMMA_PROPERTIES, 0.0)
    for d in range(draws):
        g = rng.stream(seed, "lemma-check", d)
        m = int(g.integers(1, n + 1))
        samples = sample_set(n, m, "uniform", g)
        devs = spectral.projector_deviations(projector_fn(samples).matrix, m)
        devs["modulation_identity"] = spectral.modulation_deviation(n, int(g.integers(0, n)))
        for key in LEMMA_PROPERTIES:
            value = devs[key]
            worst[key] = max(worst[key], value) if np.isfinite(value) else np.inf
    tol = spectral.PROJECTOR_TOL
    failed = [key for key in LEMMA_PROPERTIES if not worst[key] <= tol]
    for key in LEMMA_PROPERTIES:
        status = "ok" if worst[key] <= tol else "FAIL"
        print(f"{key:22s} max deviation {worst[key]:.3e}  {status}", file=stdout)
    if failed:
        print(f"lemma-check failed: property {failed[0]!r} exceeds {tol:g}", file=stdout)
    rows = [(key, worst[key], tol, worst[key] <= tol) for key in LEMMA_PROPERTIES]
    text = render_csv("lemma-check", cfg, ["property", "max_deviation", "tolerance", "passed"], rows)
    return (1 if failed else 0), text


RIP_HEADER = ["n", "m", "s", "model", "omega_mode", "method", "delta", "stderr_or_witness",
              "seed", "bound_c1"]


def _bound_or_blank(fn, *args):
    try:
        return fn(*args)
    except ValueError:
        return None


def cmd_rip(cfg, stdout=sys.stdout):
    n, model, omega, seed = cfg["n"], cfg["model"], cfg["omega_mode"], cfg["seed"]
    params = rip.BoundParams(cfg["c1"], cfg["c2"], cfg["c3"])
    methods = ["exact", "monte-carlo"] if cfg["method"] == "both" else [cfg["method"]]
    rows, skipped = [], False
    for m in cfg["m"]:
        for s in cfg["s"]:
            bound = _bound_or_blank(rip.theoretical_mean_bound, params, n, m, s)
            for method in methods:
                if method == "auto":
                    method = "exact" if math.comb(n, s) <= rip.ENUMERATION_BUDGET else "monte-carlo"
                if method == "exact" and math.comb(n, s) > rip.ENUMERATION_BUDGET:
                    rows.append((n, m, s, model, omega, method, "skipped", "budget", seed, bound))
                    skipped = True
                    continue
                tag = f"delta/{model}/{omega}/n={n}/m={m}"
                if cfg["draws"] == 1:
                    op = rip.draw_operator(model, n, m, omega, seed, tag, 0)
                    est = rip.estimate_rip(op, s, method, trials=cfg["mc_trials"],
                                           seed=rng.child_seed(seed, tag + "/mc", 0))
                    rows.append((n, m, s, model, omega, method, est.delta,
                                 est.witness_support, seed, bound))
                    continue
                deltas = rip.sample_deltas(model, n, m, s, cfg["draws"], seed, omega, method,
                                           cfg["mc_trials"], workers=cfg["workers"], tag=tag)
                stderr = deltas.std(ddof=1) / math.sqrt(deltas.size)
                rows.append((n, m, s, model, omega, method, float(deltas.mean()), float(stderr),
                             seed, bound))
    return (1 if skipped else 0), render_csv("rip", cfg, RIP_HEADER, rows)


TAIL_HEADER = ["lambda", "exceed_prob", "exceed_count", "draws", "empirical_mean", "sigma2_c3",
               "reference_bound", "fitted_slope"]


def cmd_tail(cfg, stdout=sys.stdout):
    n, m, s = cfg["n"], cfg["m"][0], cfg["s"][0]
    steps = cfg["lambda_steps"]
    if steps < 1 or not 0 <= cfg["lambda_max"] <= 1:
        raise ConfigError("tail needs --lambda-steps >= 1 and 0 <= --lambda-max <= 1")
    grid = np.linspace(0.0, cfg["lambda_max"], steps)
    prof = rip.tail_profile(cfg["model"], n, m, s, cfg["draws"], grid, cfg["seed"],
                            cfg["omega_mode"], method=cfg["method"] if cfg["method"] != "both" else "auto",
                            trials=cfg["mc_trials"], workers=cfg["workers"])
    sigma2 = _bound_or_blank(rip.theoretical_tail_variance, rip.BoundParams(c3=cfg["c3"]), n, m, s)
    rows = []
    for lam, p, c in zip(prof.lambdas, prof.exceed_prob, prof.exceed_count):
        if sigma2 is None:
            ref = None
        elif sigma2 == 0:
            ref = 1.0 if lam == 0 else 0.0
        else:
            ref = math.exp(-lam**2 / sigma2)
        rows.append((float(lam), float(p), int(c), prof.draws, prof.empirical_mean, sigma2, ref,
                     prof.slope))
    return 0, render_csv("tail", cfg, TAIL_HEADER, rows)


RECOVER_HEADER = ["algorithm", "n", "m", "s", "tau", "trial", "success", "rel_err", "iterations",
                  "stability_ratio", "converged"]


def _recovery_instance(cfg, m, s, t, tag):
    n = cfg["n"]
    op = rip.draw_operator(cfg["model"], n, m, cfg["omega_mode"], cfg["seed"], tag + "/op", t)
    g = rng.stream(cfg["seed"], tag + "/signal", t)
    x0 = np.zeros(n)
    x0[g.choice(n, size=s, replace=False)] = g.standard_normal(s)
    y = op.apply(x0)
    if cfg["tau"] > 0:
        e = g.standard_normal(m)
        y = y + cfg["tau"] * e / np.linalg.norm(e)
    return op, x0, y


def _run_trial(cfg, algos, m, s, t, tag):
    op, x0, y = _recovery_instance(cfg, m, s, t, tag)
    out = []
    for alg in algos:
        report = recover(alg, RecoveryProblem(op, y, s, cfg["tau"]))
        xhat = np.real_if_close(report.xhat)
        if report.diverged:
            rel, ratio = float("inf"), float("inf")
        else:
            rel = float(np.linalg.norm(xhat - x0) / np.linalg.norm(x0))
            ratio = stability_ratio(x0, xhat, s, cfg["tau"])
        success = (rel <= 1e-6) if cfg["tau"] == 0 else bool(np.isfinite(ratio))
        out.append((alg, cfg["n"], m, s, cfg["tau"], t, success, rel, report.iterations, ratio,
                    report.converged))
    return out


def cmd_recover(cfg, stdout=sys.stdout):
    algos = _algorithms(cfg["algorithm"])
    m, s = cfg["m"][0], cfg["s"][0]
    tag = f"recover/{cfg['model']}/{cfg['omega_mode']}/n={cfg['n']}/m={m}/s={s}"
    per_trial = rip.run_ordered(lambda t: _run_trial(cfg, algos, m, s, t, tag),
                                range(cfg["trials"]), cfg["workers"])
    rows = [row for trial_rows in per_trial for row in trial_rows]
    return 0, render_csv("recover", cfg, RECOVER_HEADER, rows)


SWEEP_HEADER = ["algorithm", "n", "m", "s", "trials", "successes", "success_rate", "stderr",
                "sample_bound_c2"]


def cmd_sweep(cfg, stdout=sys.stdout):
    (alg,) = _algorithms(cfg["algorithm"])
    delta_star = ALGORITHM_CONSTANTS[alg][1]
    params = rip.BoundParams(cfg["c1"], cfg["c2"], cfg["c3"])
    rows = []
    for s in cfg["s"]:
        bound = _bound_or_blank(rip.theoretical_sample_bound, params, delta_star, cfg["n"], s)
        for m in cfg["m"]:
            tag = f"sweep/{cfg['model']}/{cfg['omega_mode']}/n={cfg['n']}/m={m}/s={s}"
            results = rip.run_ordered(lambda t: _run_trial(cfg, [alg], m, s, t, tag)[0],
                                      range(cfg["trials"]), cfg["workers"])
            wins = sum(bool(r[6]) for r in results)
            rate = wins / cfg["trials"]
            stderr = math.sqrt(rate * (1 - rate) / cfg["trials"])
            rows.append((alg, cfg["n"], m, s, cfg["trials"], wins, rate, stderr, bound))
    return 0, render_csv("sweep", cfg, SWEEP_HEADER, rows)


HANDLERS = {
    "lemma-check": cmd_lemma_check,
    "rip": cmd_rip,
    "tail": cmd_tail,
    "recover": cmd_recover,
    "sweep": cmd_sweep,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="circsense",
        description="Benchmarks for compressed sensing with partial random circulant matrices.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="file of key=value lines; flags override it")
        p.add_argument("--n", type=int)
        p.add_argument("--m", help="comma-separated list of sample counts")
        p.add_argument("--s", help="comma-separated list of sparsity levels")
        p.add_argument("--model", help=f"generator model: {', '.join(MODELS)}")
        p.add_argument("--omega-mode", dest="omega_mode", help=", ".join(OMEGA_MODES))
        p.add_argument("--draws", type=int, help="operator draws")
        p.add_argument("--trials", type=int, help="recovery trials per grid point")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="CSV path (default: stdout)")
        p.add_argument("--c1", type=float)
        p.add_argument("--c2", type=float)
        p.add_argument("--c3", type=float)
        p.add_argument("--algorithm", help=f"{', '.join(ALGORITHMS)} or all")
        p.add_argument("--method", help=", ".join(METHODS))
        p.add_argument("--mc-trials", dest="mc_trials", type=int,
                       help="Monte Carlo supports per RIP estimate")
        p.add_argument("--tau", type=float, help="noise level ||e||_2")
        p.add_argument("--lambda-max", dest="lambda_max", type=float)
        p.add_argument("--lambda-steps", dest="lambda_steps", type=int)
        p.add_argument("--workers", type=int, help="worker threads (results do not depend on it)")
    return parser


def main(argv=None, stdout=None, stderr=None):
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    command = args.command
    try:
        cfg = resolve_config(command, vars(args))
        status, text = HANDLERS[command](cfg, stdout=stdout)
    except (ConfigError, ValueError) as exc:
        print(f"circsense {command}: configuration error: {exc}", file=stderr)
        return 2
    if text is not None and (cfg["out"] or command != "lemma-check"):
        emit(text, cfg["out"], stdout)
    return status


if __name__ == "__main__":
    sys.exit(main())
