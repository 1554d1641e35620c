"""Command-line front end: ``fraccount <subcommand> [options]``.

Every numeric output carries a metadata block (schema version, package
version, seed, parameters).  CSV values are written with 17 significant
digits.  Exit codes: 0 success, 2 invalid input, 3 numerical failure,
4 failed statistical check (``validate``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
import warnings
from dataclasses import dataclass

import numpy as np

from . import __version__
from . import processes as pr
from .montecarlo import McConfig, compare_pmf, simulate_tc_gcp
from .risk import RiskModel, phi_curve, simulate_ruin
from .specialfn import ConvergenceWarning, MLSpec, SeriesControl, ml
from .subordinators import HorizonTooShort, sample_composite_path, write_paths_csv

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_DOMAIN = 2
EXIT_NUMERIC = 3
EXIT_STAT = 4

MODELS = ("poisson", "gcp", "frac-poisson", "frac-gcp", "tc-poisson", "tc-gcp", "general", "tempered")


class NumericFailure(RuntimeError):
    pass


class StatisticalFailure(RuntimeError):
    pass


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    if isinstance(text, (int, float)):
        return [float(text)]
    return [float(x) for x in str(text).split(",") if x.strip()]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


# ---------------------------------------------------------------------------
# models


@dataclass(frozen=True)
class ModelSpec:
    name: str
    clock: pr.TimeChangeParams
    params: pr.GcpParams
    nu: float | None = None

    def describe(self) -> dict:
        return {"model": self.name, "clock": self.clock.as_dict(), "rates": list(self.params.rates)}

    def poisson_level(self, t: float, r: int, method: str) -> float:
        Lam = self.params.Lambda
        if method == "inversion":
            return float(pr.tc_pmf_via_inversion(self.clock, Lam, t, r))
        if self.name.startswith("frac-"):
            return float(pr.frac_poisson_pmf(self.nu, Lam, t, r))
        return float(pr.clock_poisson_pmf(self.clock, Lam, t, r))

    def pmf_vector(self, t: float, n_max: int, method: str = "auto") -> np.ndarray:
        q = np.array([self.poisson_level(t, r, method) for r in range(n_max + 1)])
        return pr.compound_weights(self.params, n_max).T @ q


def build_model(ns, need_rates: bool = True) -> ModelSpec:
    """Model from parsed flags; ``need_rates=False`` (clock only) defaults the rate to 1."""
    name = ns.model
    if name not in MODELS:
        raise ValueError(f"unknown model {name!r}; choose from {', '.join(MODELS)}")
    if not need_rates and ns.rates is None and ns.Lambda is None:
        rates = [1.0]
    elif name in ("poisson", "frac-poisson", "tc-poisson", "general", "tempered") and ns.rates is None:
        if ns.Lambda is None:
            raise ValueError(f"model {name} needs --Lambda (or --rates)")
        rates = [ns.Lambda]
    else:
        if ns.rates is None:
            raise ValueError(f"model {name} needs --rates")
        rates = _floats(ns.rates)
    params = pr.GcpParams(tuple(rates))
    nu = ns.nu
    if name in ("poisson", "gcp"):
        clock = pr.TimeChangeParams.identity()
    elif name in ("frac-poisson", "frac-gcp"):
        if nu is None or not 0 < nu <= 1:
            raise ValueError("fractional models need --nu in (0, 1]")
        clock = pr.TimeChangeParams.identity() if nu == 1 else pr.TimeChangeParams.general([1.0], [nu])
    elif name in ("tc-poisson", "tc-gcp"):
        if nu is None or ns.lam is None:
            raise ValueError(f"model {name} needs --nu and --lam")
        clock = pr.TimeChangeParams.stable_pair(nu, ns.lam)
    elif name == "general":
        if nu is None or ns.mus is None:
            raise ValueError("model general needs --nu and --mus")
        mus = _floats(ns.mus)
        clock = pr.TimeChangeParams.general(mus, [(j + 1) * nu for j in range(len(mus))])
    else:
        if ns.alpha is None or ns.rho is None:
            raise ValueError("model tempered needs --alpha and --rho")
        clock = pr.TimeChangeParams.tempered_pair(ns.alpha, ns.rho)
    return ModelSpec(name, clock, params, nu)


def _threads(ns) -> int:
    if ns.threads is not None:
        n = int(ns.threads)
    else:
        n = int(os.environ.get("FRACCOUNT_THREADS", os.cpu_count() or 1))
    if n < 1:
        raise ValueError("--threads must be >= 1")
    return n


# ---------------------------------------------------------------------------
# output


def _metadata(ns, extra: dict | None = None) -> dict:
    meta = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "command": ns.command,
        "seed": getattr(ns, "seed", None),
    }
    if extra:
        meta["params"] = extra
    return meta


def _emit(ns, meta: dict, header: list[str], rows: list[list], payload: dict | None = None):
    if ns.format == "json":
        body = {"metadata": meta}
        if payload is not None:
            body.update(payload)
        else:
            body["columns"] = header
            body["rows"] = [[_json_value(v) for v in r] for r in rows]
        text = json.dumps(body, indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        text = buf.getvalue()
    if ns.output:
        with open(ns.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_value(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


# ---------------------------------------------------------------------------
# subcommands


def cmd_ml(ns) -> int:
    gammas = tuple(_floats(ns.gammas)) if ns.gammas else ()
    spec = MLSpec(ns.alpha, ns.beta, gammas, tuple(_floats(ns.z)))
    res = ml(spec, SeriesControl(rel_tol=ns.rel_tol))
    meta = _metadata(ns, {"alpha": spec.alpha, "beta": spec.beta, "gammas": list(gammas), "z": list(spec.args)})
    header = ["value", "error", "converged", "terms", "in_envelope"]
    _emit(ns, meta, header, [[res.value, res.error, res.converged, res.terms, res.in_envelope]])
    if not res.converged:
        raise NumericFailure("Mittag-Leffler series did not reach the requested tolerance")
    return EXIT_OK


def _table(model: ModelSpec, ns) -> pr.PmfTable:
    meta = model.describe()
    meta["method"] = ns.method
    if ns.nmax is not None:
        if ns.nmax < 0:
            raise ValueError("--nmax must be nonnegative")
        p = model.pmf_vector(ns.t, ns.nmax, ns.method)
        return pr.PmfTable(ns.t, p, meta)
    return pr.pmf_table(lambda m: model.pmf_vector(ns.t, m, ns.method), ns.t, meta=meta)


def _check_t(ns):
    if ns.t is None or not ns.t > 0:
        raise ValueError("--t must be positive")


def cmd_pmf(ns) -> int:
    model = build_model(ns)
    _check_t(ns)
    table = _table(model, ns)
    meta = _metadata(ns, {**model.describe(), "t": ns.t, "method": ns.method})
    meta["mass_covered"] = table.mass_covered
    meta["truncation_n"] = table.truncation_n
    rows = [[n, p] for n, p in enumerate(table.probs)]
    payload = {"table": table.to_dict()} if ns.format == "json" else None
    _emit(ns, meta, ["n", "p_n"], rows, payload)
    return EXIT_OK


def cmd_pgf(ns) -> int:
    model = build_model(ns)
    _check_t(ns)
    us = _floats(ns.u)
    rows = []
    for u in us:
        if model.name.startswith("frac-") or model.clock.kind == "identity":
            form = "inversion"
        else:
            form = ns.form
        rows.append([u, pr.pgf(model.clock, model.params, u, ns.t, form=form)])
    meta = _metadata(ns, {**model.describe(), "t": ns.t, "form": ns.form})
    _emit(ns, meta, ["u", "G"], rows)
    return EXIT_OK


def _mc_config(ns) -> McConfig:
    return McConfig(
        n_paths=ns.paths,
        seed=ns.seed,
        horizon_factor=ns.horizon_factor,
        dt_rel=ns.dt_rel,
        threads=_threads(ns),
    )


def cmd_simulate(ns) -> int:
    model = build_model(ns)
    _check_t(ns)
    cfg = _mc_config(ns)
    emp = simulate_tc_gcp(model.clock, model.params, ns.t, cfg)
    meta = _metadata(ns, {**model.describe(), **emp.meta})
    rows = [[n, c, c / emp.n_paths] for n, c in enumerate(emp.counts)]
    _emit(ns, meta, ["n", "count", "freq"], rows)
    return EXIT_OK


def cmd_validate(ns) -> int:
    model = build_model(ns)
    _check_t(ns)
    cfg = _mc_config(ns)
    table = pr.pmf_table(lambda m: model.pmf_vector(ns.t, m, ns.method), ns.t)
    emp = simulate_tc_gcp(model.clock, model.params, ns.t, cfg)
    report = compare_pmf(emp, table)
    report["params"] = {**model.describe(), **report["params"]}
    report["tv_max"] = ns.tv_max
    report["p_min"] = ns.p_min
    report["passed"] = bool(report["tv"] < ns.tv_max and report["chi2_pvalue"] > ns.p_min)
    meta = _metadata(ns, model.describe())
    keys = ["tv", "chi2", "chi2_dof", "chi2_pvalue", "n_paths", "seed", "passed"]
    _emit(ns, meta, keys, [[report[k] for k in keys]], {"report": report})
    if not report["passed"]:
        raise StatisticalFailure(
            f"validation failed: tv={report['tv']:.4g}, chi2 p-value={report['chi2_pvalue']:.4g}"
        )
    return EXIT_OK


def cmd_ruin(ns) -> int:
    model = RiskModel(ns.c, pr.GcpParams(tuple(_floats(ns.rates))), ns.claim_r, ns.claim_a)
    curve = phi_curve(model, ns.h, ns.umax)
    mc = {}
    if ns.mc_paths:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(ns.seed)))
        for u in _floats(ns.mc_u):
            psi = simulate_ruin(model, u, ns.horizon, ns.mc_paths, rng)
            mc[u] = (1.0 - psi, float(np.sqrt(psi * (1 - psi) / ns.mc_paths)))
    rows = []
    for i, u in enumerate(curve.u):
        if i % ns.every:
            continue
        rows.append([u, curve.values[i], None, None])
    for u, (phi_hat, se) in sorted(mc.items()):
        rows.append([u, float(curve(u)), phi_hat, se])
    meta = _metadata(ns, {**model.to_dict(), "h": ns.h, "u_max": ns.umax})
    meta["series_terms_used"] = curve.series_terms_used
    _emit(ns, meta, ["u", "phi_analytic", "phi_mc", "mc_stderr"], rows)
    if not curve.converged:
        raise NumericFailure("non-ruin series hit the 64-term cap")
    return EXIT_OK


def cmd_paths(ns) -> int:
    model = build_model(ns, need_rates=False)
    if not ns.horizon > 0:
        raise ValueError("--horizon must be positive")
    dt = ns.dt if ns.dt is not None else 1e-3 * ns.horizon
    if not dt > 0:
        raise ValueError("--dt must be positive")
    spec = model.clock.subordinator()
    seeds = np.random.SeedSequence(ns.seed).spawn(ns.paths)
    paths = [
        sample_composite_path(spec, ns.horizon, dt, np.random.Generator(np.random.Philox(s)))
        for s in seeds
    ]
    buf = io.StringIO()
    meta = _metadata(ns, {**model.describe(), "horizon": ns.horizon, "dt": dt})
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    rows = io.StringIO()
    write_paths_csv(paths, rows)
    # re-emit with full precision
    reader = csv.reader(io.StringIO(rows.getvalue()))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(next(reader))
    for pid, s, h in reader:
        w.writerow([pid, _fmt(float(s)), _fmt(float(h))])
    text = buf.getvalue()
    if ns.output:
        with open(ns.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file of option values; its entries override command-line flags")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--output", help="output file (default: stdout)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: $FRACCOUNT_THREADS or all cores)")


def _model_args(p: argparse.ArgumentParser):
    p.add_argument("--model", choices=MODELS, default="tc-poisson")
    p.add_argument("--nu", type=float)
    p.add_argument("--lam", type=float, help="telegraph coefficient of the stable pair")
    p.add_argument("--Lambda", type=float, help="Poisson rate")
    p.add_argument("--rates", help="comma-separated GCP rates lambda_1..lambda_k")
    p.add_argument("--mus", help="comma-separated mu_1..mu_N of the general model (nu_j = j nu)")
    p.add_argument("--alpha", type=float, help="tempered order")
    p.add_argument("--rho", type=float, help="tempering parameter")
    p.add_argument("--t", type=float)
    p.add_argument("--method", choices=("auto", "inversion"), default="auto")


def _mc_args(p: argparse.ArgumentParser):
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--dt-rel", type=float, default=1e-3)
    p.add_argument("--horizon-factor", type=float, default=10.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fraccount",
        description=(
            "Laws of counting processes on inverse stable and tempered stable clocks. "
            "Precedence of settings: --config JSON > command-line flags > defaults."
        ),
    )
    parser.add_argument("--version", action="version", version=f"fraccount {__version__}")
    sp = parser.add_subparsers(dest="command", required=True)

    p = sp.add_parser("ml", help="(multivariate) Mittag-Leffler function")
    _common(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--gammas", help="comma-separated gamma_1..gamma_m (omit for E_{alpha,beta})")
    p.add_argument("--z", required=True, help="comma-separated arguments z_1..z_m")
    p.add_argument("--rel-tol", type=float, default=1e-12)
    p.set_defaults(func=cmd_ml)

    p = sp.add_parser("pmf", help="probability mass function table")
    _common(p)
    _model_args(p)
    p.add_argument("--nmax", type=int, help="fixed truncation (default: adaptive to mass 1-1e-5)")
    p.set_defaults(func=cmd_pmf)

    p = sp.add_parser("pgf", help="probability generating function")
    _common(p)
    _model_args(p)
    p.add_argument("--u", required=True, help="comma-separated points in [-1, 1]")
    p.add_argument("--form", choices=("ml", "roots", "inversion"), default="ml")
    p.set_defaults(func=cmd_pgf)

    p = sp.add_parser("simulate", help="Monte Carlo empirical pmf")
    _common(p)
    _model_args(p)
    _mc_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sp.add_parser("validate", help="Monte Carlo vs analytic pmf (exit 4 on failure)")
    _common(p)
    _model_args(p)
    _mc_args(p)
    p.add_argument("--tv-max", type=float, default=0.01)
    p.add_argument("--p-min", type=float, default=0.01)
    p.set_defaults(func=cmd_validate)

    p = sp.add_parser("ruin", help="non-ruin probability curve")
    _common(p)
    p.add_argument("--c", type=float, required=True, help="premium rate")
    p.add_argument("--rates", required=True)
    p.add_argument("--claim-r", type=float, required=True, help="gamma claim shape")
    p.add_argument("--claim-a", type=float, required=True, help="gamma claim rate")
    p.add_argument("--umax", type=float, default=10.0)
    p.add_argument("--h", type=float, default=5e-3)
    p.add_argument("--every", type=int, default=1, help="write every k-th grid point")
    p.add_argument("--mc-paths", type=int, default=0, help="ruin simulation paths (0: none)")
    p.add_argument("--mc-u", default="0,1,2,5")
    p.add_argument("--horizon", type=float, default=500.0)
    p.set_defaults(func=cmd_ruin)

    p = sp.add_parser("paths", help="dump subordinator paths as CSV")
    _common(p)
    _model_args(p)
    p.add_argument("--paths", type=int, default=5)
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--dt", type=float)
    p.set_defaults(func=cmd_paths)
    return parser


def _apply_config(ns, parser):
    if not ns.config:
        return
    with open(ns.config) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError("--config must hold a JSON object")
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest in ("command", "func", "config") or not hasattr(ns, dest):
            raise ValueError(f"unknown config key {key!r} for '{ns.command}'")
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        setattr(ns, dest, value)


_NUMBER_LIST = re.compile(r"^-[0-9.][0-9eE.+\-]*(,[-+]?[0-9.][0-9eE.+\-]*)*$")


def _attach_negative_values(argv: list[str]) -> list[str]:
    """Rewrite ``--z -0.7,-0.7`` as ``--z=-0.7,-0.7`` so argparse does not read a flag."""
    out: list[str] = []
    for tok in argv:
        if out and out[-1].startswith("--") and "=" not in out[-1] and _NUMBER_LIST.match(tok):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    ns = parser.parse_args(_attach_negative_values(argv))
    try:
        _apply_config(ns, parser)
        with warnings.catch_warnings():
            warnings.simplefilter("error", ConvergenceWarning)
            return ns.func(ns)
    except StatisticalFailure as exc:
        print(f"fraccount: {exc}", file=sys.stderr)
        return EXIT_STAT
    except (NumericFailure, ConvergenceWarning, HorizonTooShort, FloatingPointError, RuntimeError) as exc:
        print(f"fraccount: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, TypeError, OSError) as exc:
        print(f"fraccount: invalid input: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
