"""Experiment driver: ``run``, ``validate`` and ``list-recipes``.

A config file is INI-style. The optional ``[run]`` section holds ``seed``,
``threads`` and ``out``; every other section is one experiment whose ``kind``
key selects the runner. Example::

    [run]
    seed = 0
    out = results

    [fig3]
    kind = dicke-dynamics
    lambdas = 1.2, 2.0
    kappas = 0, 1

Grids are written ``start, stop, count``; pairs as ``mu:chi``.
"""

import argparse
import configparser
from dataclasses import dataclass
import math
from pathlib import Path
import sys
import time
import traceback

import numpy as np

from . import output
from .classical import (AdmParams, ScanConfig, bloch_uniform_ensemble, finite_time_lyapunov_ensemble,
                        integrate, phase_scan, ClassicalState)
from .hilbert import HilbertSpec, coherent_ensemble, composite_operators, product_state, \
    photon_coherent_state, spin_coherent_state
from .lindblad import DENSE_GUARD, adm_generator
from .observables import adm_observables, ensemble_sigma, fotoc, quantum_scan, vne_dynamics, _tail_mean
from .rmt import ToyModelConfig, toy_spectrum, toy_vne_dynamics
from .spectra import classify, ginibre_reference, nn_spacings

THREADS_ENV = "DISSIPATIVE_CHAOS_THREADS"
QUANTUM_DIM_GUARD = 600


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems) if not isinstance(problems, str) else [problems]
        super().__init__("; ".join(self.problems))


# ---------------------------------------------------------------- parsing

def _float(v):
    return float(v)


def _int(v):
    f = float(v)
    if f != int(f):
        raise ValueError(f"{v!r} is not an integer")
    return int(f)


def _floats(v):
    return [float(x) for x in v.replace(";", ",").split(",") if x.strip()]


def _grid(v):
    parts = _floats(v)
    if len(parts) == 1:
        return np.array(parts)
    if len(parts) != 3 or parts[2] != int(parts[2]) or parts[2] < 1:
        raise ValueError("grid must be 'value' or 'start, stop, count'")
    return np.linspace(parts[0], parts[1], int(parts[2]))


def _pairs(v):
    out = []
    for item in v.split(","):
        if item.strip():
            a, b = item.split(":")
            out.append((float(a), float(b)))
    return out


def _str(v):
    return v.strip()


ADM = {"omega": (_float, 1.0), "omega0": (_float, 1.0)}
QUANTUM = {"spin": (_float, 5.0), "photon_cutoff": (_int, 20)}

SCHEMAS = {
    "classical-scan": {**ADM, "kappa": (_float, 1.0), "lambda_minus": (_grid, "0, 3, 40"),
                       "lambda_plus": (_grid, "0, 3, 40"), "ensemble": (_int, 20), "dt": (_float, 1e-3),
                       "t_final": (_float, 200.0), "renorm_every": (_int, 10)},
    "quantum-scan": {**ADM, **QUANTUM, "kappa": (_float, 1.0), "lambda_minus": (_grid, "0, 3, 20"),
                     "lambda_plus": (_grid, "0, 3, 20"), "ensemble": (_int, 8), "t_final": (_float, 40.0),
                     "record_dt": (_float, 2.0)},
    "dicke-dynamics": {**ADM, **QUANTUM, "lambdas": (_floats, "1.2, 2.0"), "kappas": (_floats, "0, 1"),
                       "ensemble": (_int, 20), "quantum_ensemble": (_int, 4), "dt": (_float, 1e-3),
                       "classical_t_final": (_float, 30.0), "quantum_t_final": (_float, 30.0),
                       "record_dt": (_float, 0.5)},
    "fotoc": {**ADM, **QUANTUM, "lambda_minus": (_float, 2.0), "lambda_plus": (_float, 2.0),
              "kappa": (_float, 1.0), "generator": (_str, "sz"), "delta_phi": (_float, 1e-4),
              "theta": (_float, 1.0), "phi": (_float, 0.0), "t_final": (_float, 10.0),
              "record_dt": (_float, 0.25)},
    "toy-spectrum": {"n_total": (_int, 49), "gamma": (_float, 1.0), "cases": (_pairs, "0:0, 1:0, 1:1"),
                     "ensemble": (_int, 100), "precision": (_str, "single")},
    "toy-dynamics": {"n_total": (_int, 49), "gamma": (_float, 1.0),
                     "cases": (_pairs, "0:0, 1:0, 1:0.25, 1:0.5, 1:0.75, 1:1"), "ensemble": (_int, 50),
                     "t_final": (_float, 20.0), "dt": (_float, 0.05)},
    "trajectory": {**ADM, "lambda_minus": (_float, 2.0), "lambda_plus": (_floats, "1.0, 3.5"),
                   "kappa": (_float, 1.0), "theta": (_float, 1.0), "phi": (_float, 0.5),
                   "t_final": (_float, 100.0), "dt": (_float, 1e-3), "record_every": (_int, 10)},
}


@dataclass
class ExperimentConfig:
    name: str
    kind: str
    params: dict
    text: str = ""


@dataclass
class RunConfig:
    experiments: list
    seed: int = 0
    threads: int = 1
    out: str = "results"
    text: str = ""


def parse_config(text, source="<config>"):
    """Parse INI text into a :class:`RunConfig`; raises :class:`ConfigError` listing every problem."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{source}, line {exc.lineno}: expected a [section] header") from None
    except configparser.ParsingError as exc:
        raise ConfigError([f"{source}, line {lineno}: cannot parse {line.strip()!r}"
                           for lineno, line in exc.errors]) from None
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    problems, experiments = [], []
    run = parser["run"] if parser.has_section("run") else {}
    try:
        seed = _int(run.get("seed", "0"))
    except ValueError as exc:
        problems.append(f"[run] seed: {exc}")
        seed = 0
    try:
        threads = _int(run.get("threads", "1"))
        if threads < 1:
            raise ValueError("must be >= 1")
    except ValueError as exc:
        problems.append(f"[run] threads: {exc}")
        threads = 1
    out = run.get("out", "results")
    for name in parser.sections():
        if name == "run":
            continue
        sec = parser[name]
        kind = sec.get("kind")
        if kind not in SCHEMAS:
            problems.append(f"[{name}] kind: expected one of {sorted(SCHEMAS)}, got {kind!r}")
            continue
        schema = SCHEMAS[kind]
        for key in sec:
            if key != "kind" and key not in schema:
                problems.append(f"[{name}] {key}: unknown key for kind {kind}")
        params = {}
        for key, (conv, default) in schema.items():
            raw = sec.get(key)
            try:
                params[key] = conv(raw) if raw is not None else (conv(default) if isinstance(default, str) else default)
            except (ValueError, TypeError) as exc:
                problems.append(f"[{name}] {key}: {exc}")
        exp = ExperimentConfig(name, kind, params, _section_text(parser, name))
        problems.extend(_check_experiment(exp))
        experiments.append(exp)
    if not experiments and not problems:
        problems.append("no experiment sections found")
    if problems:
        raise ConfigError(problems)
    return RunConfig(experiments, seed, threads, out, text)


def _section_text(parser, name):
    lines = [f"[{name}]"] + [f"{k} = {v}" for k, v in parser[name].items()]
    return "\n".join(lines)


def _check_experiment(exp):
    p, bad = exp.params, []

    def need(cond, key, msg):
        if key in p and not cond:
            bad.append(f"[{exp.name}] {key}: {msg}")

    for key in ("kappa", "gamma"):
        need(p.get(key, 0) >= 0, key, "must be non-negative")
    need(all(k >= 0 for k in p.get("kappas", [])), "kappas", "must be non-negative")
    for key in ("dt", "t_final", "classical_t_final", "quantum_t_final", "record_dt", "delta_phi"):
        need(p.get(key, 1) > 0, key, "must be positive")
    for key in ("ensemble", "quantum_ensemble", "renorm_every", "record_every"):
        need(p.get(key, 1) >= 1, key, "must be >= 1")
    if "spin" in p:
        need(float(2 * p["spin"]).is_integer() and p["spin"] > 0, "spin", "must be a positive half-integer")
        if "photon_cutoff" in p and p["photon_cutoff"] >= 1 and float(2 * p["spin"]).is_integer():
            d_spin = int(round(2 * p["spin"])) + 1
            d = d_spin * (p["photon_cutoff"] + 1)
            suggest = QUANTUM_DIM_GUARD // d_spin - 1
            need(d <= QUANTUM_DIM_GUARD, "photon_cutoff",
                 f"d_total = {d} exceeds the guard {QUANTUM_DIM_GUARD}; use photon_cutoff <= {suggest}")
        need(p.get("photon_cutoff", 1) >= 1, "photon_cutoff", "must be >= 1")
    if "n_total" in p:
        m = math.isqrt(max(p["n_total"], 0))
        need(m * m == p["n_total"] and m >= 2, "n_total", "must be a perfect square N = M^2 with M >= 2")
        need(p["n_total"] <= DENSE_GUARD, "n_total", f"exceeds the dense guard {DENSE_GUARD}")
    if "cases" in p:
        need(all(0 <= a <= 1 and 0 <= b <= 1 for a, b in p["cases"]) and p["cases"], "cases",
             "mu and chi must lie in [0, 1]")
    if "generator" in p:
        need(p["generator"] in ("sz", "n"), "generator", "must be 'sz' or 'n'")
    if "precision" in p:
        need(p["precision"] in ("single", "double"), "precision", "must be 'single' or 'double'")
    if "theta" in p:
        need(0 <= p["theta"] <= math.pi, "theta", "must lie in [0, pi]")
    return bad


def estimate(exp):
    """Rough memory (bytes) and work summary for ``validate``."""
    p = exp.params
    if "spin" in p:
        d = (int(round(2 * p["spin"])) + 1) * (p["photon_cutoff"] + 1)
        # sparse superoperator (~9 entries per row at 28 bytes) plus ~12 working vectors
        mem = d * d * (9 * 28 + 12 * 16)
        return mem, f"d_total = {d}, vectorized dimension = {d * d}"
    if "n_total" in p:
        n2 = p["n_total"] ** 2
        return 3 * n2 * n2 * 8, f"Liouvillian {n2} x {n2}"
    if exp.kind == "classical-scan":
        cells = p["lambda_minus"].size * p["lambda_plus"].size
        return cells * p["ensemble"] * 5 * 8 * 12, f"{cells} grid cells x {p['ensemble']} members"
    return 10 * 2 ** 20, "small"


# ---------------------------------------------------------------- recipes

RECIPES = {
    "fig2": ("Lambda_ss and S_ss heatmaps over lambda_+- in [0, 3], kappa = 1", """
[fig2-classical]
kind = classical-scan
kappa = 1
lambda_minus = 0, 3, 40
lambda_plus = 0, 3, 40

[fig2-quantum]
kind = quantum-scan
kappa = 1
spin = 5
photon_cutoff = 20
lambda_minus = 0, 3, 20
lambda_plus = 0, 3, 20
ensemble = 4
"""),
    "fig3": ("Dicke-limit transient chaos: Lambda_t, S_VN(t), Delta S_z(t) for lambda in {1.2, 2}, kappa in {0, 1}", """
[fig3]
kind = dicke-dynamics
lambdas = 1.2, 2.0
kappas = 0, 1
spin = 5
photon_cutoff = 40
ensemble = 20
quantum_ensemble = 4
"""),
    "fig4": ("Toy-model entropy curves and spectra, N = 49, gamma = 1", """
[fig4-dynamics]
kind = toy-dynamics
n_total = 49
gamma = 1
cases = 0:0, 1:0, 1:0.25, 1:0.5, 1:0.75, 1:1
ensemble = 50

[fig4-spectra]
kind = toy-spectrum
n_total = 49
gamma = 1
cases = 0:0, 1:0, 1:1
ensemble = 100
"""),
    "figS1": ("Mean-field trajectories at lambda_- = 2, lambda_+ in {1, 3.5}, kappa = 1", """
[figS1]
kind = trajectory
lambda_minus = 2
lambda_plus = 1.0, 3.5
kappa = 1
"""),
    "figS2": ("Steady-state S, Delta S_z, Delta n along lambda_- = 2", """
[figS2]
kind = quantum-scan
kappa = 1
spin = 5
photon_cutoff = 20
lambda_minus = 2
lambda_plus = 0.5, 4, 8
ensemble = 4
"""),
    "figS3": ("Steady-state entropy along lambda_- = 2 at S = 5 and S = 10", """
[figS3-s5]
kind = quantum-scan
kappa = 1
spin = 5
photon_cutoff = 20
lambda_minus = 2
lambda_plus = 0.5, 4, 8
ensemble = 4

[figS3-s10]
kind = quantum-scan
kappa = 1
spin = 10
photon_cutoff = 20
lambda_minus = 2
lambda_plus = 0.5, 4, 8
ensemble = 4
"""),
    "figS4": ("Toy-model spacing statistics for (mu, chi) in {(0,0), (1,0), (1,1)}", """
[figS4]
kind = toy-spectrum
n_total = 49
gamma = 1
cases = 0:0, 1:0, 1:1
ensemble = 100
"""),
}


# ---------------------------------------------------------------- runners

def _adm(p, **kw):
    base = dict(omega=p["omega"], omega0=p["omega0"])
    base.update(kw)
    return AdmParams(**base)


def _tag(**kw):
    return "_".join(f"{k}{v:g}" for k, v in kw.items())


def run_classical_scan(exp, out, seed, threads, log):
    p = exp.params
    cfg = ScanConfig(ensemble_size=p["ensemble"], dt=p["dt"], t_final=p["t_final"],
                     renorm_every=p["renorm_every"], seed=seed, workers=threads)
    res = phase_scan(p["lambda_minus"], p["lambda_plus"], _adm(p, kappa=p["kappa"]), cfg)
    output.write_csv(out / "lyapunov_scan.csv", ["lambda_minus", "lambda_plus", "lambda_ss", "n_ensemble"],
                     res.rows())
    output.write_plot_script(out, "lyapunov_scan.gp",
                             output.gnuplot_heatmap("lyapunov_scan.csv", 3, "Lambda_ss"))


def run_quantum_scan(exp, out, seed, threads, log):
    p = exp.params
    spec = HilbertSpec(p["spin"], p["photon_cutoff"])
    _, th, ph = bloch_uniform_ensemble(p["ensemble"], seed)
    ens = coherent_ensemble(spec, th, ph)
    header = ["lambda_minus", "lambda_plus", "s_ss", "delta_sz_ss", "delta_n_ss", "n_members"]
    with output.CsvWriter(out / "vne_scan.csv", header) as w:
        def progress(i, j, es):
            w.write((p["lambda_minus"][i], p["lambda_plus"][j], es.s_ss,
                     _tail_mean(es.times, ensemble_sigma(es, 0, 1)),
                     _tail_mean(es.times, ensemble_sigma(es, 2, 3)), es.n_members))
            log(f"  cell ({i}, {j}): S_ss {es.s_ss:.3f}")

        res = quantum_scan(p["lambda_minus"], p["lambda_plus"], _adm(p, kappa=p["kappa"]), spec, ens,
                           t_final=p["t_final"], record_dt=p["record_dt"], workers=threads,
                           progress=progress)
    output.write_plot_script(out, "vne_scan.gp", output.gnuplot_heatmap("vne_scan.csv", 3, "S_ss"))
    return res


def run_dicke_dynamics(exp, out, seed, threads, log):
    p = exp.params
    spec = HilbertSpec(p["spin"], p["photon_cutoff"])
    states, th, ph = bloch_uniform_ensemble(p["ensemble"], seed)
    q = p["quantum_ensemble"]
    ens = coherent_ensemble(spec, th[:q], ph[:q])
    ops = adm_observables(spec)
    t_q = p["quantum_t_final"]
    times = np.unique(np.round(np.r_[np.arange(0, min(0.5, t_q) + 1e-9, 0.025),
                                     np.arange(0, t_q + 1e-9, p["record_dt"])], 12))
    summary = output.CsvWriter(out / "summary.csv", ["lambda", "kappa", "lambda_bar", "lambda_tail",
                                                     "s_slope", "s_ss", "delta_sz_ss"])
    with summary:
        for lam in p["lambdas"]:
            for kappa in p["kappas"]:
                tag = _tag(lam=lam, kap=kappa)
                params = AdmParams.dicke(lam, kappa, omega=p["omega"], omega0=p["omega0"])
                ly = finite_time_lyapunov_ensemble(params, states, dt=p["dt"], t_final=p["classical_t_final"],
                                                   seed=seed)
                output.write_csv(out / f"lyapunov_t_{tag}.csv", ["t", "lambda_t"], zip(ly.times, ly.lambda_t))
                es = vne_dynamics(ens, adm_generator(params, spec), spec, times=times, method="auto",
                                  observers=[ops["sz"], ops["sz2"]], workers=threads)
                output.write_csv(out / f"entropy_{tag}.csv", ["t", "s_spin", "s_photon", "s_total"], es.rows())
                dsz = ensemble_sigma(es, 0, 1)
                output.write_csv(out / f"delta_sz_{tag}.csv", ["t", "delta_sz"], zip(es.times, dsz))
                summary.write((lam, kappa, ly.lambda_bar, ly.lambda_ss, es.s_slope, es.s_ss,
                               _tail_mean(es.times, dsz)))
                log(f"  lambda={lam:g} kappa={kappa:g}: slope {es.s_slope:.3f}, S_ss {es.s_ss:.3f}")
    output.write_plot_script(out, "entropy.gp", "".join(
        output.gnuplot_lines(f"entropy_{_tag(lam=l, kap=k)}.csv", 1, [4], f"S_VN lambda={l:g} kappa={k:g}",
                             "t", "S_VN", logx=True) for l in p["lambdas"] for k in p["kappas"]))


def run_fotoc(exp, out, seed, threads, log):
    p = exp.params
    spec = HilbertSpec(p["spin"], p["photon_cutoff"])
    gen = adm_generator(_adm(p, lambda_minus=p["lambda_minus"], lambda_plus=p["lambda_plus"],
                             kappa=p["kappa"]), spec)
    ops = composite_operators(spec, sparse=True)
    g = ops["sz"] if p["generator"] == "sz" else ops["n"]
    psi = product_state(photon_coherent_state(0, spec.photon_cutoff),
                        spin_coherent_state(p["theta"], p["phi"], spec.spin_s))
    times = np.arange(0.0, p["t_final"] + 1e-9, p["record_dt"])
    res = fotoc(psi, gen, g, p["delta_phi"], times=times, t_final=p["t_final"], method="expm",
                label=p["generator"])
    output.write_csv(out / "fotoc.csv", ["t", "F", "delta_G"], zip(res.times, res.f_values, res.sigma_series))
    output.write_plot_script(out, "fotoc.gp", output.gnuplot_lines("fotoc.csv", 1, [3], "FOTOC width", "t",
                                                                   "Delta G"))


def run_toy_spectrum(exp, out, seed, threads, log):
    p = exp.params
    dtype = np.float32 if p["precision"] == "single" else np.float64
    ref = ginibre_reference()
    lines = []
    for mu, chi in p["cases"]:
        cfg = ToyModelConfig(n_total=p["n_total"], mu=mu, chi=chi, gamma=p["gamma"], seed=seed,
                             ensemble_size=p["ensemble"])
        tag = _tag(mu=mu, chi=chi)
        with output.CsvWriter(out / f"eigenvalues_{tag}.csv", ["re", "im", "seed"]) as w:
            spectra = []
            for k in range(cfg.ensemble_size):
                spec = toy_spectrum(cfg, k, dtype)
                spectra.append(spec)
                for z in spec.eigenvalues:
                    w.write((z.real, z.imag, k))
        dist = nn_spacings(spectra, reference=ref)
        output.write_csv(out / f"spacing_hist_{tag}.csv", ["s", "density", "poisson2d", "ginibre"],
                         dist.rows(ref))
        c = classify(dist, ref)
        lines.append(f"mu={mu:g} chi={chi:g}: {c.label} (KS poisson2d {c.ks_vs_poisson2d:.4f}, "
                     f"KS ginibre {c.ks_vs_ginibre:.4f}, {c.n_spacings} spacings)")
        log("  " + lines[-1])
        output.write_plot_script(out, f"spacing_{tag}.gp", output.gnuplot_lines(
            f"spacing_hist_{tag}.csv", 1, [2, 3, 4], f"spacings mu={mu:g} chi={chi:g}", "s", "P(s)"))
    (out / "classification.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_toy_dynamics(exp, out, seed, threads, log):
    p = exp.params
    with output.CsvWriter(out / "toy_entropy.csv", ["t", "s_vn", "mu", "chi"]) as w, \
            output.CsvWriter(out / "toy_saturation.csv", ["mu", "chi", "s_slope", "s_tail", "s_sat", "s_max"]) as sat:
        for mu, chi in p["cases"]:
            cfg = ToyModelConfig(n_total=p["n_total"], mu=mu, chi=chi, gamma=p["gamma"], seed=seed,
                                 ensemble_size=p["ensemble"])
            res = toy_vne_dynamics(cfg, t_final=p["t_final"], dt=p["dt"])
            for row in res.rows():
                w.write(row)
            sat.write((mu, chi, res.s_slope, res.s_tail, res.s_sat, res.s_max))
            log(f"  mu={mu:g} chi={chi:g}: slope {res.s_slope:.3f}, saturation {res.s_sat:.3f}")
    output.write_plot_script(out, "toy_entropy.gp", "\n".join([
        "set datafile separator ','", "set xlabel 't'", "set ylabel 'S_VN'", "set logscale x",
        "plot 'toy_entropy.csv' every ::1 using 1:2:($3*10+$4*4) with points palette notitle", ""]))


def run_trajectory(exp, out, seed, threads, log):
    p = exp.params
    for lp in p["lambda_plus"]:
        params = _adm(p, lambda_minus=p["lambda_minus"], lambda_plus=lp, kappa=p["kappa"])
        traj = integrate(ClassicalState.from_angles(p["theta"], p["phi"]), params, dt=p["dt"],
                         t_final=p["t_final"], record_every=p["record_every"])
        tag = _tag(lp=lp)
        output.write_csv(out / f"trajectory_{tag}.csv", ["t", "x", "p", "sx", "sy", "sz"],
                         (np.r_[t, s] for t, s in zip(traj.times, traj.states)))
        output.write_plot_script(out, f"trajectory_{tag}.gp", "\n".join([
            "set datafile separator ','", "set view equal xyz",
            f"splot 'trajectory_{tag}.csv' every ::1 using 4:5:6 with lines notitle", ""]))


RUNNERS = {
    "classical-scan": run_classical_scan,
    "quantum-scan": run_quantum_scan,
    "dicke-dynamics": run_dicke_dynamics,
    "fotoc": run_fotoc,
    "toy-spectrum": run_toy_spectrum,
    "toy-dynamics": run_toy_dynamics,
    "trajectory": run_trajectory,
}


# ---------------------------------------------------------------- commands

def _load(args):
    if args.config and args.recipe:
        raise ConfigError("give either --config or --recipe, not both")
    if args.recipe:
        if args.recipe not in RECIPES:
            raise ConfigError(f"unknown recipe {args.recipe!r}; see list-recipes")
        return parse_config(RECIPES[args.recipe][1], source=f"recipe {args.recipe}")
    if not args.config:
        raise ConfigError("--config or --recipe is required")
    path = Path(args.config)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text, source=str(path))


def _settings(cfg, args):
    seed = args.seed if args.seed is not None else cfg.seed
    threads = cfg.threads
    env = output.env_threads(THREADS_ENV)
    if env is not None:
        threads = env
    if args.threads is not None:
        threads = args.threads
    out = Path(args.out if args.out else cfg.out)
    return seed, threads, out


def cmd_validate(args):
    try:
        cfg = _load(args)
    except ConfigError as exc:
        for prob in exc.problems:
            print(f"error: {prob}", file=sys.stderr)
        return 2
    for exp in cfg.experiments:
        mem, what = estimate(exp)
        print(f"[{exp.name}] {exp.kind}: ok ({what}, estimated memory {mem / 2 ** 20:.1f} MiB)")
    return 0


def cmd_list(args):
    for name, (desc, _) in RECIPES.items():
        print(f"{name:7s} {desc}")
    return 0


def cmd_run(args):
    try:
        cfg = _load(args)
        seed, threads, out = _settings(cfg, args)
    except (ConfigError, ValueError) as exc:
        for prob in getattr(exc, "problems", [str(exc)]):
            print(f"error: {prob}", file=sys.stderr)
        return 2
    log = (lambda msg: None) if args.quiet else (lambda msg: print(msg, flush=True))
    out.mkdir(parents=True, exist_ok=True)
    marker = out / "FAILED"
    if marker.exists():
        marker.unlink()
    output.write_metadata(out, cfg.text, seed, threads,
                          {"experiments": [{"name": e.name, "kind": e.kind} for e in cfg.experiments]})
    for exp in cfg.experiments:
        sub = out / exp.name if len(cfg.experiments) > 1 else out
        sub.mkdir(parents=True, exist_ok=True)
        log(f"[{exp.name}] {exp.kind}")
        t0 = time.perf_counter()
        try:
            RUNNERS[exp.kind](exp, sub, seed, threads, log)
        except Exception as exc:  # flush a marker, keep partial CSVs
            output.write_failed_marker(out, f"[{exp.name}] {type(exc).__name__}: {exc}\n"
                                            + traceback.format_exc())
            print(f"error: [{exp.name}] {exc}", file=sys.stderr)
            return 1
        log(f"[{exp.name}] done in {time.perf_counter() - t0:.1f} s")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="dissipative-chaos", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn, hlp in (("run", cmd_run, "run experiments and write CSV outputs"),
                          ("validate", cmd_validate, "check a config without computing")):
        sp = sub.add_parser(name, help=hlp)
        sp.add_argument("--config", help="INI config file")
        sp.add_argument("--recipe", help="built-in figure recipe (see list-recipes)")
        sp.add_argument("--out", help="output directory (overrides [run] out)")
        sp.add_argument("--seed", type=int, help="root seed (overrides [run] seed)")
        sp.add_argument("--threads", type=int, help=f"worker processes (overrides {THREADS_ENV})")
        sp.add_argument("--quiet", action="store_true")
        sp.set_defaults(func=fn)
    lp = sub.add_parser("list-recipes", help="show the built-in figure recipes")
    lp.set_defaults(func=cmd_list)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
