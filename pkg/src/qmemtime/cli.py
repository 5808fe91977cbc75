"""Command-line front end: config ingestion, dispatch, and emission.

``qmemtime <command> --config <file>`` with commands

* ``validate``          -- structure / representation checks
* ``simulate``          -- moment trajectory to CSV (t, mu_*, Delta, ReV_kk)
* ``tau``               -- decoherence time and its quadratic expansion
* ``optimize-energy``   -- stationary energy vector (R, K, E*)
* ``optimize-coupling`` -- stationary direct-coupling vector (Q, E12*)
* ``sweep``             -- tau and tau-hat over an eps or coupling-gain grid

Configs are a single JSON tree; complex constants enter as paired
real/imaginary matrices.  Exit status: 0 success, 1 domain errors
(preconditions of the analysis), 2 config errors.  ``--dump-config``
echoes the normalized config, which re-parses to an identical value.
``QMEMTIME_THREADS`` caps sweep parallelism.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import json
import math
import os
import sys as _sys

import numpy as np

from .algebra import StructureConstants, pauli_structure, validate_structure
from .decoherence import (CrossingOptions, decoherence_time, tau_expansion,
                          tau_hat)
from .dense import check_algebra, qubit_representation, tensor_representation
from .errors import ConfigError, DomainError, QmemtimeError
from .interconnect import (compose, optimal_direct_coupling, partition_rk,
                           product_mean)
from .model import SystemParams
from .moments import (initial_moments, moment_trajectory,
                      weighting_from_factor, weighting_from_sigma)
from .optimize import optimal_energy, rk_matrices

_COMMANDS = ("validate", "simulate", "tau", "optimize-energy",
             "optimize-coupling", "sweep")


def _fmt(x):
    """Fixed 17-significant-digit formatting for reproducible output."""
    return f"{float(x):.17g}"


def _fmt_vec(v):
    return "[" + ", ".join(_fmt(x) for x in np.asarray(v).ravel()) + "]"


# ---------------------------------------------------------------------------
# Config parsing.  Every reader carries the field path for located errors.


def _want(node, path, kind):
    if not isinstance(node, kind):
        raise ConfigError(f"expected {kind.__name__}, got {type(node).__name__}",
                          field=path)
    return node


def _finite_scalar(node, path):
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ConfigError("expected a number", field=path)
    x = float(node)
    if not math.isfinite(x):
        raise ConfigError(f"non-finite value {node}", field=path)
    return x


def _vector(node, path, length=None):
    _want(node, path, list)
    out = np.array([_finite_scalar(v, f"{path}[{i}]") for i, v in enumerate(node)])
    if length is not None and out.size != length:
        raise ConfigError(f"expected {length} entries, got {out.size}", field=path)
    return out


def _matrix(node, path, shape=None):
    _want(node, path, list)
    rows = [_vector(r, f"{path}[{i}]") for i, r in enumerate(node)]
    widths = {r.size for r in rows}
    if len(widths) != 1:
        raise ConfigError("ragged matrix rows", field=path)
    out = np.vstack(rows)
    if shape is not None and out.shape != shape:
        raise ConfigError(f"expected shape {shape}, got {out.shape}", field=path)
    return out


def _structure(node, path):
    if node == "pauli":
        return pauli_structure(), "pauli"
    _want(node, path, dict)
    for key in ("alpha", "beta_real", "beta_imag"):
        if key not in node:
            raise ConfigError(f"missing key {key!r}", field=path)
    alpha = _matrix(node["alpha"], f"{path}.alpha")
    n = alpha.shape[0]
    br = np.stack([_matrix(s, f"{path}.beta_real[{i}]", (n, n))
                   for i, s in enumerate(_want(node["beta_real"], f"{path}.beta_real", list))])
    bi = np.stack([_matrix(s, f"{path}.beta_imag[{i}]", (n, n))
                   for i, s in enumerate(_want(node["beta_imag"], f"{path}.beta_imag", list))])
    if br.shape != (n, n, n) or bi.shape != (n, n, n):
        raise ConfigError(f"need {n} sections of shape ({n}, {n})", field=path)
    try:
        sc = StructureConstants(alpha, br + 1j * bi)
    except (ValueError, QmemtimeError) as exc:
        raise ConfigError(str(exc), field=path) from exc
    norm = {"alpha": alpha.tolist(),
            "beta_real": [s.tolist() for s in br],
            "beta_imag": [s.tolist() for s in bi]}
    return sc, norm


_ANALYSIS_DEFAULTS = {
    "grid": {"t_max": 1.0, "points": 201},
    "eps": [0.01],
    "step": None,
    "tol": None,
    "horizon": 1e4,
    "settle": 20.0,
    "margin": 1e-6,
    "sweep": None,
}


@dataclasses.dataclass
class RunConfig:
    """Parsed configuration plus its normalized JSON tree."""

    kind: str                 # "single" | "composite"
    system: object            # SystemParams | CompositeSystem
    init: object
    weights: object
    grid_times: np.ndarray
    eps: list
    crossing: CrossingOptions
    sweep: dict
    out_path: str
    out_format: str
    tree: dict

    def analysis_system(self):
        return self.system.as_system() if self.kind == "composite" else self.system


def parse_config(tree):
    """Validate a config tree and build the module-level values."""
    _want(tree, "<config>", dict)
    sys_node = tree.get("system")
    if sys_node is None:
        raise ConfigError("missing key", field="system")

    energy = _want(tree.get("energy", {}), "energy", dict)
    coupling = _want(tree.get("coupling", {}), "coupling", dict)
    init_node = _want(tree.get("init", {}), "init", dict)

    if isinstance(sys_node, dict) and "composite" in sys_node:
        comp_node = _want(sys_node["composite"], "system.composite", dict)
        sc1, norm1 = _structure(comp_node.get("sub1", "pauli"), "system.composite.sub1")
        sc2, norm2 = _structure(comp_node.get("sub2", "pauli"), "system.composite.sub2")
        n1, n2 = sc1.n, sc2.n
        e1 = _vector(energy.get("E1", [0.0] * n1), "energy.E1", n1)
        e2 = _vector(energy.get("E2", [0.0] * n2), "energy.E2", n2)
        e12 = _vector(energy.get("E12", [0.0] * (n1 * n2)), "energy.E12", n1 * n2)
        m1 = _matrix(coupling.get("M1"), "coupling.M1") if "M1" in coupling else np.zeros((2, n1))
        n1v = _vector(coupling.get("N1", [0.0] * m1.shape[0]), "coupling.N1", m1.shape[0])
        m2 = _matrix(coupling.get("M2"), "coupling.M2") if "M2" in coupling else np.zeros((2, n2))
        n2v = _vector(coupling.get("N2", [0.0] * m2.shape[0]), "coupling.N2", m2.shape[0])
        try:
            sub1 = SystemParams(sc=sc1, E=e1, M=m1, N=n1v)
            sub2 = SystemParams(sc=sc2, E=e2, M=m2, N=n2v)
        except ValueError as exc:
            raise ConfigError(str(exc), field="coupling") from exc
        system = compose(sub1, sub2, e12)
        n_total = system.as_system().n
        if "mu0" in init_node:
            mu0 = _vector(init_node["mu0"], "init.mu0", n_total)
        else:
            mu01 = _vector(init_node.get("mu0_1", [0.0] * n1), "init.mu0_1", n1)
            mu02 = _vector(init_node.get("mu0_2", [0.0] * n2), "init.mu0_2", n2)
            mu0 = product_mean(mu01, mu02)
        norm_system = {"composite": {"sub1": norm1, "sub2": norm2}}
        norm_energy = {"E1": e1.tolist(), "E2": e2.tolist(), "E12": e12.tolist()}
        norm_coupling = {"M1": m1.tolist(), "N1": n1v.tolist(),
                         "M2": m2.tolist(), "N2": n2v.tolist()}
        kind = "composite"
        sc_for_init = system.as_system().sc
    else:
        sc, norm_sc = _structure(sys_node, "system")
        n = sc.n
        e = _vector(energy.get("E", [0.0] * n), "energy.E", n)
        m = _matrix(coupling.get("M"), "coupling.M") if "M" in coupling else np.zeros((2, n))
        nv = _vector(coupling.get("N", [0.0] * m.shape[0]), "coupling.N", m.shape[0])
        try:
            system = SystemParams(sc=sc, E=e, M=m, N=nv)
        except ValueError as exc:
            raise ConfigError(str(exc), field="coupling") from exc
        mu0 = _vector(init_node.get("mu0", [0.0] * n), "init.mu0", n)
        kind = "single"
        norm_system = norm_sc
        norm_energy = {"E": e.tolist()}
        norm_coupling = {"M": m.tolist(), "N": nv.tolist()}
        sc_for_init = sc

    init = initial_moments(sc_for_init, mu0)

    w_node = _want(tree.get("weights", {}), "weights", dict)
    n_total = system.as_system().n if kind == "composite" else system.n
    if "F" in w_node:
        F = _matrix(w_node["F"], "weights.F")
        if F.shape[1] != n_total:
            raise ConfigError(f"factor has {F.shape[1]} columns, expected {n_total}",
                              field="weights.F")
        try:
            weights = weighting_from_factor(F)
        except ValueError as exc:
            raise ConfigError(str(exc), field="weights.F") from exc
        norm_weights = {"F": F.tolist()}
    else:
        Sigma = (_matrix(w_node["Sigma"], "weights.Sigma", (n_total, n_total))
                 if "Sigma" in w_node else np.eye(n_total))
        try:
            weights = weighting_from_sigma(Sigma)
        except ValueError as exc:
            raise ConfigError(str(exc), field="weights.Sigma") from exc
        norm_weights = {"Sigma": Sigma.tolist()}

    a_node = _want(tree.get("analysis", {}), "analysis", dict)
    unknown = set(a_node) - set(_ANALYSIS_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", field="analysis")
    analysis = {**_ANALYSIS_DEFAULTS, **a_node}

    grid_node = _want(analysis["grid"], "analysis.grid", dict)
    if "times" in grid_node:
        grid_times = _vector(grid_node["times"], "analysis.grid.times")
        norm_grid = {"times": grid_times.tolist()}
    else:
        t_max = _finite_scalar(grid_node.get("t_max", 1.0), "analysis.grid.t_max")
        points = grid_node.get("points", 201)
        if not isinstance(points, int) or points < 2:
            raise ConfigError("points must be an integer >= 2", field="analysis.grid.points")
        if t_max <= 0:
            raise ConfigError("t_max must be positive", field="analysis.grid.t_max")
        grid_times = np.linspace(0.0, t_max, points)
        norm_grid = {"t_max": t_max, "points": points}

    eps_node = analysis["eps"]
    if isinstance(eps_node, (int, float)):
        eps_node = [eps_node]
    eps = [_finite_scalar(v, f"analysis.eps[{i}]") for i, v in enumerate(
        _want(eps_node, "analysis.eps", list))]
    if any(e <= 0 for e in eps):
        raise ConfigError("fidelity values must be positive", field="analysis.eps")

    def _opt_scalar(key, positive=True):
        val = analysis[key]
        if val is None:
            return None
        x = _finite_scalar(val, f"analysis.{key}")
        if positive and x <= 0:
            raise ConfigError("must be positive", field=f"analysis.{key}")
        return x

    crossing = CrossingOptions(
        step=_opt_scalar("step"),
        tol=_opt_scalar("tol"),
        horizon=_opt_scalar("horizon") or _ANALYSIS_DEFAULTS["horizon"],
        settle=_opt_scalar("settle") or _ANALYSIS_DEFAULTS["settle"],
        margin=_opt_scalar("margin") or _ANALYSIS_DEFAULTS["margin"],
    )

    sweep = analysis["sweep"]
    norm_sweep = None
    if sweep is not None:
        _want(sweep, "analysis.sweep", dict)
        s_kind = sweep.get("kind")
        if s_kind not in ("eps", "gain"):
            raise ConfigError("sweep kind must be 'eps' or 'gain'",
                              field="analysis.sweep.kind")
        values = [_finite_scalar(v, f"analysis.sweep.values[{i}]")
                  for i, v in enumerate(_want(sweep.get("values", []),
                                              "analysis.sweep.values", list))]
        if not values:
            raise ConfigError("sweep values are empty", field="analysis.sweep.values")
        s_eps = _finite_scalar(sweep.get("eps", eps[0]), "analysis.sweep.eps")
        norm_sweep = {"kind": s_kind, "values": values, "eps": s_eps}
        sweep = norm_sweep

    o_node = _want(tree.get("output", {}), "output", dict)
    out_path = o_node.get("path")
    if out_path is not None and not isinstance(out_path, str):
        raise ConfigError("path must be a string", field="output.path")
    out_format = o_node.get("format", "csv")
    if out_format != "csv":
        raise ConfigError(f"unsupported format {out_format!r}", field="output.format")

    norm_tree = {
        "system": norm_system,
        "energy": norm_energy,
        "coupling": norm_coupling,
        "init": {"mu0": np.asarray(mu0).tolist()},
        "weights": norm_weights,
        "analysis": {"grid": norm_grid, "eps": list(eps),
                     "step": crossing.step, "tol": crossing.tol,
                     "horizon": crossing.horizon, "settle": crossing.settle,
                     "margin": crossing.margin, "sweep": norm_sweep},
        "output": {"path": out_path, "format": out_format},
    }
    return RunConfig(kind=kind, system=system, init=init, weights=weights,
                     grid_times=grid_times, eps=eps, crossing=crossing,
                     sweep=sweep, out_path=out_path, out_format=out_format,
                     tree=norm_tree)


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            tree = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(tree)


# ---------------------------------------------------------------------------
# Commands.


def _emit(text, out_path):
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        _sys.stdout.write(text)


def _cmd_validate(cfg, args):
    lines = []
    if cfg.kind == "composite":
        comp = cfg.system
        lines.append(f"joint fit residual = {_fmt(comp.fit_residual)}")
        rep = tensor_representation(qubit_representation(), qubit_representation())
        if rep.n == comp.as_system().n:
            rpt = check_algebra(rep, comp.as_system().sc, tol=1e-10)
            lines.append(f"algebra {'ok' if rpt.product_error <= rpt.tol else 'FAIL'} "
                         f"(error {_fmt(rpt.product_error)})")
            lines.append(f"CCR {'ok' if rpt.ccr_error <= rpt.tol else 'FAIL'} "
                         f"(error {_fmt(rpt.ccr_error)})")
            if not rpt.passed:
                raise DomainError("composite representation checks failed")
    else:
        sc = cfg.system.sc
        report = validate_structure(sc.alpha, sc.beta.sections, tol=1e-10)
        if not report.passed:
            raise DomainError(
                f"structure-constant validation failed: defect "
                f"{_fmt(report.worst_defect)} at {report.worst_index}")
        lines.append(f"structure ok (worst defect {_fmt(report.worst_defect)})")
        pauli = pauli_structure()
        if sc.n == 3 and np.allclose(sc.alpha, pauli.alpha, atol=1e-10) and \
                np.allclose(sc.beta.sections, pauli.beta.sections, atol=1e-10):
            rpt = check_algebra(qubit_representation(), sc, tol=1e-12)
            lines.append(f"algebra {'ok' if rpt.product_error <= rpt.tol else 'FAIL'} "
                         f"(error {_fmt(rpt.product_error)})")
            lines.append(f"CCR {'ok' if rpt.ccr_error <= rpt.tol else 'FAIL'} "
                         f"(error {_fmt(rpt.ccr_error)})")
            if not rpt.passed:
                raise DomainError("dense representation checks failed")
        else:
            lines.append("no dense representation shipped; algebra check skipped")
    _emit("".join(f"{ln}\n" for ln in lines), args.out or cfg.out_path)


def _csv_trajectory(traj):
    n = traj.mu.shape[1]
    header = (["t"] + [f"mu_{k + 1}" for k in range(n)] + ["Delta"]
              + [f"ReV_{k + 1}{k + 1}" for k in range(n)])
    rows = [",".join(header)]
    for i, t in enumerate(traj.grid):
        cells = [t, *traj.mu[i], traj.Delta[i], *np.diag(traj.V[i].real)]
        rows.append(",".join(_fmt(c) for c in cells))
    return "\n".join(rows) + "\n"


def _cmd_simulate(cfg, args):
    traj = moment_trajectory(cfg.analysis_system(), cfg.init, cfg.weights,
                             cfg.grid_times)
    _emit(_csv_trajectory(traj), args.out or cfg.out_path)


def _cmd_tau(cfg, args):
    system = cfg.analysis_system()
    expn = tau_expansion(system, cfg.init, cfg.weights)
    lines = [
        f"ref_norm = {_fmt(expn.ref_norm)}",
        f"delta_dot0 = {_fmt(expn.delta_dot0)}",
        f"delta_ddot0 = {_fmt(expn.delta_ddot0)}",
        f"tau_prime0 = {_fmt(expn.tau_prime0)}",
        f"tau_second0 = {_fmt(expn.tau_second0)}",
    ]
    for eps in cfg.eps:
        lines.append(f"eps = {_fmt(eps)}")
        lines.append(f"  tau_hat = {_fmt(tau_hat(expn, eps))}")
        result = decoherence_time(system, cfg.init, cfg.weights, eps,
                                  opts=cfg.crossing)
        lines.append(f"  threshold = {_fmt(result.threshold)}")
        if result.is_infinite:
            lines.append("  tau = inf (certified by steady state)")
        else:
            lo, hi = result.bracket
            lines.append(f"  tau = {_fmt(result.value)}")
            lines.append(f"  bracket = [{_fmt(lo)}, {_fmt(hi)}]")
    _emit("".join(f"{ln}\n" for ln in lines), args.out or cfg.out_path)


def _cmd_optimize_energy(cfg, args):
    system = cfg.analysis_system()
    R, K = rk_matrices(system, cfg.init, cfg.weights)
    od = optimal_energy(R, K)
    lines = ["R:"]
    lines += [f"  {_fmt_vec(row)}" for row in od.R]
    lines.append(f"K = {_fmt_vec(od.K)}")
    lines.append(f"E_star = {_fmt_vec(od.E_star)}")
    lines.append(f"residual = {_fmt(od.residual)}")
    lines.append(f"zero_energy_optimal = {str(od.zero_energy_optimal).lower()}")
    uniq = "unique" if od.unique else f"nonunique (null dimension {od.null_dim})"
    lines.append(f"solution = {uniq}")
    _emit("".join(f"{ln}\n" for ln in lines), args.out or cfg.out_path)


def _cmd_optimize_coupling(cfg, args):
    if cfg.kind != "composite":
        raise ConfigError("optimize-coupling requires a composite system config",
                          field="system")
    comp = cfg.system
    e1 = _cli_vector(args.e1, comp.n1, "--e1") if args.e1 else comp.E1
    e2 = _cli_vector(args.e2, comp.n2, "--e2") if args.e2 else comp.E2
    blocks = partition_rk(comp, cfg.init, cfg.weights)
    sol = optimal_direct_coupling(blocks, e1, e2)
    lines = [
        f"Q = {_fmt_vec(sol.Q)}",
        f"E12_star = {_fmt_vec(sol.E12_star)}",
        f"residual = {_fmt(sol.residual)}",
    ]
    uniq = "unique" if sol.unique else f"nonunique (null dimension {sol.null_dim})"
    lines.append(f"solution = {uniq}")
    _emit("".join(f"{ln}\n" for ln in lines), args.out or cfg.out_path)


def _sweep_point(cfg, kind, value, eps):
    system = cfg.analysis_system()
    if kind == "gain":
        system = dataclasses.replace(system, M=value * system.M)
    expn = tau_expansion(system, cfg.init, cfg.weights)
    point_eps = value if kind == "eps" else eps
    t_hat = tau_hat(expn, point_eps)
    tau = decoherence_time(system, cfg.init, cfg.weights, point_eps,
                           opts=cfg.crossing).value
    return tau, t_hat


def _cmd_sweep(cfg, args):
    if cfg.sweep is None:
        raise ConfigError("missing analysis.sweep block for the sweep command",
                          field="analysis.sweep")
    kind = cfg.sweep["kind"]
    if kind == "gain" and cfg.kind == "composite":
        raise ConfigError("gain sweeps are defined for single systems only",
                          field="analysis.sweep.kind")
    values = cfg.sweep["values"]
    eps = cfg.sweep["eps"]

    max_workers = len(values)
    env_cap = os.environ.get("QMEMTIME_THREADS")
    if env_cap:
        try:
            max_workers = max(1, min(max_workers, int(env_cap)))
        except ValueError as exc:
            raise ConfigError(f"QMEMTIME_THREADS={env_cap!r} is not an integer") from exc
    else:
        max_workers = max(1, min(max_workers, os.cpu_count() or 1))

    with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as pool:
        results = list(pool.map(lambda v: _sweep_point(cfg, kind, v, eps), values))

    rows = [f"{kind},tau,tau_hat"]
    for value, (tau, t_hat) in zip(values, results):
        rows.append(f"{_fmt(value)},{_fmt(tau)},{_fmt(t_hat)}")
    _emit("\n".join(rows) + "\n", args.out or cfg.out_path)


def _cli_vector(text, length, flag):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"{flag} must be a comma-separated number list") from exc
    if len(vals) != length:
        raise ConfigError(f"{flag} expects {length} entries, got {len(vals)}")
    return np.array(vals)


# ---------------------------------------------------------------------------
# Entry point.


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="qmemtime",
        description="Decoherence-time analysis for finite-level open quantum "
                    "systems with quasilinear moment dynamics.")
    parser.add_argument("command", choices=_COMMANDS)
    parser.add_argument("--config", required=True, help="path to a JSON config")
    parser.add_argument("--out", default=None, help="output path (default: config output.path or stdout)")
    parser.add_argument("--eps", default=None,
                        help="comma-separated fidelity values, overriding analysis.eps")
    parser.add_argument("--step", type=float, default=None)
    parser.add_argument("--tol", type=float, default=None)
    parser.add_argument("--horizon", type=float, default=None)
    parser.add_argument("--settle", type=float, default=None)
    parser.add_argument("--margin", type=float, default=None)
    parser.add_argument("--e1", default=None, help="override subsystem-1 energy (optimize-coupling)")
    parser.add_argument("--e2", default=None, help="override subsystem-2 energy (optimize-coupling)")
    parser.add_argument("--dump-config", action="store_true",
                        help="print the normalized config and exit")
    return parser


def _apply_overrides(cfg, args):
    if args.eps:
        try:
            eps = [float(v) for v in args.eps.split(",")]
        except ValueError as exc:
            raise ConfigError("--eps must be a comma-separated number list") from exc
        if any(e <= 0 for e in eps):
            raise ConfigError("--eps values must be positive")
        cfg.eps = eps
        cfg.tree["analysis"]["eps"] = eps
    updates = {}
    for key in ("step", "tol", "horizon", "settle", "margin"):
        val = getattr(args, key)
        if val is not None:
            if val <= 0:
                raise ConfigError(f"--{key} must be positive")
            updates[key] = val
            cfg.tree["analysis"][key] = val
    if updates:
        cfg.crossing = dataclasses.replace(cfg.crossing, **updates)
    return cfg


_DISPATCH = {
    "validate": _cmd_validate,
    "simulate": _cmd_simulate,
    "tau": _cmd_tau,
    "optimize-energy": _cmd_optimize_energy,
    "optimize-coupling": _cmd_optimize_coupling,
    "sweep": _cmd_sweep,
}


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = _apply_overrides(cfg, args)
        if args.dump_config:
            _sys.stdout.write(json.dumps(cfg.tree, indent=2, sort_keys=True) + "\n")
            return 0
        _DISPATCH[args.command](cfg, args)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return 2
    except QmemtimeError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
