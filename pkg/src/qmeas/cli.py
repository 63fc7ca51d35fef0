"""Batch front end: configure an experiment, run it, emit CSV or JSON.

Subcommands cover the full pipeline: truncation series (truncate, recur,
cascade), registration thermodynamics (register, finalstate), run statistics
(born, reduce), decomposition geometry (ambiguity, dispersionless), Bell-type
checks (chsh, feasible), and dense-oracle verification (oracle-check,
appc-report).  A config file supplies defaults; flags override it.  Every
subcommand accepts --selftest to run its quick built-in checks.

Exit codes: 0 success, 2 configuration error, 3 numerical guard tripped.
"""
from __future__ import annotations

import argparse
import configparser
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, ambiguity, contextuality, curie_weiss, equilibrium, oracle, runs
from .errors import GuardError, QmeasError, ValidationError
from .qstate import (
    DensityOperator,
    Observable,
    bloch_state,
    bloch_vector,
    maximally_mixed,
    partial_trace,
    qexpect,
    tensor,
    trace_distance,
    vn_entropy,
)

_NAMED_BLOCH = {
    "+x": (1.0, 0.0, 0.0), "-x": (-1.0, 0.0, 0.0),
    "+y": (0.0, 1.0, 0.0), "-y": (0.0, -1.0, 0.0),
    "+z": (0.0, 0.0, 1.0), "-z": (0.0, 0.0, -1.0),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Command name plus sectioned key = value settings; INI round-trips."""

    command: str
    sections: dict = field(default_factory=dict)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp["run"] = {"command": self.command}
        for name, kv in self.sections.items():
            cp[name] = {k: str(v) for k, v in kv.items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ValidationError(f"bad config file: {exc}") from exc
        command = cp.get("run", "command", fallback="")
        sections = {}
        for name in cp.sections():
            if name == "run":
                continue
            sections[name] = dict(cp[name])
        return cls(command=command, sections=sections)

    def flat(self) -> dict:
        out = {}
        for kv in self.sections.values():
            out.update(kv)
        return out


def _max_workers() -> int:
    raw = os.environ.get("QMEAS_THREADS", "").strip()
    if raw:
        try:
            cap = int(raw)
        except ValueError as exc:
            raise ValidationError("QMEAS_THREADS must be an integer") from exc
        if cap < 1:
            raise ValidationError("QMEAS_THREADS must be at least 1")
        return cap
    return min(8, os.cpu_count() or 1)


def _parse_bloch(spec: str) -> tuple[float, float, float]:
    s = spec.strip()
    if s in _NAMED_BLOCH:
        return _NAMED_BLOCH[s]
    parts = s.split(",")
    if len(parts) != 3:
        raise ValidationError(f"r0 must be +x/-x/+y/-y/+z/-z or vx,vy,vz (got {spec!r})")
    try:
        v = tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ValidationError(f"bad Bloch component in {spec!r}") from exc
    return v


def _parse_floats(spec: str, count: int | None = None, name: str = "value") -> list[float]:
    try:
        vals = [float(p) for p in spec.split(",") if p.strip() != ""]
    except ValueError as exc:
        raise ValidationError(f"bad {name} list: {spec!r}") from exc
    if count is not None and len(vals) != count:
        raise ValidationError(f"{name} needs exactly {count} comma-separated entries")
    return vals


def _parse_ints(spec: str, name: str = "index") -> list[int]:
    try:
        return [int(p) for p in spec.split(",") if p.strip() != ""]
    except ValueError as exc:
        raise ValidationError(f"bad {name} list: {spec!r}") from exc


def _fmt(x: float) -> str:
    return "%.17g" % float(x)


def _emit(args, payload: dict, default_format: str) -> None:
    fmt = args.format or default_format
    if fmt not in ("csv", "json"):
        raise ValidationError(f"unknown format {fmt!r}")
    if fmt == "csv":
        text = _render_csv(payload)
    else:
        text = json.dumps(_jsonable(payload), indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def _render_csv(payload: dict) -> str:
    lines = [f"# qmeas {__version__}"]
    if "columns" in payload and "rows" in payload:
        lines.append(",".join(payload["columns"]))
        for row in payload["rows"]:
            lines.append(",".join(_fmt(x) for x in row))
    else:
        lines.append("key,value")
        for k, v in _flatten_for_csv(payload):
            lines.append(f"{k},{v}")
    return "\n".join(lines) + "\n"


def _flatten_for_csv(obj, prefix=""):
    items = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            items.extend(_flatten_for_csv(v, f"{prefix}{k}." if prefix else f"{k}."))
    elif isinstance(obj, (list, tuple, np.ndarray)):
        for i, v in enumerate(np.asarray(obj).tolist() if isinstance(obj, np.ndarray) else obj):
            items.extend(_flatten_for_csv(v, f"{prefix}{i}."))
    else:
        key = prefix[:-1]
        if isinstance(obj, bool):
            items.append((key, str(obj).lower()))
        elif isinstance(obj, (int, np.integer)):
            items.append((key, str(int(obj))))
        elif isinstance(obj, (float, np.floating)):
            items.append((key, _fmt(obj)))
        else:
            items.append((key, str(obj)))
    return items


def _model_from_args(args) -> curie_weiss.CurieWeissModel:
    r0 = bloch_state(_parse_bloch(args.r0))
    return curie_weiss.build_model(args.N, args.g, args.delta_g_rel, args.seed, r0)


def _grid_from_args(model, args) -> np.ndarray:
    tau = curie_weiss.truncation_time(model)
    return np.linspace(0.0, args.tmax_tau * tau, args.points)


# ---------------------------------------------------------------- commands


def _cmd_truncate(args) -> dict:
    model = _model_from_args(args)
    grid = _grid_from_args(model, args)
    res = curie_weiss.transverse_expectations(model, grid)
    env = res.sx0 * np.exp(-((grid / res.tau) ** 2))
    rows = [[t, sx, sy, e] for t, sx, sy, e in zip(grid, res.sx, res.sy, env)]
    return {"columns": ["t", "sx", "sy", "gaussian_envelope"], "rows": rows}


def _selftest_truncate():
    model = curie_weiss.build_model(4, 1.0, 0.0, 0, bloch_state((0, 0, 1)))
    res = curie_weiss.transverse_expectations(model, np.linspace(0, 2, 50))
    assert np.max(np.abs(res.sx)) == 0.0 and np.max(np.abs(res.sy)) == 0.0
    assert curie_weiss.truncation_time(curie_weiss.build_model(2, 1.0)) == 0.5
    m = curie_weiss.build_model(6, 1.0)
    assert curie_weiss.offdiag_factor(m, 0.0) == 1.0
    # cos(pi/2) is ~6e-17 in floats, so the 6-factor product is ~5e-98
    assert abs(curie_weiss.offdiag_factor(m, np.pi / 4.0)) < 1e-80


def _cmd_recur(args) -> dict:
    seeds = [args.seed + i for i in range(args.seeds)]

    def run_one(seed):
        model = curie_weiss.build_model(args.N, args.g, args.delta_g_rel, seed,
                                        bloch_state(_parse_bloch(args.r0)))
        return seed, curie_weiss.recurrence_profile(model, args.nu_max)

    if len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
            results = list(pool.map(run_one, seeds))
    else:
        results = [run_one(seeds[0])]
    rows = []
    for seed, peaks in results:
        for p in peaks:
            rows.append([seed, p.nu, p.time, p.measured, p.predicted])
    return {"columns": ["seed", "nu", "t_nu", "measured", "predicted"], "rows": rows}


def _selftest_recur():
    model = curie_weiss.build_model(16, 1.0, 0.0, 0)
    peaks = curie_weiss.recurrence_profile(model, 3)
    assert all(abs(p.measured - 1.0) <= 1e-12 for p in peaks)
    assert all(p.predicted == 1.0 for p in peaks)
    assert abs(peaks[0].time - np.pi / 2.0) <= 1e-15


def _cmd_cascade(args) -> dict:
    model = _model_from_args(args)
    subset = _parse_ints(args.subset) if args.subset else list(range(args.k))
    grid = _grid_from_args(model, args)
    cx, cy = curie_weiss.cascade_correlation(model, args.k, subset, grid)
    rows = [[t, a, b] for t, a, b in zip(grid, cx, cy)]
    return {"columns": ["t", "corr_sx", "corr_sy"], "rows": rows}


def _selftest_cascade():
    model = curie_weiss.build_model(5, 1.0)
    cx, cy = curie_weiss.cascade_correlation(model, 2, (0, 3), 0.0)
    assert cx == 0.0 and cy == 0.0
    try:
        curie_weiss.cascade_correlation(model, 2, (0, 0), 0.1)
    except ValidationError:
        pass
    else:
        raise AssertionError("repeated subset index must be rejected")


def _cmd_register(args) -> dict:
    m = equilibrium.meanfield_magnetization(args.J, args.T, args.field)
    out = {
        "j": args.J,
        "temperature": args.T,
        "field": args.field,
        "m": list(m) if isinstance(m, tuple) else m,
        "g_threshold": equilibrium.g_threshold(args.J, args.T),
    }
    if args.N:
        h_m, m_obs = equilibrium.reduced_magnet_operators(args.N, args.J, args.T)
        scales = _parse_floats(args.scales, name="scales")
        src = Observable(-np.asarray(m_obs.matrix))
        lim = equilibrium.pointer_limit(h_m, src, args.T, scales, m_obs)
        out["pointer_limit"] = {
            "scales": list(lim.scales),
            "values": list(lim.values),
            "extrapolated": lim.extrapolated,
            "converged": lim.converged,
            "message": lim.message,
        }
    return out


def _selftest_register():
    assert equilibrium.meanfield_magnetization(1.0, 1.5) == 0.0
    assert abs(equilibrium.meanfield_magnetization(1.0, 0.5, 50.0) - 1.0) < 1e-6
    assert equilibrium.g_threshold(1.0, 1.2) == 0.0
    grid = np.linspace(-0.9, 0.9, 7)
    f_plus = equilibrium.free_energy_profile(1.0, 0.8, 0.3, grid)
    f_mirror = equilibrium.free_energy_profile(1.0, 0.8, 0.3, -grid)
    assert np.max(np.abs((f_plus - f_mirror) - (-2.0 * 0.3 * grid))) < 1e-12


def _cmd_finalstate(args) -> dict:
    pointer = equilibrium.build_curie_weiss_pointer(args.N, args.J, args.T,
                                                    reduced=args.reduced)
    tested = runs.sz_observable()
    r0 = bloch_state(_parse_bloch(args.r0))
    joint = equilibrium.final_joint_state(r0, tested, pointer)
    p = runs.born_weights(r0, tested)
    return {
        "outcomes": list(pointer.outcomes),
        "p": list(p),
        "window": pointer.window,
        "entropy": vn_entropy(joint),
        "partition_consts": list(pointer.partition_consts),
        "magnet_dim": pointer.pointer_states[0].matrix.shape[0],
    }


def _selftest_finalstate():
    pointer = equilibrium.build_curie_weiss_pointer(8, 1.0, 0.5, reduced=True)
    tested = runs.sz_observable()
    up = bloch_state((0, 0, 1))
    joint = equilibrium.final_joint_state(up, tested, pointer)
    expected = tensor(up, pointer.pointer_states[0])
    assert trace_distance(joint, expected) <= 1e-12
    p = runs.born_weights(bloch_state((1, 0, 0)), tested)
    assert np.allclose(p, [0.5, 0.5], atol=1e-15)


def _cmd_born(args) -> dict:
    r0 = bloch_state(_parse_bloch(args.r0))
    tested = runs.sz_observable()
    p = runs.born_weights(r0, tested)
    split = runs.sample_runs(p, args.runs, args.seed)
    rep = runs.frequency_report(split)
    return {
        "p": list(p),
        "counts": list(split.counts),
        "total": split.total,
        "seed": split.seed,
        "z_scores": rep["z"],
        "flagged": rep["flagged"],
        "failed": rep["failed"],
    }


def _selftest_born():
    tested = runs.sz_observable()
    split = runs.sample_runs([1.0, 0.0], 100, 3)
    assert split.counts == (100, 0)
    p = runs.born_weights(bloch_state((0, 0, 0.6)), tested)
    assert np.allclose(p, [0.8, 0.2], atol=1e-15)
    again = runs.sample_runs([0.5, 0.5], 1000, 7)
    assert again.counts == runs.sample_runs([0.5, 0.5], 1000, 7).counts


def _cmd_reduce(args) -> dict:
    r0 = bloch_state(_parse_bloch(args.r0))
    tested = runs.sz_observable()
    if args.mode == "unread":
        state = runs.unread_reduction(r0, tested)
        loss, gain = runs.info_balance(r0, tested)
        return {
            "mode": "unread",
            "bloch": list(bloch_vector(state)),
            "entropy": vn_entropy(state),
            "loss": loss,
            "gain": gain,
        }
    if args.mode == "luders":
        branch = runs.luders_branch(r0, tested, args.outcome)
        return {
            "mode": "luders",
            "outcome": branch.index,
            "p": branch.p,
            "bloch": list(bloch_vector(branch.r)),
        }
    branch = runs.von_neumann_branch(tested, args.outcome)
    return {
        "mode": "von-neumann",
        "outcome": branch.index,
        "bloch": list(bloch_vector(branch.r)),
        "entropy": vn_entropy(branch.r),
    }


def _selftest_reduce():
    tested = runs.sz_observable()
    plus_x = bloch_state((1, 0, 0))
    b = runs.luders_branch(plus_x, tested, 0)
    assert trace_distance(b.r, bloch_state((0, 0, 1))) <= 1e-12
    pinched = runs.unread_reduction(bloch_state((0.3, 0.4, 0.5)), tested)
    assert np.allclose(bloch_vector(pinched), [0, 0, 0.5], atol=1e-14)
    mixed = runs.unread_reduction(plus_x, tested)
    assert abs(vn_entropy(mixed) - np.log(2.0)) <= 1e-12


def _cmd_ambiguity(args) -> dict:
    v = _parse_floats(args.v, 3, "v")
    d1 = _parse_floats(args.d1, 3, "d1")
    d2 = _parse_floats(args.d2, 3, "d2")
    rep = ambiguity.ambiguity_witness(v, d1, d2)
    return {
        "first": {"v1": list(rep.first.v1), "v2": list(rep.first.v2),
                  "rho1": rep.first.rho1, "rho2": rep.first.rho2},
        "second": {"v1": list(rep.second.v1), "v2": list(rep.second.v2),
                   "rho1": rep.second.rho1, "rho2": rep.second.rho2},
        "overlaps": rep.overlaps,
        "contradiction": rep.contradiction,
    }


def _selftest_ambiguity():
    dec = ambiguity.chord_decomposition((0, 0, 0), (0, 0, 1))
    assert np.allclose(dec.v1, [0, 0, 1]) and np.allclose(dec.v2, [0, 0, -1])
    assert abs(dec.rho1 - 0.5) <= 1e-15
    try:
        ambiguity.ambiguity_witness((0, 0, 0), (0, 0, 1), (0, 0, -1))
    except ValidationError:
        pass
    else:
        raise AssertionError("parallel chords must be rejected")


def _cmd_dispersionless(args) -> dict:
    pops = np.asarray(_parse_floats(args.populations, name="populations"))
    state = DensityOperator(np.diag(pops.astype(np.complex128)))
    fam = ambiguity.dispersionless_family(state, rank_tol=args.rank_tol)
    variances = []
    for obs in fam.basis:
        a = obs.matrix
        mean = float(np.real(np.trace(state.matrix @ a)))
        second = float(np.real(np.trace(state.matrix @ (a @ a))))
        variances.append(second - mean * mean)
    return {
        "dim": int(pops.size),
        "rank": fam.rank,
        "param_count": fam.param_count,
        "basis_size": len(fam.basis),
        "max_variance": max(variances),
    }


def _selftest_dispersionless():
    z_up = bloch_state((0, 0, 1))
    sz = Observable(np.diag([1.0 + 0j, -1.0]))
    assert ambiguity.is_dispersionless(z_up, sz)
    assert not ambiguity.is_dispersionless(maximally_mixed(2), sz)
    fam = ambiguity.dispersionless_family(maximally_mixed(3))
    assert fam.param_count == 1


def _cmd_chsh(args) -> dict:
    if args.state != "singlet":
        raise ValidationError("only --state singlet is defined")
    state = contextuality.singlet_state()
    z, x, u, v = contextuality.optimal_chsh_axes()
    table = contextuality.table_from_state(state)
    return {
        "c": contextuality.chsh_value(state, z, x, u, v),
        "terms": {
            "e_zu": float(table.correlators[0, 0]),
            "e_zv": float(table.correlators[0, 1]),
            "e_xu": float(table.correlators[1, 0]),
            "e_xv": float(table.correlators[1, 1]),
        },
        "classical_bound": 2.0,
    }


def _selftest_chsh():
    state = contextuality.singlet_state()
    z = np.array([0.0, 0.0, 1.0])
    x = np.array([1.0, 0.0, 0.0])
    same = contextuality.pair_correlator(state, contextuality.DirectionPair(z, z))
    perp = contextuality.pair_correlator(state, contextuality.DirectionPair(z, x))
    assert abs(same + 1.0) <= 1e-12 and abs(perp) <= 1e-12
    c = contextuality.chsh_value(state, *contextuality.optimal_chsh_axes())
    assert abs(c - 2.0 * np.sqrt(2.0)) <= 1e-12


def _cmd_feasible(args) -> dict:
    corr = np.asarray(_parse_floats(args.correlators, 4, "correlators")).reshape(2, 2)
    ma = _parse_floats(args.marginals_a, 2, "marginals_a") if args.marginals_a else None
    mb = _parse_floats(args.marginals_b, 2, "marginals_b") if args.marginals_b else None
    table = contextuality.CorrelatorTable(corr, ma, mb)
    res = contextuality.joint_distribution_feasible(table)
    out = {"feasible": res.feasible}
    if res.feasible:
        out["distribution"] = res.distribution.ravel()
    else:
        out["witness"] = {
            "kind": res.witness.kind,
            "value": res.witness.value,
            "bound": res.witness.bound,
            "detail": {k: list(v) if isinstance(v, tuple) else v
                       for k, v in res.witness.detail.items()},
        }
    return out


def _selftest_feasible():
    flat = contextuality.CorrelatorTable(np.zeros((2, 2)))
    res = contextuality.joint_distribution_feasible(flat)
    assert res.feasible
    singlet_table = contextuality.table_from_state(contextuality.singlet_state())
    res2 = contextuality.joint_distribution_feasible(singlet_table)
    assert not res2.feasible and res2.witness.kind == "chsh"


def _cmd_oracle_check(args) -> dict:
    model = _model_from_args(args)
    grid = _grid_from_args(model, args)
    subsets = [tuple(range(k)) for k in range(1, min(3, model.N) + 1)]
    res = curie_weiss.transverse_expectations(model, grid)
    f_analytic = curie_weiss.offdiag_factor(model, grid)
    cascades = {s: curie_weiss.cascade_correlation(model, len(s), s, grid) for s in subsets}
    dev = {"f": 0.0, "sx": 0.0, "sy": 0.0}
    dev.update({f"cascade_k{len(s)}": 0.0 for s in subsets})
    for idx, sb in enumerate(oracle.iter_sector_blocks(model, grid)):
        exp = oracle.block_expectations(sb, subsets=subsets)
        dev["f"] = max(dev["f"], abs(exp["f"] - f_analytic[idx]))
        dev["sx"] = max(dev["sx"], abs(exp["sx"] - res.sx[idx]))
        dev["sy"] = max(dev["sy"], abs(exp["sy"] - res.sy[idx]))
        for s in subsets:
            ox, oy = exp["cascade"][s]
            ax, ay = cascades[s][0][idx], cascades[s][1][idx]
            dev[f"cascade_k{len(s)}"] = max(dev[f"cascade_k{len(s)}"],
                                            abs(ox - ax), abs(oy - ay))
    return {
        "n": model.N,
        "points": len(grid),
        "max_abs_deviation": dev,
        "pass_1e10": bool(max(dev.values()) <= 1e-10),
    }


def _selftest_oracle_check():
    model = curie_weiss.build_model(2, 1.0, 0.0, 0, bloch_state((1, 0, 0)))
    sb = oracle.sector_blocks_at(model, 0.0)
    eye = np.eye(4) / 4.0
    assert np.allclose(sb.blocks[(0, 0)], 0.5 * eye, atol=1e-15)
    assert np.allclose(sb.blocks[(0, 1)], 0.5 * eye, atol=1e-15)
    joint = oracle.reconstruct_joint(sb, model.r0)
    assert abs(np.trace(joint.matrix) - 1.0) <= 1e-12


def _cmd_appc_report(args) -> dict:
    model = _model_from_args(args)
    grid = _grid_from_args(model, args)
    rep = oracle.appendix_c_report(oracle.iter_sector_blocks(model, grid))
    cols = ["t", "invariant_deviation", "sx"]
    series = [rep.times, rep.invariant_deviation, rep.sx]
    for k in sorted(rep.correlators):
        cols.append(f"cascade_{k}")
        series.append(rep.correlators[k])
    rows = [list(vals) for vals in zip(*series)]
    return {"columns": cols, "rows": rows}


def _selftest_appc_report():
    model1 = curie_weiss.build_model(1, 1.0, 0.0, 0, bloch_state((1, 0, 0)))
    rep1 = oracle.appendix_c_report(oracle.iter_sector_blocks(model1, [0.0, 0.1]))
    assert rep1.no_macroscopic_limit
    model2 = curie_weiss.build_model(2, 1.0, 0.0, 0, bloch_state((1, 0, 0)))
    rep2 = oracle.appendix_c_report(oracle.iter_sector_blocks(model2, [0.0, 0.3, 0.7]))
    assert rep2.invariant_ok


_COMMANDS = {
    "truncate": (_cmd_truncate, _selftest_truncate, "csv"),
    "recur": (_cmd_recur, _selftest_recur, "csv"),
    "cascade": (_cmd_cascade, _selftest_cascade, "csv"),
    "register": (_cmd_register, _selftest_register, "json"),
    "finalstate": (_cmd_finalstate, _selftest_finalstate, "json"),
    "born": (_cmd_born, _selftest_born, "json"),
    "reduce": (_cmd_reduce, _selftest_reduce, "json"),
    "ambiguity": (_cmd_ambiguity, _selftest_ambiguity, "json"),
    "dispersionless": (_cmd_dispersionless, _selftest_dispersionless, "json"),
    "chsh": (_cmd_chsh, _selftest_chsh, "json"),
    "feasible": (_cmd_feasible, _selftest_feasible, "json"),
    "oracle-check": (_cmd_oracle_check, _selftest_oracle_check, "json"),
    "appc-report": (_cmd_appc_report, _selftest_appc_report, "csv"),
}


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", default=None, help="INI config file with defaults")
    sp.add_argument("--out", default=None, help="output path (stdout if omitted)")
    sp.add_argument("--format", default=None, choices=("csv", "json"))
    sp.add_argument("--selftest", action="store_true",
                    help="run built-in checks and exit")


def _add_model(sp: argparse.ArgumentParser, n_default: int = 100) -> None:
    sp.add_argument("--N", type=int, default=n_default, help="magnet spin count")
    sp.add_argument("--g", type=float, default=1.0, help="base coupling")
    sp.add_argument("--delta-g-rel", dest="delta_g_rel", type=float, default=0.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--r0", default="+x", help="tested-spin Bloch vector or named axis")


def _add_grid(sp: argparse.ArgumentParser, tmax: float = 4.0, points: int = 400) -> None:
    sp.add_argument("--tmax-tau", dest="tmax_tau", type=float, default=tmax,
                    help="grid end in units of tau")
    sp.add_argument("--points", type=int, default=points)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qmeas",
        description="ideal quantum measurement simulator: truncation, "
                    "registration, run statistics, and verification tools")
    parser.add_argument("--version", action="version", version=f"qmeas {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    sp = subs.add_parser("truncate", help="transverse decay series")
    _add_common(sp)
    _add_model(sp, n_default=10000)
    _add_grid(sp)

    sp = subs.add_parser("recur", help="recurrence peaks vs damping estimate")
    _add_common(sp)
    _add_model(sp, n_default=400)
    sp.add_argument("--nu-max", dest="nu_max", type=int, default=2)
    sp.add_argument("--seeds", type=int, default=1, help="number of seeds from --seed up")

    sp = subs.add_parser("cascade", help="spin-magnet correlation cascade")
    _add_common(sp)
    _add_model(sp, n_default=10000)
    _add_grid(sp)
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--subset", default=None, help="comma list of magnet indices")

    sp = subs.add_parser("register", help="mean-field magnetization and pointer limit")
    _add_common(sp)
    sp.add_argument("--J", type=float, default=1.0)
    sp.add_argument("--T", type=float, default=0.8)
    sp.add_argument("--field", type=float, default=0.0)
    sp.add_argument("--N", type=int, default=0, help="magnet size for the pointer limit")
    sp.add_argument("--scales", default="0.5,0.25,0.125,0.0625")

    sp = subs.add_parser("finalstate", help="registered joint state summary")
    _add_common(sp)
    sp.add_argument("--N", type=int, default=10)
    sp.add_argument("--J", type=float, default=1.0)
    sp.add_argument("--T", type=float, default=0.5)
    sp.add_argument("--r0", default="+x")
    sp.add_argument("--reduced", action="store_true",
                    help="use the magnetization-sector representation")

    sp = subs.add_parser("born", help="Born weights and sampled frequencies")
    _add_common(sp)
    sp.add_argument("--r0", default="+x")
    sp.add_argument("--runs", type=int, default=100000)
    sp.add_argument("--seed", type=int, default=0)

    sp = subs.add_parser("reduce", help="branch and unread reductions")
    _add_common(sp)
    sp.add_argument("--r0", default="+x")
    sp.add_argument("--mode", choices=("luders", "von-neumann", "unread"),
                    default="unread")
    sp.add_argument("--outcome", type=int, default=0)

    sp = subs.add_parser("ambiguity", help="two-chord decomposition witness")
    _add_common(sp)
    sp.add_argument("--v", default="0,0,0")
    sp.add_argument("--d1", default="0,0,1")
    sp.add_argument("--d2", default="1,0,0")

    sp = subs.add_parser("dispersionless", help="certain-observable family of a state")
    _add_common(sp)
    sp.add_argument("--populations", default="0.5,0.3,0.2",
                    help="diagonal state populations")
    sp.add_argument("--rank-tol", dest="rank_tol", type=float, default=1e-10)

    sp = subs.add_parser("chsh", help="CHSH combination on the singlet")
    _add_common(sp)
    sp.add_argument("--state", default="singlet")

    sp = subs.add_parser("feasible", help="joint-distribution feasibility of a table")
    _add_common(sp)
    sp.add_argument("--correlators", default="0,0,0,0",
                    help="e_zu,e_zv,e_xu,e_xv")
    sp.add_argument("--marginals-a", dest="marginals_a", default=None)
    sp.add_argument("--marginals-b", dest="marginals_b", default=None)

    sp = subs.add_parser("oracle-check", help="analytic vs dense-evolution deviations")
    _add_common(sp)
    _add_model(sp, n_default=8)
    _add_grid(sp, points=200)

    sp = subs.add_parser("appc-report", help="block invariant vs observable decay")
    _add_common(sp)
    _add_model(sp, n_default=8)
    _add_grid(sp, points=200)

    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    path = None
    for i, token in enumerate(argv):
        if token == "--config":
            if i + 1 >= len(argv):
                raise ValidationError("--config needs a path")
            path = argv[i + 1]
        elif token.startswith("--config="):
            path = token.split("=", 1)[1]
    if path is None:
        return argv
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = ExperimentConfig.from_ini(fh.read())
    except OSError as exc:
        raise ValidationError(f"cannot read config {path!r}: {exc}") from exc
    flat = cfg.flat()
    command = argv[0] if argv and not argv[0].startswith("-") else cfg.command
    if not command:
        raise ValidationError("config file must name a command when none is given")
    sub = None
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            sub = action.choices.get(command)
    if sub is None:
        raise ValidationError(f"unknown command {command!r} in config")
    defaults = {}
    for action in sub._actions:
        if action.dest in flat:
            raw = flat[action.dest]
            if action.type is not None:
                try:
                    defaults[action.dest] = action.type(raw)
                except ValueError as exc:
                    raise ValidationError(
                        f"bad config value {action.dest} = {raw!r}") from exc
            elif isinstance(action, argparse._StoreTrueAction):
                defaults[action.dest] = raw.strip().lower() in ("1", "true", "yes", "on")
            else:
                defaults[action.dest] = raw
    sub.set_defaults(**defaults)
    if argv and not argv[0].startswith("-"):
        return argv
    return [command] + argv


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config(parser, argv)
        args = parser.parse_args(argv)
        fn, selftest, default_format = _COMMANDS[args.command]
        if args.selftest:
            try:
                selftest()
            except AssertionError as exc:
                print(f"selftest {args.command}: FAIL {exc}", file=sys.stderr)
                return 1
            print(f"selftest {args.command}: PASS")
            return 0
        payload = fn(args)
        _emit(args, payload, default_format)
        return 0
    except GuardError as exc:
        print(f"qmeas: guard: {exc}", file=sys.stderr)
        return 3
    except ValidationError as exc:
        print(f"qmeas: config: {exc}", file=sys.stderr)
        return 2
    except QmeasError as exc:
        print(f"qmeas: numerical: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"qmeas: io: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
