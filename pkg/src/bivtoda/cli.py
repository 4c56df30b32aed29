"""Batch command line front-end.

    bivtoda {moments,recur,verify,evolve,stieltjes} --config run.json [--out DIR]

Errors go to stderr as ``{"kind", "message", "module"}`` JSON.  Exit codes:
0 ok, 2 bad input, 3 degeneracy or numerical failure, 4 verification
failure, 5 divergence.
"""
from __future__ import annotations

import argparse
import datetime
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import jacobi, moments, ops, stieltjes, toda
from .errors import BivTodaError, ParameterError
from .weights import WeightSpec

EXIT_OK, EXIT_PARAMETER, EXIT_DEGENERACY, EXIT_VERIFY, EXIT_DIVERGENCE = 0, 2, 3, 4, 5

_EXIT_BY_KIND = {
    "parameter": EXIT_PARAMETER,
    "domain": EXIT_PARAMETER,
    "capacity": EXIT_PARAMETER,
    "unsupported-oracle": EXIT_PARAMETER,
    "truncation-insufficient": EXIT_PARAMETER,
    "boundary": EXIT_PARAMETER,
    "convergence-domain": EXIT_PARAMETER,
    "degeneracy": EXIT_DEGENERACY,
    "structural": EXIT_DEGENERACY,
    "accuracy": EXIT_DEGENERACY,
    "numerical": EXIT_DEGENERACY,
    "divergence": EXIT_DIVERGENCE,
}

DEFAULT_GATES = {
    "moment_ode_residual": 1e-6,
    "orthogonality_residual": 1e-10,
    "three_term_residual": 1e-10,
    "commutation_residual": 1e-11,
    "moment_recovery": 1e-11,
    "toda_fd_residual": 1e-6,
    "alt_toda_difference": 1e-12,
    "lax_residual": 1e-7,
    "pdot_residual": 1e-6,
    "spectrum_imaginary": 1e-10,
    "stieltjes_ode_residual": 1e-6,
    "flow_vs_exact": 1e-6,
}

_KEYS = {"weight", "N", "M", "times", "fd_step", "dt", "K", "t_end", "points",
         "gates", "out", "horizon"}


@dataclass
class RunConfig:
    weight: WeightSpec
    N: int = 6
    M: int | None = None
    times: list = field(default_factory=lambda: [0.0, 0.25, 0.5])
    fd_step: float = toda.DEFAULT_FD_STEP
    dt: float = toda.DEFAULT_DT
    K: int = 40
    t_end: float | None = None
    points: list = field(default_factory=lambda: [[3.0, 3.0]])
    gates: dict = field(default_factory=dict)
    out: str = "."
    horizon: float = toda.DEFAULT_HORIZON

    def __post_init__(self):
        if not isinstance(self.N, int) or self.N < 1:
            raise ParameterError(f"N must be an integer >= 1, got {self.N!r}", "cli")
        if self.M is None:
            self.M = 2 * self.N + 2
        if not isinstance(self.M, int) or self.M < 2 * self.N + 2:
            raise ParameterError(
                f"insufficient moment degree: M={self.M} < 2N+2={2 * self.N + 2}", "cli")
        times = [float(t) for t in self.times]
        if not times:
            raise ParameterError("time grid is empty", "cli")
        if times[0] != 0.0 or any(b <= a for a, b in zip(times, times[1:])):
            raise ParameterError("time grid must start at 0 and increase strictly", "cli")
        self.times = times
        for name in ("fd_step", "dt", "horizon"):
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be > 0, got {value}", "cli")
            setattr(self, name, value)
        if not isinstance(self.K, int) or self.K < 0:
            raise ParameterError(f"K must be a non-negative integer, got {self.K!r}", "cli")
        self.t_end = self.times[-1] if self.t_end is None else float(self.t_end)
        if not (math.isfinite(self.t_end) and self.t_end >= 0):
            raise ParameterError(f"t_end must be >= 0, got {self.t_end}", "cli")
        unknown = set(self.gates) - set(DEFAULT_GATES)
        if unknown:
            raise ParameterError(f"unknown gates {sorted(unknown)}", "cli")
        gates = dict(DEFAULT_GATES)
        for name, tol in self.gates.items():
            tol = float(tol)
            if not (math.isfinite(tol) and tol > 0):
                raise ParameterError(f"gate {name} must be > 0, got {tol}", "cli")
            gates[name] = tol
        self.gates = gates
        self.points = [[complex(a), complex(b)] for a, b in self.points]

    @classmethod
    def from_dict(cls, data) -> "RunConfig":
        if not isinstance(data, dict) or "weight" not in data:
            raise ParameterError("config must be an object with a 'weight' entry", "cli")
        unknown = set(data) - _KEYS
        if unknown:
            raise ParameterError(f"unknown config keys {sorted(unknown)}", "cli")
        kwargs = dict(data)
        kwargs["weight"] = WeightSpec.from_dict(data["weight"])
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ParameterError(f"cannot read config {path}: {exc}", "cli") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"config is not valid JSON: {exc}", "cli") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {"weight": self.weight.to_dict(), "N": self.N, "M": self.M,
                "times": self.times, "fd_step": self.fd_step, "dt": self.dt, "K": self.K,
                "t_end": self.t_end, "horizon": self.horizon,
                "points": [[[z.real, z.imag] for z in p] for p in self.points],
                "gates": self.gates}


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    return path


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_moments(cfg: RunConfig, out: Path) -> int:
    table = moments.compute_moments(cfg.weight, cfg.M)
    _write(out, "moments.csv", table.to_csv())
    _write(out, "moments.json", table.to_json() + "\n")
    return EXIT_OK


def cmd_recur(cfg: RunConfig, out: Path) -> int:
    built = ops.build_ops(cfg.weight, cfg.N)
    rec = ops.recurrence_from_ops(built)
    doc = {"weight": cfg.weight.to_dict()}
    doc.update(ops.export_dict(built, rec))
    _write(out, "recurrence.json", _dump(doc))
    _write(out, "rank_report.json", _dump(ops.rank_certificates(rec)))
    return EXIT_OK


def _base(cfg):
    return cfg.weight.with_time(0.0)


def _verify_checks(cfg: RunConfig):
    """``(name, value)`` pairs; each value is the worst case over the time grid."""
    spec, N, h = _base(cfg), cfg.N, cfg.fd_step
    worst = {name: 0.0 for name in DEFAULT_GATES}

    def bump(name, value):
        worst[name] = max(worst[name], float(value))

    recovery_degree = min(N, 8)
    for t in cfg.times:
        state = toda.exact_state(spec, t, N)
        rec = state.rec
        table = state.ops.moments
        bump("moment_ode_residual", moments.moment_ode_residual(spec.with_time(t),
                                                                min(6, cfg.M), h))
        bump("orthogonality_residual", ops.orthogonality_residual(state.ops))
        bump("three_term_residual", ops.three_term_residual(state.ops, rec))
        bump("commutation_residual", jacobi.commutation_residuals(rec)["max"])
        J1, J2 = jacobi.assemble(rec, 1), jacobi.assemble(rec, 2)
        for a in range(recovery_degree + 1):
            for b in range(recovery_degree + 1 - a):
                bump("moment_recovery", abs(jacobi.corner_moment(J1, J2, a, b) - table[a, b]))
        bump("toda_fd_residual", toda.toda_fd_residual(spec, t, N, h))
        bump("alt_toda_difference",
             toda.rhs_difference(toda.toda_rhs(state), toda.alt_toda_rhs(state)))
        for i in (1, 2):
            bump("lax_residual", toda.lax_residual(state, i, h, spec))
        bump("pdot_residual", toda.pdot_residual(spec, t, N, h))
        orth = ops.orthonormalize(state.ops, rec)
        for i in (1, 2):
            L = jacobi.assemble(orth, i).matrix
            bump("spectrum_imaginary", np.max(np.abs(np.linalg.eigvals(L).imag)))
        for z1, z2 in cfg.points:
            bump("stieltjes_ode_residual",
                 stieltjes.stieltjes_ode_residual(spec, z1, z2, t, cfg.K, h,
                                                  cfg.gates["stieltjes_ode_residual"]))
    if cfg.t_end > 0:
        final = toda.integrate_toda(toda.exact_state(spec, 0.0, N), cfg.t_end, cfg.dt,
                                    cfg.horizon)
        exact = toda.exact_state(spec, cfg.t_end, N)
        bump("flow_vs_exact", toda.state_difference(final, exact, final.interior))
    return list(worst.items())


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    checks = []
    for name, value in _verify_checks(cfg):
        gate = cfg.gates[name]
        checks.append({"name": name, "value": value, "gate": gate, "pass": value < gate})
    passed = all(c["pass"] for c in checks)
    doc = {
        "metadata": {"timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat()},
        "config": cfg.to_dict(),
        "checks": checks,
        "passed": passed,
    }
    _write(out, "verify.json", _dump(doc))
    return EXIT_OK if passed else EXIT_VERIFY


def _grid_times(cfg):
    grid = [t for t in cfg.times if t < cfg.t_end]
    return grid + [cfg.t_end]


def cmd_evolve(cfg: RunConfig, out: Path) -> int:
    """``flow.jsonl`` gets one record per integrator step; ``spectra.csv`` the grid times."""
    spec, N = _base(cfg), cfg.N
    initial = toda.exact_state(spec, 0.0, N)
    lam0 = toda._state_spectrum(initial, 1, N)
    idx = toda._lower_half(lam0)
    grid = _grid_times(cfg)
    lines, rows = [], []

    def record(state):
        lam = toda._state_spectrum(state, 1, N)
        drift = float(np.max(np.abs(lam[idx] - lam0[idx]), initial=0.0))
        lax = max(toda.lax_consistency(state, 1), toda.lax_consistency(state, 2))
        lines.append(toda.flow_record(state, drift, lax))
        return lam

    rows.extend((0.0, N, j, v) for j, v in enumerate(record(initial)))
    state = initial
    for t in grid:
        if t <= state.t:
            continue
        state = toda.integrate_toda(state, t, cfg.dt, cfg.horizon, callback=record)
        lam = toda._state_spectrum(state, 1, N)
        rows.extend((t, N, j, v) for j, v in enumerate(lam))
    _write(out, "flow.jsonl", "\n".join(lines) + "\n")
    _write(out, "spectra.csv", jacobi.spectrum_csv(rows))
    return EXIT_OK


def cmd_stieltjes(cfg: RunConfig, out: Path) -> int:
    series = stieltjes.StieltjesSeries.from_spec(cfg.weight, cfg.K)
    _write(out, "stieltjes.csv", stieltjes.grid_csv(series, cfg.points))
    return EXIT_OK


COMMANDS = {
    "moments": cmd_moments,
    "recur": cmd_recur,
    "verify": cmd_verify,
    "evolve": cmd_evolve,
    "stieltjes": cmd_stieltjes,
}


def _error(kind, message, module="cli"):
    sys.stderr.write(json.dumps({"kind": kind, "message": message, "module": module}) + "\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="bivtoda", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.load(args.config)
        out = Path(args.out if args.out is not None else cfg.out)
        return COMMANDS[args.command](cfg, out)
    except BivTodaError as exc:
        sys.stderr.write(json.dumps(exc.to_dict()) + "\n")
        return _EXIT_BY_KIND.get(exc.kind, EXIT_DEGENERACY)
    except (TypeError, ValueError) as exc:
        _error("parameter", str(exc))
        return EXIT_PARAMETER


if __name__ == "__main__":
    sys.exit(main())
