"""Command-line front end: reproducible parameter sweeps and matrix dumps.

Every experiment evaluates a deterministic parameter grid and writes either
CSV (``#``-prefixed metadata lines, a header row, the swept variable in the
first column, gnuplot-friendly) or line-delimited JSON records.  Output files
embed a hash of the fully resolved configuration together with the cutoff and
tail tolerance actually used.

A flat ``key=value`` config file can seed any run; repeated keys build grids
and command-line flags override file values.  Loss grids accept either
``eta`` or ``R = 1 - eta``; rows echo both.  Exit codes: 0 on success, 2 on
configuration errors, 3 on numeric failures (unreachable cutoff,
all-inconclusive visibility, vanishing conditional probability).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass

from .amplifier import GainParams, micro_macro_state, micro_macro_state_hv, required_cutoff
from .channels import InjectionParams, LossParams, attenuated_state_with_injection
from .fock import (
    ConditioningError,
    Cutoff,
    CutoffError,
    PolarizationBasis,
    TwoModeVector,
    UndefinedVisibilityError,
    photon_distribution,
)
from .measurement import lossy_fringe_probabilities, threshold_povm
from .metrics import (
    concurrence_with_injection,
    critical_injection_probability,
    critical_injection_scan,
)
from .witnesses import (
    DICHOTOMIC_BOUND,
    SEPARABLE_BOUND,
    ofilter_witness_lossy,
    sigma_witness_lossy,
    simon_spin_witness_lossy,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

# Dense witness sweeps hold all Kraus images in memory; keep them desk sized.
_WITNESS_CUTOFF_LIMIT = 80

_NUMERIC_FAILURES = (CutoffError, UndefinedVisibilityError, ConditioningError)


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run parameters; hashing covers every value in use."""

    experiment: str
    values: dict
    out: str | None
    fmt: str

    def canonical_text(self) -> str:
        lines = [f"experiment={self.experiment}", f"format={self.fmt}"]
        for key in sorted(self.values):
            joined = ",".join(str(v) for v in self.values[key])
            lines.append(f"{key}={joined}")
        return "\n".join(lines) + "\n"

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()


# --------------------------------------------------------------------------
# configuration plumbing
# --------------------------------------------------------------------------

def _parse_config_file(path: str) -> dict[str, list[str]]:
    values: dict[str, list[str]] = {}
    try:
        with open(path, "r", encoding="utf-8") as handle:
            for lineno, raw in enumerate(handle, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
                key, _, value = line.partition("=")
                key = key.strip().replace("-", "_")
                for part in value.split(","):
                    part = part.strip()
                    if part:
                        values.setdefault(key, []).append(part)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return values


def _floats(values: dict, key: str) -> list[float]:
    try:
        return [float(v) for v in values[key]]
    except ValueError as exc:
        raise ConfigError(f"parameter {key!r} expects numbers: {exc}") from exc


def _ints(values: dict, key: str) -> list[int]:
    out = []
    for v in values[key]:
        try:
            out.append(int(v))
        except ValueError as exc:
            raise ConfigError(f"parameter {key!r} expects integers: {exc}") from exc
    return out


def _scalar(values: dict, key: str, convert) -> object:
    entries = values[key]
    if len(entries) != 1:
        raise ConfigError(f"parameter {key!r} expects a single value, got {entries}")
    try:
        return convert(entries[0])
    except ValueError as exc:
        raise ConfigError(f"parameter {key!r}: {exc}") from exc


def _eta_grid(values: dict) -> list[float]:
    if "eta" in values and "R" in values:
        raise ConfigError("give either an eta grid or an R grid, not both")
    if "R" in values:
        etas = [1.0 - r for r in _floats(values, "R")]
    else:
        etas = _floats(values, "eta")
    for eta in etas:
        if not 0.0 <= eta <= 1.0:
            raise ConfigError(f"transmittivity {eta} outside [0, 1]")
    return etas


def _gain_grid(values: dict) -> list[float]:
    gs = _floats(values, "g")
    for g in gs:
        if g < 0.0:
            raise ConfigError(f"gain {g} must be non-negative")
    return gs


def _basis_from_label(label: str) -> PolarizationBasis:
    if label == "hv":
        return PolarizationBasis.hv()
    if label == "pm":
        return PolarizationBasis.plus_minus()
    if label == "rl":
        return PolarizationBasis.right_left()
    if label.startswith("eq:"):
        try:
            return PolarizationBasis.equatorial(float(label[3:]))
        except ValueError as exc:
            raise ConfigError(f"bad basis phase in {label!r}") from exc
    raise ConfigError(f"unknown basis {label!r} (use hv, pm, rl or eq:PHI)")


def _resolve_cutoff(values: dict, gain: GainParams, default_tail: float) -> Cutoff:
    tail = float(_scalar(values, "tail_tol", float)) if "tail_tol" in values else default_tail
    if "cutoff" in values:
        n_max = int(_scalar(values, "cutoff", int))
        if n_max < 1:
            raise ConfigError("cutoff must be a positive photon number")
        return Cutoff(n_max, tail)
    return Cutoff(required_cutoff(gain, min(tail, 1e-9)), tail)


def _witness_cutoff(values: dict, default_n: int, default_tail: float) -> Cutoff:
    tail = float(_scalar(values, "tail_tol", float)) if "tail_tol" in values else default_tail
    n_max = int(_scalar(values, "cutoff", int)) if "cutoff" in values else default_n
    if n_max < 1:
        raise ConfigError("cutoff must be a positive photon number")
    if n_max > _WITNESS_CUTOFF_LIMIT:
        raise ConfigError(
            f"witness sweeps support cutoff <= {_WITNESS_CUTOFF_LIMIT}; "
            f"{n_max} would not fit in memory"
        )
    return Cutoff(n_max, tail)


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------

def _run_visibility(cfg: RunConfig):
    values = cfg.values
    etas = _eta_grid(values)
    rows = []
    for g in _gain_grid(values):
        gain = GainParams(g)
        cutoff = _resolve_cutoff(values, gain, 1e-9)
        for k in _ints(values, "k"):
            for eta in etas:
                loss = LossParams(eta)
                p_plus, p_minus, p_zero = lossy_fringe_probabilities(
                    0.0, gain, loss, k, cutoff
                )
                if p_plus + p_minus <= 0.0:
                    raise UndefinedVisibilityError(
                        f"all outcomes inconclusive at eta={eta}, k={k}"
                    )
                v = (p_plus - p_minus) / (p_plus + p_minus)
                rows.append(
                    (loss.R, eta, g, k, cutoff.n_max, p_plus, p_minus, p_zero, v)
                )
    columns = ["R", "eta", "g", "k", "cutoff", "P_plus", "P_minus", "P_zero", "V"]
    return {}, columns, rows


def _run_witness_sigma(cfg: RunConfig):
    values = cfg.values
    etas = _eta_grid(values)
    cutoff = _witness_cutoff(values, 30, 0.5)
    rows = []
    for g in _gain_grid(values):
        gain = GainParams(g)
        state = micro_macro_state(0.0, gain, cutoff)
        for eta in etas:
            rep = sigma_witness_lossy(state, LossParams(eta))
            rows.append(
                (1.0 - eta, eta, g, cutoff.n_max)
                + tuple(rep.terms)
                + (rep.value, SEPARABLE_BOUND, DICHOTOMIC_BOUND)
            )
    columns = [
        "R", "eta", "g", "cutoff", "term_1", "term_2", "term_3",
        "S", "bound_separable", "bound_dichotomic",
    ]
    return {}, columns, rows


def _run_witness_ofilter(cfg: RunConfig):
    values = cfg.values
    etas = _eta_grid(values)
    cutoff = _witness_cutoff(values, 30, 0.5)
    rows = []
    for g in _gain_grid(values):
        gain = GainParams(g)
        state = micro_macro_state(0.0, gain, cutoff)
        for k in _ints(values, "k"):
            if k < 0:
                raise ConfigError("threshold k must be non-negative")
            for eta in etas:
                rep = ofilter_witness_lossy(state, LossParams(eta), k)
                rows.append(
                    (1.0 - eta, eta, g, k, cutoff.n_max)
                    + tuple(rep.terms)
                    + (rep.value, SEPARABLE_BOUND)
                )
    columns = [
        "R", "eta", "g", "k", "cutoff", "term_1", "term_2", "term_3",
        "S", "nominal_bound",
    ]
    meta = {"caveat": "bound valid only under the coherent-amplification assumption"}
    return meta, columns, rows


def _run_witness_stokes(cfg: RunConfig):
    values = cfg.values
    etas = _eta_grid(values)
    rows = []
    for g in _gain_grid(values):
        gain = GainParams(g)
        cutoff = _resolve_cutoff(values, gain, 1e-8)
        state = micro_macro_state_hv(gain, cutoff)
        for eta in etas:
            rep = simon_spin_witness_lossy(state, LossParams(eta))
            rows.append(
                (eta, 1.0 - eta, g, cutoff.n_max)
                + tuple(rep.terms)
                + (rep.params["mean_photons_b"], rep.value, 0.0)
            )
    columns = [
        "eta", "R", "g", "cutoff", "term_1", "term_2", "term_3",
        "mean_photons_b", "value", "bound",
    ]
    return {}, columns, rows


def _run_concurrence(cfg: RunConfig):
    values = cfg.values
    if "t" in values:
        rows = []
        for t in _floats(values, "t"):
            if not 0.0 <= t < 1.0:
                raise ConfigError(f"t={t} outside [0, 1)")
            t2 = t * t
            rows.append((t, (1.0 - t2) / (1.0 + 3.0 * t2)))
        return {}, ["t", "C"], rows
    etas = _eta_grid(values)
    rows = []
    for g in _gain_grid(values):
        gain = GainParams(g)
        for eta in etas:
            loss = LossParams(eta)
            t = loss.R * gain.tanh_g
            for p in _floats(values, "p"):
                c = concurrence_with_injection(gain, loss, InjectionParams(p))
                p_crit = critical_injection_probability(gain, loss)
                rows.append((g, eta, loss.R, p, t, c, p_crit))
    columns = ["g", "eta", "R", "p", "t", "C", "p_crit"]
    return {}, columns, rows


def _run_pcrit(cfg: RunConfig):
    values = cfg.values
    etas = _eta_grid(values)
    rows = []
    for g in _gain_grid(values):
        gain = GainParams(g)
        for eta in etas:
            loss = LossParams(eta)
            closed = critical_injection_probability(gain, loss)
            scanned = critical_injection_scan(gain, loss, tol=1e-6)
            rows.append((g, eta, loss.R, closed, scanned))
    columns = ["g", "eta", "R", "p_crit", "p_crit_scan"]
    return {}, columns, rows


def _run_ofilter_dist(cfg: RunConfig):
    values = cfg.values
    n = int(_scalar(values, "n", int))
    m = int(_scalar(values, "m", int))
    if n < 0 or m < 0 or n + m < 1:
        raise ConfigError("the Fock state needs a non-negative photon pair with n+m >= 1")
    prep = _basis_from_label(str(_scalar(values, "prep_basis", str)))
    target = _basis_from_label(str(_scalar(values, "basis", str)))
    k = int(_scalar(values, "k", int))
    if k < 0:
        raise ConfigError("threshold k must be non-negative")
    total = n + m
    state = TwoModeVector({(n, m): 1.0}, total, prep)
    dist = photon_distribution(state, target)
    povm = threshold_povm(target, k, total)
    from .fock import fock_space

    space = fock_space(total)
    rows = []
    # rotations conserve the total photon number, so only this sector carries weight
    for idx in range(space.dim):
        if int(space.total[idx]) != total:
            continue
        key = (int(space.n[idx]), int(space.m[idx]))
        rows.append((key[0], key[1], dist.get(key, 0.0), int(povm.signs[idx])))
    meta = {"state": f"|{n},{m}> in {prep.label}", "measured_in": target.label}
    return meta, ["n", "m", "probability", "outcome"], rows


def _run_density(cfg: RunConfig):
    values = cfg.values
    g = float(_scalar(values, "g", float))
    if g < 0.0:
        raise ConfigError("gain must be non-negative")
    etas = _eta_grid(values)
    if len(etas) != 1:
        raise ConfigError("the density experiment expects a single eta (or R)")
    p = float(_scalar(values, "p", float))
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"injection probability {p} outside [0, 1]")
    gain = GainParams(g)
    loss = LossParams(etas[0])
    mat = attenuated_state_with_injection(InjectionParams(p), gain, loss)
    rows = []
    for i in range(4):
        for j in range(4):
            rows.append((i, j, float(mat[i, j].real), float(mat[i, j].imag)))
    meta = {
        "basis_order": "HH,HV,VH,VV",
        "t": loss.R * gain.tanh_g,
        "g": g,
        "eta": loss.eta,
        "p": p,
    }
    return meta, ["row", "col", "re", "im"], rows


def emit_density_matrix(cfg: RunConfig):
    """Density-matrix dump of the attenuated joint state (basis HH, HV, VH, VV)."""
    return _run_density(cfg)


_EXPERIMENTS = {
    "visibility": (
        _run_visibility,
        {"g": ["1.8"], "k": ["0"], "R": [f"{r / 20:.2f}" for r in range(20)]},
        {"g", "k", "eta", "R", "cutoff", "tail_tol"},
    ),
    "witness-sigma": (
        _run_witness_sigma,
        {"g": ["0", "0.3", "0.6", "0.9", "1.2", "1.5"],
         "eta": [f"{e / 20:.2f}" for e in range(20, -1, -1)]},
        {"g", "eta", "R", "cutoff", "tail_tol"},
    ),
    "witness-ofilter": (
        _run_witness_ofilter,
        {"g": ["1.2"], "k": ["0", "1", "2"],
         "eta": [f"{e / 20:.2f}" for e in range(20, -1, -1)]},
        {"g", "k", "eta", "R", "cutoff", "tail_tol"},
    ),
    "witness-stokes": (
        _run_witness_stokes,
        {"g": ["0.3", "0.6", "1.0"], "eta": ["0", "0.25", "0.5", "0.75", "1.0"]},
        {"g", "eta", "R", "cutoff", "tail_tol"},
    ),
    "concurrence": (
        _run_concurrence,
        {"t": [f"{t / 50:.2f}" for t in range(50)]},
        {"t", "g", "eta", "R", "p", "cutoff", "tail_tol"},
    ),
    "pcrit": (
        _run_pcrit,
        {"g": [f"{x / 5:.1f}" for x in range(16)], "eta": ["0.0001", "0.01", "0.1", "0.5"]},
        {"g", "eta", "R"},
    ),
    "ofilter-dist": (
        _run_ofilter_dist,
        {"n": ["10"], "m": ["0"], "prep_basis": ["pm"], "basis": ["rl"], "k": ["5"]},
        {"n", "m", "prep_basis", "basis", "k"},
    ),
    "density": (
        _run_density,
        {"g": ["3"], "eta": ["0.0001"], "p": ["1"]},
        {"g", "eta", "R", "p"},
    ),
}


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value + 0.0, ".12g")
    return str(value)


def _write_csv(stream, cfg: RunConfig, meta: dict, columns, rows) -> None:
    stream.write(f"# experiment={cfg.experiment}\n")
    stream.write(f"# config_sha256={cfg.sha256()}\n")
    for key in sorted(cfg.values):
        stream.write(f"# {key}={','.join(str(v) for v in cfg.values[key])}\n")
    for key in sorted(meta):
        if key not in cfg.values:
            stream.write(f"# {key}={_format_value(meta[key])}\n")
    stream.write(f"# columns: {' '.join(columns)}\n")
    stream.write(",".join(columns) + "\n")
    for row in rows:
        stream.write(",".join(_format_value(v) for v in row) + "\n")


def _write_records(stream, cfg: RunConfig, meta: dict, columns, rows) -> None:
    header = {
        "experiment": cfg.experiment,
        "config_sha256": cfg.sha256(),
        "config": {k: list(map(str, v)) for k, v in sorted(cfg.values.items())},
        "meta": {k: meta[k] for k in sorted(meta)},
        "columns": list(columns),
    }
    stream.write(json.dumps(header, sort_keys=True) + "\n")
    for row in rows:
        record = dict(zip(columns, row))
        stream.write(json.dumps(record, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# argument parsing and entry point
# --------------------------------------------------------------------------

def _add_grid_option(parser: argparse.ArgumentParser, flag: str, help_text: str) -> None:
    parser.add_argument(flag, action="append", default=None, metavar="V[,V...]",
                        help=help_text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qiopa",
        description="Desk-scale sweeps for the seeded-amplifier micro-macro "
        "entanglement model.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    specs = {
        "visibility": "Fringe visibility of the lossy macro-qubit versus losses.",
        "witness-sigma": "Pseudo-Pauli witness S(eta) curves.",
        "witness-ofilter": "Threshold-filter witness S(eta, k) curves.",
        "witness-stokes": "Spin-criterion value, expected 2*eta.",
        "concurrence": "Attenuated-regime concurrence (t grid or g/eta/p grids).",
        "pcrit": "Critical injection probability, closed form and PPT scan.",
        "ofilter-dist": "Photon-number distribution of a Fock state in a basis.",
        "density": "Attenuated joint density matrix (basis HH, HV, VH, VV).",
    }
    grid_flags = {
        "--g": "gain grid",
        "--eta": "transmittivity grid",
        "--R": "losses grid (1 - eta)",
        "--k": "threshold grid",
        "--p": "injection probability grid",
        "--t": "coherence parameter grid",
    }
    scalar_flags = {
        "--cutoff": ("maximum total photon number", int),
        "--tail-tol": ("maximum truncated probability mass", float),
        "--n": ("photons in the first mode", int),
        "--m": ("photons in the second mode", int),
        "--prep-basis": ("preparation basis (hv, pm, rl, eq:PHI)", str),
        "--basis": ("measurement basis (hv, pm, rl, eq:PHI)", str),
    }
    for name, (_, _, allowed) in _EXPERIMENTS.items():
        p = sub.add_parser(name, help=specs[name])
        p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--format", choices=("csv", "records"), default=None,
                       dest="fmt", help="output format (default csv)")
        for flag, help_text in grid_flags.items():
            if flag.lstrip("-").replace("-", "_") in allowed:
                _add_grid_option(p, flag, help_text)
        for flag, (help_text, typ) in scalar_flags.items():
            if flag.lstrip("-").replace("-", "_") in allowed:
                p.add_argument(flag, default=None, type=str,
                               dest=flag.lstrip("-").replace("-", "_"),
                               help=help_text)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    experiment = args.experiment
    _, defaults, allowed = _EXPERIMENTS[experiment]
    values: dict[str, list[str]] = {}
    out = args.out
    fmt = None
    if args.config:
        for key, entries in _parse_config_file(args.config).items():
            if key == "experiment":
                if entries != [experiment]:
                    raise ConfigError(
                        f"config file is for experiment {entries[0]!r}, not {experiment!r}"
                    )
            elif key == "out":
                if out is None:
                    out = entries[-1]
            elif key == "format":
                fmt = entries[-1]
            elif key in allowed:
                values[key] = entries
            else:
                raise ConfigError(f"unknown parameter {key!r} for {experiment}")
    for key in allowed:
        supplied = getattr(args, key, None)
        if supplied is None:
            continue
        if isinstance(supplied, list):
            entries = []
            for chunk in supplied:
                entries.extend(part.strip() for part in str(chunk).split(",") if part.strip())
            values[key] = entries
        else:
            values[key] = [str(supplied)]
    if "eta" in values and "R" in values:
        raise ConfigError("give either an eta grid or an R grid, not both")
    # the "t" grid (if user supplied) switches the concurrence experiment to
    # its analytic-curve mode; keep loss defaults out of the way then
    user_keys = set(values)
    for key, entries in defaults.items():
        if key in values:
            continue
        if key == "eta" and "R" in user_keys:
            continue
        if key == "R" and "eta" in user_keys:
            continue
        if experiment == "concurrence" and key == "t" and (
            user_keys & {"g", "eta", "R", "p"}
        ):
            continue
        values[key] = list(entries)
    if experiment == "concurrence" and "t" not in values:
        values.setdefault("p", ["1"])
        if "eta" not in values and "R" not in values:
            raise ConfigError("the concurrence experiment needs eta (or R) grids when t is absent")
        if "g" not in values:
            raise ConfigError("the concurrence experiment needs a gain grid when t is absent")
    if args.fmt is not None:
        fmt = args.fmt
    if fmt is None:
        fmt = "csv"
    if fmt not in ("csv", "records"):
        raise ConfigError(f"unknown output format {fmt!r}")
    for key, entries in values.items():
        if not entries:
            raise ConfigError(f"parameter {key!r} resolved to an empty grid")
    return RunConfig(experiment, values, out, fmt)


def run_experiment(cfg: RunConfig) -> tuple[dict, list[str], list[tuple]]:
    """Evaluate an experiment grid; deterministic for a fixed configuration."""
    runner, _, _ = _EXPERIMENTS[cfg.experiment]
    meta, columns, rows = runner(cfg)
    return meta, columns, rows


def _emit(cfg: RunConfig, meta: dict, columns, rows) -> None:
    if cfg.out is None:
        writer = _write_csv if cfg.fmt == "csv" else _write_records
        writer(sys.stdout, cfg, meta, columns, rows)
        return
    with open(cfg.out, "w", encoding="utf-8", newline="\n") as handle:
        writer = _write_csv if cfg.fmt == "csv" else _write_records
        writer(handle, cfg, meta, columns, rows)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    try:
        cfg = resolve_config(args)
        meta, columns, rows = run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERIC_FAILURES as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _emit(cfg, meta, columns, rows)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
