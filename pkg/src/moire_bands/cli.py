"""Command-line interface with strict JSON configs and reproducible output.

``moire-bands <command> (--config FILE | --preset NAME) [--out PATH]
[--workers N]``.  Exit codes: 0 success, 2 configuration/validation error,
3 numerical failure.  Identical configs produce byte-identical artifacts:
reductions are ordered, iteration seeds fixed, every float is printed with
17 significant digits, and JSON keys are sorted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .agmon import SquareGrid, tunneling_action
from .blochpw import bands_on, build_basis
from .harmonic import compare, levels_up_to, numeric_coeffs, paper_coeffs
from .lattice import build_lattice, kgrid, kpath
from .potential import ModelParams, assemble_V, fourier_table, wells_audit
from .scan import narrowing_scan
from .singlewell import WellProblem, assemble_well, well_eigs
from .topology import GapClosureError, berry_links

COMMANDS = (
    "landscape",
    "bands",
    "chern",
    "agmon",
    "scan",
    "harmonic",
    "wells",
    "well",
    "fourier-check",
)


class ConfigError(ValueError):
    pass


def _positive(name):
    def check(v):
        if v <= 0:
            raise ConfigError(f"{name} must be positive")
    return check


def _num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


# key -> (kind, default or REQUIRED, validator or None); kind in
# {"num", "int", "bool", "str", "numlist", "strlist", "optnum", "optstr"}
_REQUIRED = object()

_COMMON = {
    "alpha": ("num", _REQUIRED, None),
    "beta": ("num", _REQUIRED, None),
    "U": ("num", _REQUIRED, None),
    "phi": ("num", _REQUIRED, None),
    "h": ("num", 0.1, _positive("h")),
}

_SCHEMAS = {
    "landscape": {"grid_n": ("int", 128, _positive("grid_n"))},
    "bands": {
        "labels": ("strlist", ["G", "K", "M", "G"], None),
        "n_per_segment": ("int", 30, _positive("n_per_segment")),
        "gcut": ("num", 6.0, _positive("gcut")),
        "nbands": ("int", 8, _positive("nbands")),
    },
    "chern": {
        "grid_n": ("int", 18, _positive("grid_n")),
        "nbands": ("int", 2, _positive("nbands")),
        "gcut": ("num", 6.0, _positive("gcut")),
    },
    "agmon": {
        "E": ("optnum", None, None),
        "per_cell": ("int", 256, _positive("per_cell")),
        "dump_rho": ("bool", False, None),
    },
    "scan": {
        "h_list": ("numlist", [0.12, 0.10, 0.08, 0.07, 0.06, 0.05], None),
        "kgrid_n": ("int", 6, _positive("kgrid_n")),
        "nbands": ("int", 3, _positive("nbands")),
        "gcut": ("optnum", None, None),
        "with_s0": ("bool", True, None),
    },
    "harmonic": {
        "mode": ("str", "numeric", None),
        "count": ("int", 8, _positive("count")),
        "bands_csv": ("optstr", None, None),
    },
    "wells": {"grid_n": ("int", 96, None)},
    "well": {
        "L": ("num", 1.5, _positive("L")),
        "n": ("int", 256, _positive("n")),
        "nev": ("int", 6, _positive("nev")),
        "delta1": ("num", 0.3, _positive("delta1")),
        "delta2": ("num", 0.45, _positive("delta2")),
    },
    "fourier-check": {
        "n_random": ("int", 100, _positive("n_random")),
        "fft_n": ("int", 16, _positive("fft_n")),
        "seed": ("int", 12345, None),
    },
}

#: figure-class parameter presets (alpha = 1 throughout).  The lone "h = 9"
#: in the band-structure figure caption is a misprint for h = 1/9, which is
#: what the companion figure and these presets use.
PRESETS = {
    "fig1-a": {"alpha": 1.0, "beta": 0.0, "U": 2.0, "phi": 4 * np.pi / 3},
    "fig1-b": {"alpha": 1.0, "beta": 5.0, "U": 2.0, "phi": 4 * np.pi / 3},
    "fig1-c": {"alpha": 1.0, "beta": 5.0, "U": 0.0, "phi": 4 * np.pi / 3},
    "fig1-d": {"alpha": 1.0, "beta": 0.0, "U": 0.0, "phi": 4 * np.pi / 3},
    "fig2-a": {"alpha": 1.0, "beta": 1.0, "U": 0.0, "phi": 1.32},
    "fig2-b": {"alpha": 1.0, "beta": 1.0, "U": 0.0, "phi": 1.94},
    "fig2-c": {"alpha": 1.0, "beta": 1.0, "U": 0.0, "phi": 2.31},
    "fig4-a": {"alpha": 1.0, "beta": 1.0 / 9.0, "U": 0.0, "phi": 0.0, "h": 1.0 / 9.0},
    "fig4-b": {
        "alpha": 1.0,
        "beta": 1.0 / 9.0,
        "U": 0.0,
        "phi": 2 * np.pi / 3,
        "h": 1.0 / 9.0,
    },
}


def _check_kind(key, kind, value):
    if kind == "num" and not _num(value):
        raise ConfigError(f"{key} must be a number")
    if kind == "int" and not (isinstance(value, int) and not isinstance(value, bool)):
        raise ConfigError(f"{key} must be an integer")
    if kind == "bool" and not isinstance(value, bool):
        raise ConfigError(f"{key} must be a boolean")
    if kind == "str" and not isinstance(value, str):
        raise ConfigError(f"{key} must be a string")
    if kind == "optnum" and value is not None and not _num(value):
        raise ConfigError(f"{key} must be a number or null")
    if kind == "optstr" and value is not None and not isinstance(value, str):
        raise ConfigError(f"{key} must be a string or null")
    if kind == "numlist":
        if not isinstance(value, list) or not value or not all(_num(v) for v in value):
            raise ConfigError(f"{key} must be a non-empty list of numbers")
    if kind == "strlist":
        if not isinstance(value, list) or not value or not all(
            isinstance(v, str) for v in value
        ):
            raise ConfigError(f"{key} must be a non-empty list of strings")


class RunConfig:
    """Validated configuration: model parameters plus command options."""

    def __init__(self, command, values):
        self.command = command
        self.values = values

    @property
    def params(self) -> ModelParams:
        v = self.values
        return ModelParams(
            alpha=float(v["alpha"]),
            beta=float(v["beta"]),
            U=float(v["U"]),
            phi=float(v["phi"]),
            h=float(v["h"]),
        )

    def serialize(self) -> str:
        return render_json(self.values)


def parse_config(text: str, command: str) -> RunConfig:
    """Parse and validate a JSON config document for ``command``.

    Unknown keys are rejected; missing required keys and type mismatches
    are reported by name; defaults are filled in.
    """
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    schema = dict(_COMMON)
    schema.update(_SCHEMAS[command])
    unknown = sorted(set(data) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    values = {}
    for key, (kind, default, validator) in sorted(schema.items()):
        if key in data:
            value = data[key]
            _check_kind(key, kind, value)
        else:
            if default is _REQUIRED:
                raise ConfigError(f"missing required config key: {key}")
            value = default
        if validator is not None and value is not None:
            validator(value)
        values[key] = value
    cfg = RunConfig(command, values)
    try:
        cfg.params  # surfaces ModelParams-level validation ("h must be positive")
    except ValueError as err:
        raise ConfigError(str(err)) from None
    return cfg


# ---------------------------------------------------------------------------
# deterministic rendering
# ---------------------------------------------------------------------------


def fmt(x) -> str:
    """Floats with 17 significant digits; '.' decimal separator."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    xf = float(x)
    if not np.isfinite(xf):
        raise ValueError("refusing to print a non-finite number")
    return format(xf, ".17g")


def render_json(obj, indent=0) -> str:
    """Canonical JSON: sorted keys, 17-significant-digit floats."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (bool, np.bool_, int, np.integer, float, np.floating)):
        return fmt(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = []
        for k in sorted(obj):
            items.append(f"{inner}{json.dumps(str(k))}: {render_json(obj[k], indent + 1)}")
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(np.asarray(obj).tolist()) if isinstance(obj, np.ndarray) else list(obj)
        if not seq:
            return "[]"
        items = [f"{inner}{render_json(v, indent + 1)}" for v in seq]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    raise TypeError(f"cannot render {type(obj)!r}")


def _provenance(cfg: RunConfig, extra=None):
    prov = {"command": cfg.command, "config": cfg.values, "version": __version__}
    if extra:
        prov.update(extra)
    return prov


def write_json(path, payload, cfg, extra=None):
    doc = dict(payload)
    doc["provenance"] = _provenance(cfg, extra)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_json(doc) + "\n")


def write_csv(path, header, rows, cfg, extra=None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# provenance: " + json.dumps(
            json.loads(render_json(_provenance(cfg, extra))), sort_keys=True
        ) + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# command implementations
# ---------------------------------------------------------------------------


def _cmd_landscape(cfg, out, workers):
    from .potential import eigs_exact

    p = cfg.params
    lat = build_lattice()
    n = cfg.values["grid_n"]
    s = np.arange(n) / n
    S, T = np.meshgrid(s, s, indexing="ij")
    X = np.stack(
        [S * lat.v1[0] + T * lat.v2[0], S * lat.v1[1] + T * lat.v2[1]], axis=-1
    )
    lo, hi = eigs_exact(X, p)
    rows = [
        (X[i, j, 0], X[i, j, 1], lo[i, j], hi[i, j])
        for i in range(n)
        for j in range(n)
    ]
    write_csv(out, ["x1", "x2", "lambda_minus", "lambda_plus"], rows, cfg)


def _cmd_bands(cfg, out, workers):
    p = cfg.params
    lat = build_lattice()
    path = kpath(cfg.values["labels"], cfg.values["n_per_segment"], lat)
    basis = build_basis(cfg.values["gcut"], lat)
    bs = bands_on(path, p, basis, nev=cfg.values["nbands"], workers=workers)
    header = ["arclength", "k1", "k2"] + [
        f"E{i+1}" for i in range(cfg.values["nbands"])
    ]
    rows = [
        (path.arclength[i], path.points[i, 0], path.points[i, 1], *bs.energies[i])
        for i in range(len(path))
    ]
    write_csv(
        out,
        header,
        rows,
        cfg,
        extra={"label_indices": list(path.label_indices), "dim": basis.dim},
    )


def _cmd_chern(cfg, out, workers):
    p = cfg.params
    lat = build_lattice()
    n = cfg.values["grid_n"]
    basis = build_basis(cfg.values["gcut"], lat)
    field = berry_links(p, kgrid(n, n, lat), cfg.values["nbands"], basis)
    write_json(
        out,
        {
            "nbands": field.nbands,
            "grid": [n, n],
            "chern": field.chern,
            "min_gap": field.min_gap,
            "flux_stats": {
                "total_over_2pi": field.total_flux / (2 * np.pi),
                "max_abs": float(np.abs(field.plaquette_flux).max()),
            },
        },
        cfg,
        extra={"dim": basis.dim},
    )


def _cmd_agmon(cfg, out, workers):
    p = cfg.params
    grid = SquareGrid(per_cell=cfg.values["per_cell"])
    field = tunneling_action(p, E=cfg.values["E"], grid=grid)
    write_json(
        out,
        {
            "E": field.energy,
            "S0": field.S0,
            "actions": {f"{a},{b}": v for (a, b), v in sorted(field.actions.items())},
            "grid": {"per_cell": grid.per_cell, "extent": grid.extent},
        },
        cfg,
    )
    if cfg.values["dump_rho"]:
        xs = grid.axis
        rows = (
            (xs[i], xs[j], field.rho[i, j])
            for i in range(xs.size)
            for j in range(xs.size)
        )
        write_csv(out + ".rho.csv", ["x1", "x2", "rho"], rows, cfg)


def _cmd_scan(cfg, out, workers):
    p = cfg.params
    s0 = None
    if cfg.values["with_s0"]:
        s0 = tunneling_action(p).S0
    result = narrowing_scan(
        p,
        h_list=cfg.values["h_list"],
        kgrid_n=cfg.values["kgrid_n"],
        nbands=cfg.values["nbands"],
        gcut=cfg.values["gcut"],
        s0=s0,
        workers=workers,
    )
    header = ["h"] + [f"width_{i+1}" for i in range(cfg.values["nbands"])]
    rows = [(h, *result.widths[i]) for i, h in enumerate(result.h_list)]
    write_csv(out, header, rows, cfg, extra={"gcut": result.gcut})
    fit_doc = {
        "a": result.fit.a,
        "b": result.fit.b,
        "r2": result.fit.r2,
        "n_used": result.fit.n_used,
        "gcut": result.gcut,
        "convergence_shift_at_h_min": result.convergence_shift,
        "s0": result.s0,
        "b_over_s0": result.b_over_s0(),
    }
    ratio = result.b_over_s0()
    if ratio is not None and not (0.3 <= ratio <= 2.2):
        fit_doc["warning"] = (
            "b/S0 outside the loose diagnostic range [0.3, 2.2]; "
            "the narrowing theorem fixes no constant"
        )
    write_json(out + ".fit.json", fit_doc, cfg)


def _cmd_harmonic(cfg, out, workers):
    p = cfg.params
    mode = cfg.values["mode"]
    if mode == "numeric":
        hd = numeric_coeffs(p)
    elif mode == "papermode":
        hd = paper_coeffs(p)
    else:
        raise ConfigError("mode must be 'numeric' or 'papermode'")
    count = cfg.values["count"]
    lam = levels_up_to(hd, count)
    gamma_energies = None
    if cfg.values["bands_csv"]:
        gamma_energies = _read_first_bands_row(cfg.values["bands_csv"], count)
    lines = [
        f"# harmonic levels (mode={hd.mode}, m0={fmt(hd.m0)}, "
        f"c1={fmt(hd.c1)}, c2={fmt(hd.c2)}, h={fmt(p.h)})"
    ]
    header = ["n", "lambda_n", "E_prime"]
    if gamma_energies is not None:
        header += ["E_gamma", "error_over_h"]
    lines.append(",".join(header))
    rows = []
    for i in range(count):
        pred = hd.m0 + p.h * lam[i]
        row = [i + 1, lam[i], pred]
        if gamma_energies is not None:
            err = gamma_energies[i] - pred
            row += [gamma_energies[i], err / p.h]
        rows.append(row)
        lines.append(",".join(fmt(v) for v in row))
    text = "\n".join(lines)
    print(text)
    if out:
        write_csv(out, header, rows, cfg, extra={"m0": hd.m0, "c1": hd.c1, "c2": hd.c2})


def _read_first_bands_row(path, count):
    with open(path, encoding="utf-8") as fh:
        rows = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    header = rows[0].split(",")
    first = rows[1].split(",")
    take = [i for i, name in enumerate(header) if name.startswith("E")]
    if len(take) < count:
        raise ConfigError(
            f"bands file has {len(take)} band columns, need {count}"
        )
    return [float(first[i]) for i in take[:count]]


def _cmd_wells(cfg, out, workers):
    p = cfg.params
    audit = wells_audit(p, grid_n=cfg.values["grid_n"])
    write_json(
        out,
        {
            "assumption1_holds": audit.assumption1_holds,
            "gap_ok": audit.gap_ok,
            "minima": [
                {
                    "location": list(m.location),
                    "fractional": list(m.fractional),
                    "value": m.value,
                    "hessian": [list(r) for r in m.hessian],
                }
                for m in audit.minima
            ],
        },
        cfg,
    )


def _cmd_well(cfg, out, workers):
    v = cfg.values
    wp = WellProblem(
        cfg.params, L=v["L"], n=v["n"], delta1=v["delta1"], delta2=v["delta2"]
    )
    energies = well_eigs(wp, nev=v["nev"])
    # residual check by explicit matvec against the assembled operator
    A = assemble_well(wp)
    residuals = _arpack_residuals(A, wp, v["nev"])
    write_json(
        out,
        {
            "h": cfg.params.h,
            "E": list(energies),
            "residuals": residuals,
            "grid": {"L": v["L"], "n": v["n"]},
        },
        cfg,
    )


def _arpack_residuals(A, wp, nev):
    import scipy.sparse as sp
    from scipy.sparse.linalg import LinearOperator, eigsh, splu

    from .singlewell import _potential_floor

    sigma = _potential_floor(wp) - 0.3
    N = A.shape[0]
    lu = splu((A - sigma * sp.identity(N, format="csc")).tocsc(),
              permc_spec="MMD_AT_PLUS_A")
    op = LinearOperator((N, N), matvec=lu.solve, dtype=complex)
    v0 = np.full(N, 1.0 / np.sqrt(N))
    vals, vecs = eigsh(A, k=nev, sigma=sigma, which="LM", OPinv=op, v0=v0, tol=1e-9)
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    res = np.linalg.norm(A @ vecs - vecs * vals[None, :], axis=0)
    return [float(r) for r in res]


def _cmd_fourier_check(cfg, out, workers):
    p = cfg.params
    lat = build_lattice()
    table = fourier_table(p, lat)
    rng = np.random.default_rng(cfg.values["seed"])
    x = rng.uniform(-2.0, 2.0, size=(cfg.values["n_random"], 2))
    recon_err = float(np.abs(table.reconstruct(x) - assemble_V(x, p)).max())
    herm_err = 0.0
    for key, block in table.entries.items():
        mirror = table.entries.get((-key[0], -key[1]))
        if mirror is None:
            herm_err = np.inf
            break
        herm_err = max(herm_err, float(np.abs(mirror - block.conj().T).max()))
    n = cfg.values["fft_n"]
    s = np.arange(n) / n
    S, T = np.meshgrid(s, s, indexing="ij")
    X = np.stack(
        [S * lat.v1[0] + T * lat.v2[0], S * lat.v1[1] + T * lat.v2[1]], axis=-1
    )
    samples = assemble_V(X, p)
    coeffs = np.fft.fft2(samples, axes=(0, 1)) / n**2
    fft_err = 0.0
    for m in range(n):
        for nn in range(n):
            block = table.entries.get(
                (m if m <= n // 2 else m - n, nn if nn <= n // 2 else nn - n)
            )
            ref = block if block is not None else 0.0
            fft_err = max(fft_err, float(np.abs(coeffs[m, nn] - ref).max()))
    write_json(
        out,
        {
            "max_reconstruction_error": recon_err,
            "max_hermitian_defect": herm_err,
            "max_fft_mismatch": fft_err,
            "n_entries": len(table.entries),
        },
        cfg,
    )


_RUNNERS = {
    "landscape": _cmd_landscape,
    "bands": _cmd_bands,
    "chern": _cmd_chern,
    "agmon": _cmd_agmon,
    "scan": _cmd_scan,
    "harmonic": _cmd_harmonic,
    "wells": _cmd_wells,
    "well": _cmd_well,
    "fourier-check": _cmd_fourier_check,
}

_DEFAULT_EXT = {
    "landscape": "csv",
    "bands": "csv",
    "chern": "json",
    "agmon": "json",
    "scan": "csv",
    "harmonic": "csv",
    "wells": "json",
    "well": "json",
    "fourier-check": "json",
}


def run(command: str, cfg: RunConfig, out: str | None = None, workers: int = 1) -> int:
    """Execute a validated config; returns the process exit code."""
    out = out or f"{command}.{_DEFAULT_EXT[command]}"
    try:
        _RUNNERS[command](cfg, out, workers)
    except (ConfigError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (GapClosureError, RuntimeError, np.linalg.LinAlgError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="moire-bands",
        description="Band structure, topology and tunneling diagnostics "
        "for the twisted-TMD continuum model.",
    )
    parser.add_argument("command", choices=COMMANDS)
    src = parser.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="path to a JSON config file")
    src.add_argument(
        "--preset",
        choices=sorted(PRESETS),
        help="named figure-class parameter preset",
    )
    parser.add_argument("--out", help="output artifact path")
    parser.add_argument(
        "--workers",
        type=int,
        default=None,
        help="parallel workers for k/h sweeps "
        "(default: MOIRE_BANDS_WORKERS or 1)",
    )
    args = parser.parse_args(argv)

    if args.workers is not None:
        workers = args.workers
    else:
        workers = int(os.environ.get("MOIRE_BANDS_WORKERS", "1"))
    if workers < 1:
        print("error: workers must be >= 1", file=sys.stderr)
        return 2

    try:
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        else:
            text = json.dumps(PRESETS[args.preset])
        cfg = parse_config(text, args.command)
    except OSError as err:
        print(f"error: cannot read config: {err}", file=sys.stderr)
        return 2
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2

    return run(args.command, cfg, out=args.out, workers=workers)


if __name__ == "__main__":
    sys.exit(main())
