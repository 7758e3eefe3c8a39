"""Command-line front end.

Subcommands: ``weak-values``, ``scan``, ``table1`` and ``analyze``. Exit codes
are a stable contract: 0 success, 2 config, 3 unknown scenario, 4 pipeline,
5 input parse, 6 degenerate fit.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path as FsPath

import numpy as np

from .beamline import Path, path_projector, postselected_state, preselected_state
from .experiment import (
    ESTIMATE_KEYS,
    SCENARIO_LABELS,
    FitDegenerate,
    FitResult,
    Interferogram,
    UnknownScenario,
    WeakValueEstimate,
    default_chi_grid,
    extract_population,
    extract_spin,
    fit_interferogram,
    make_scenario,
    run_cheshire_experiment,
    scan,
)
from .hilbert import ID2, SIGMA_Z, tensor
from .stochastics import Quantity, aggregate
from .weakvalue import OrthogonalSelection, cheshire_weak_values, predicted_table, product_rule_gap

SCHEMA_VERSION = 1
CSV_HEADER = ("chi_rad", "o_counts", "h_counts", "dwell_s")

EXIT_OK, EXIT_CONFIG, EXIT_SCENARIO, EXIT_PIPELINE, EXIT_PARSE, EXIT_FIT = 0, 2, 3, 4, 5, 6

# published table values (value, 1-sigma), kept for side-by-side output
REPORTED = {
    "Pi_I": (0.139, 0.041),
    "Pi_II": (0.960, 0.058),
    "sz_Pi_I": (0.999, 0.252),
    "sz_Pi_II": (0.172, 0.223),
}
ROW_LABELS = {
    "Pi_I": "<Pi_I>_w",
    "Pi_II": "<Pi_II>_w",
    "sz_Pi_I": "|<sz Pi_I>_w|^2",
    "sz_Pi_II": "|<sz Pi_II>_w|^2",
}


class ConfigError(ValueError):
    pass


class CsvFormatError(ValueError):
    def __init__(self, path, line: int, msg: str):
        super().__init__(f"{path}:{line}: {msg}")
        self.line = line


# -- config ------------------------------------------------------------------


@dataclass
class RunConfig:
    T: float = 0.79
    sigma_T: float = 0.01
    alpha_deg: float = 20.0
    flux: float = 45.0
    dwell: float = 555.6  # s/point; gives sigma(I_REF) = 0.05 cps on the default grid
    chi_points: int = 25
    chi_span: float = 2 * math.pi
    mode: str = "analytic"
    seed: int = 0
    repetitions: int = 1
    output_dir: str = "out"

    @property
    def alpha(self) -> float:
        return math.radians(self.alpha_deg)

    @property
    def chi_grid(self) -> np.ndarray:
        return default_chi_grid(self.chi_points, self.chi_span)

    def validate(self) -> RunConfig:
        def num(name, x):
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                raise ConfigError(f"{name} must be a finite number, got {x!r}")
            return float(x)

        def integer(name, x, lo):
            if isinstance(x, bool) or not isinstance(x, int) or x < lo:
                raise ConfigError(f"{name} must be an integer >= {lo}, got {x!r}")
            return x

        self.T = num("T", self.T)
        self.sigma_T = num("T.sigma", self.sigma_T)
        if not 0 < self.T < 1:
            raise ConfigError(f"T must lie in (0, 1), got {self.T}")
        if self.sigma_T < 0:
            raise ConfigError("T sigma must be non-negative")
        self.alpha_deg = num("alpha_deg", self.alpha_deg)
        if self.alpha_deg == 0:
            raise ConfigError("alpha_deg must be non-zero")
        self.flux = num("flux", self.flux)
        self.dwell = num("dwell", self.dwell)
        self.chi_span = num("chi_span", self.chi_span)
        if self.flux <= 0 or self.dwell <= 0 or self.chi_span <= 0:
            raise ConfigError("flux, dwell and chi_span must be positive")
        integer("chi_points", self.chi_points, 4)
        integer("repetitions", self.repetitions, 1)
        integer("seed", self.seed, 0)
        if self.seed >= 2**64:
            raise ConfigError("seed must fit in 64 bits")
        if self.mode not in ("analytic", "stochastic"):
            raise ConfigError(f"mode must be 'analytic' or 'stochastic', got {self.mode!r}")
        if not isinstance(self.output_dir, str) or not self.output_dir:
            raise ConfigError("output_dir must be a non-empty string")
        return self

    def to_json(self) -> dict:
        d = asdict(self)
        d["T"] = {"value": d.pop("T"), "sigma": d.pop("sigma_T")}
        return d


_CONFIG_KEYS = {"T", "alpha_deg", "flux", "dwell", "chi_points", "chi_span", "mode", "seed", "repetitions", "output_dir"}


def load_config(path: str | None) -> RunConfig:
    """Read a JSON config; missing keys keep their defaults, unknown keys are rejected.

    ``T`` is either a number (no calibration uncertainty) or
    ``{"value": ..., "sigma": ...}``.
    """
    cfg = RunConfig()
    if path is None:
        return cfg.validate()
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key, value in raw.items():
        if key == "T":
            if isinstance(value, dict):
                extra = set(value) - {"value", "sigma"}
                if extra or "value" not in value:
                    raise ConfigError("T must be a number or {\"value\": .., \"sigma\": ..}")
                cfg.T = value["value"]
                cfg.sigma_T = value.get("sigma", 0.0)
            else:
                cfg.T, cfg.sigma_T = value, 0.0
        else:
            setattr(cfg, key, value)
    return cfg.validate()


# -- output helpers ----------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, NaN/inf to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, Path):
        return obj.value
    return obj


def write_atomic(path: FsPath, text: str) -> None:
    path = FsPath(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: FsPath, payload: dict) -> None:
    body = {"schema_version": SCHEMA_VERSION, **payload}
    write_atomic(path, json.dumps(_clean(body), indent=2) + "\n")


def _fmt_number(x: float) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() and abs(x) < 2**53 else repr(x)


def interferogram_to_csv(g: Interferogram) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in zip(g.chi, g.o_counts, g.h_counts, g.dwell):
        w.writerow([repr(float(row[0]))] + [_fmt_number(v) for v in row[1:]])
    return buf.getvalue()


def read_interferogram_csv(path, label: str = "") -> Interferogram:
    """Parse a scan CSV; raises :class:`CsvFormatError` with the offending line."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise CsvFormatError(path, 0, str(exc)) from exc
    if not rows or tuple(c.strip() for c in rows[0]) != CSV_HEADER:
        raise CsvFormatError(path, 1, f"header must be {','.join(CSV_HEADER)}")
    cols: list[list[float]] = [[], [], [], []]
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 4:
            raise CsvFormatError(path, lineno, f"expected 4 fields, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError:
            raise CsvFormatError(path, lineno, f"non-numeric field in {row!r}") from None
        if not all(math.isfinite(v) for v in vals):
            raise CsvFormatError(path, lineno, "non-finite value")
        if vals[1] < 0 or vals[2] < 0:
            raise CsvFormatError(path, lineno, "negative counts")
        if vals[3] <= 0:
            raise CsvFormatError(path, lineno, "dwell must be positive")
        if cols[0] and vals[0] <= cols[0][-1]:
            raise CsvFormatError(path, lineno, "chi values must be strictly increasing")
        for c, v in zip(cols, vals):
            c.append(v)
    if not cols[0]:
        raise CsvFormatError(path, len(rows), "no data rows")
    return Interferogram(*cols, label=label)


def fit_to_json(fit: FitResult) -> dict:
    return {
        "mean": fit.mean,
        "sigma_mean": fit.sigma_mean,
        "contrast": fit.contrast,
        "sigma_contrast": fit.sigma_contrast,
        "phase": fit.phase,
        "sigma_phase": fit.sigma_phase,
        "intensity_at_zero": fit.intensity_at_zero,
        "sigma_intensity_at_zero": fit.sigma_intensity_at_zero,
        "chi2": fit.chi2,
        "ndof": fit.ndof,
    }


def estimate_to_json(e: WeakValueEstimate) -> dict:
    return {"value": e.value, "sigma": e.sigma, "method": e.method, "path": e.path.value}


def _print_table(rows: dict[str, WeakValueEstimate], theory: dict[str, float], out=None) -> None:
    out = out or sys.stdout

    def cell(key):
        e = rows[key]
        return f"{e.value:.3f} +/- {e.sigma:.3f}"

    def th(key):
        return f"{round(theory[key], 12) + 0.0:.3f}"

    print(f"{'':18s}{'Path I':>20s}{'Path II':>20s}", file=out)
    for name, a, b in (("<Pi_j>_w", "Pi_I", "Pi_II"), ("|<sz Pi_j>_w|^2", "sz_Pi_I", "sz_Pi_II")):
        print(f"{name:18s}{cell(a):>20s}{cell(b):>20s}", file=out)
        print(f"{'  theory':18s}{th(a):>20s}{th(b):>20s}", file=out)


# -- commands ----------------------------------------------------------------


def cmd_weak_values(cfg: RunConfig, out_dir: FsPath, post_chi: float = 0.0) -> int:
    wv = cheshire_weak_values(post_chi)
    pre, post = preselected_state(), postselected_state(post_chi)
    gap = product_rule_gap(pre, post, tensor(SIGMA_Z, ID2, label="sz"), path_projector("II"))
    print(f"weak values for psi_f(chi={post_chi:g})")
    print(f"{'observable':12s}{'Re':>12s}{'Im':>12s}{'|.|^2':>12s}")
    for key, w in wv.items():
        print(f"{key:12s}{w.real:12.6f}{w.imag:12.6f}{w.abs2:12.6f}")
    print(f"product-rule gap <sz Pi_II>_w - <sz>_w<Pi_II>_w = {gap.real:.6f}{gap.imag:+.6f}i")
    write_json(
        out_dir / "weak_values.json",
        {
            "post_chi": post_chi,
            "weak_values": {k: {"re": w.real, "im": w.imag, "abs2": w.abs2} for k, w in wv.items()},
            "product_rule_gap": {"A": "sz", "B": "Pi_II", "re": gap.real, "im": gap.imag},
            "theory": dict(predicted_table(post_chi)),
        },
    )
    return EXIT_OK


def cmd_scan(cfg: RunConfig, out_dir: FsPath, label: str) -> int:
    scenario = make_scenario(label, cfg.T, cfg.alpha)
    g = scan(
        scenario, cfg.chi_grid, cfg.flux, cfg.dwell, cfg.mode, seed=cfg.seed, stream_name=f"{label}/rep0"
    )
    fits = {port: fit_to_json(fit_interferogram(g, port)) for port in ("O", "H")}
    write_atomic(out_dir / f"scan_{label}.csv", interferogram_to_csv(g))
    write_json(
        out_dir / f"fit_{label}.json",
        {"scenario": label, "mode": cfg.mode, "seed": cfg.seed, "config": cfg.to_json(), "fits": fits},
    )
    o = fits["O"]
    print(
        f"{label}: O-port I(chi=0) = {o['intensity_at_zero']:.4f} +/- {o['sigma_intensity_at_zero']:.4f} cps, "
        f"contrast {o['contrast']:.4f}"
    )
    return EXIT_OK


def cmd_table1(cfg: RunConfig, out_dir: FsPath) -> int:
    results = [
        run_cheshire_experiment(
            T=(cfg.T, cfg.sigma_T),
            alpha=cfg.alpha,
            flux=cfg.flux,
            dwell=cfg.dwell,
            chi_grid=cfg.chi_grid,
            mode=cfg.mode,
            seed=cfg.seed,
            repetition=r,
        )
        for r in range(cfg.repetitions)
    ]
    estimates = {k: aggregate([res.estimates[k] for res in results]) for k in ESTIMATE_KEYS}
    intensities = {
        lab: aggregate([_IntensityRun(*res.fits[lab].intensity) for res in results])
        for lab in SCENARIO_LABELS
    }
    theory = dict(zip(ESTIMATE_KEYS, (v for _, v in results[0].theory)))
    rows = []
    for k in ESTIMATE_KEYS:
        e = estimates[k]
        rows.append(
            {
                "key": k,
                "observable": ROW_LABELS[k],
                **estimate_to_json(e),
                "theory": theory[k],
                "truncation_residue": results[0].truncation_residue[k],
                "imag_dropped": results[0].imag_dropped[k],
                "reported": {"value": REPORTED[k][0], "sigma": REPORTED[k][1]},
            }
        )
    write_json(
        out_dir / "table1.json",
        {
            "mode": cfg.mode,
            "seed": cfg.seed,
            "repetitions": cfg.repetitions,
            "config": cfg.to_json(),
            "intensities_at_zero": {
                lab: {"value": q.value, "sigma": q.sigma} for lab, q in intensities.items()
            },
            "rows": rows,
        },
    )
    _print_table(estimates, theory)
    print("truncation residue (noise-free extraction - theory): " + ", ".join(
        f"{k}={results[0].truncation_residue[k]:+.4f}" for k in ESTIMATE_KEYS
    ))
    return EXIT_OK


@dataclass(frozen=True)
class _IntensityRun:
    value: float
    sigma: float
    method: str = "FIT"
    path: str = ""


_LABEL_RE = re.compile(r"(ABS_II|ABS_I|MAG_II|MAG_I|REF)")


def _label_from_name(path: str) -> str | None:
    m = _LABEL_RE.search(FsPath(path).stem)
    return m.group(1) if m else None


def cmd_analyze(cfg: RunConfig, out_dir: FsPath, files: list[str], ref: str, scenario: str | None) -> int:
    if scenario is not None and len(files) != 1:
        raise ConfigError("--scenario can only label a single file")
    labels = []
    for f in files:
        label = scenario or _label_from_name(f)
        if label is None or label == "REF":
            raise UnknownScenario(f"cannot determine a probe scenario for {f}; use --scenario")
        make_scenario(label)  # validates the label
        labels.append(label)

    ref_fit = fit_interferogram(read_interferogram_csv(ref, "REF"), "O")
    i_ref = ref_fit.intensity
    T = Quantity(cfg.T, cfg.sigma_T)
    report = {"T": {"value": cfg.T, "sigma": cfg.sigma_T}, "alpha_deg": cfg.alpha_deg,
              "reference": {"file": str(ref), "fit": fit_to_json(ref_fit)}, "measurements": []}
    for f, label in zip(files, labels):
        fit = fit_interferogram(read_interferogram_csv(f, label), "O")
        path = Path(label.split("_")[1])
        if label.startswith("ABS"):
            est = extract_population(i_ref, fit.intensity, T, path)
        else:
            est = extract_spin(i_ref, fit.intensity, cfg.alpha, path)
        report["measurements"].append(
            {"file": str(f), "scenario": label, "fit": fit_to_json(fit), "estimate": estimate_to_json(est)}
        )
        print(f"{label}: I(chi=0) = {fit.intensity_at_zero:.4f} -> {est.method} path {path.value}: "
              f"{est.value:.3f} +/- {est.sigma:.3f}")
    write_json(out_dir / "analysis.json", report)
    return EXIT_OK


# -- entry point -------------------------------------------------------------


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=_seed, help="override the config seed")
    common.add_argument("--out", help="output directory (overrides output_dir)")

    ap = argparse.ArgumentParser(prog="cheshire", description="Quantum Cheshire Cat interferometer simulator")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("weak-values", parents=[common], help="theoretical weak values")
    p.add_argument("--post-chi", type=float, default=0.0, help="postselection phase in radians")
    p = sub.add_parser("scan", parents=[common], help="simulate one phase-shifter scan")
    p.add_argument("--scenario", required=True, help="one of " + ", ".join(SCENARIO_LABELS))
    sub.add_parser("table1", parents=[common], help="full five-scenario pipeline")
    p = sub.add_parser("analyze", parents=[common], help="re-analyze scan CSV files")
    p.add_argument("files", nargs="+", help="probe scans (label taken from the file name or --scenario)")
    p.add_argument("--ref", required=True, help="reference scan CSV")
    p.add_argument("--scenario", help="label for a single probe file")
    p.add_argument("--T", dest="T", type=float, help="absorber transmissivity (overrides config)")
    p.add_argument("--alpha-deg", type=float, help="spin rotation in degrees (overrides config)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if getattr(args, "T", None) is not None:
            cfg.T = args.T
        if getattr(args, "alpha_deg", None) is not None:
            cfg.alpha_deg = args.alpha_deg
        cfg.validate()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = FsPath(args.out or cfg.output_dir)

    try:
        if args.command == "weak-values":
            return cmd_weak_values(cfg, out_dir, args.post_chi)
        if args.command == "scan":
            return cmd_scan(cfg, out_dir, args.scenario)
        if args.command == "table1":
            return cmd_table1(cfg, out_dir)
        return cmd_analyze(cfg, out_dir, args.files, args.ref, args.scenario)
    except UnknownScenario as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except CsvFormatError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FitDegenerate as exc:
        print(f"degenerate fit: {exc}", file=sys.stderr)
        return EXIT_FIT if args.command == "analyze" else EXIT_PIPELINE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OrthogonalSelection, ArithmeticError) as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
