"""The five measurement configurations, detector rates, fringe fits and
weak-value extraction.

Rates are computed exactly from the state simulation. Extraction deliberately
uses the first-order formulas (absorber: ``I/I_ref = 1 - 2M<Pi_j>_w``;
Larmor: ``I/I_ref = 1 + (alpha^2/4)|<sz Pi_I>_w|^2`` and
``1 - alpha^2/4 + (alpha^2/4)|<sz Pi_II>_w|^2``), so analytic runs show a
small, reported truncation residue relative to the exact weak values.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import atan2, hypot, pi, sqrt
from typing import Sequence

import numpy as np

from .beamline import Absorber, ElementSpec, Larmor, Path, compose, postselected_state, preselected_state
from .hilbert import SpinPathState, apply, inner
from .stochastics import Quantity, as_quantity, draw_poisson, make_stream, propagate
from .weakvalue import cheshire_weak_values, predicted_table

SCENARIO_LABELS = ("REF", "ABS_I", "ABS_II", "MAG_I", "MAG_II")
ESTIMATE_KEYS = ("Pi_I", "Pi_II", "sz_Pi_I", "sz_Pi_II")
DEFAULT_FLUX = 45.0  # puts the reference O-rate at 11.25 counts/s
DEFAULT_T = 0.79
DEFAULT_ALPHA = np.deg2rad(20.0)


class UnknownScenario(ValueError):
    pass


class FitDegenerate(ValueError):
    """The interferogram cannot constrain the fringe model."""


@dataclass(frozen=True)
class Scenario:
    label: str
    elements: tuple[ElementSpec, ...] = ()
    T: float | None = None
    alpha: float | None = None

    def __post_init__(self):
        if self.label not in SCENARIO_LABELS:
            raise UnknownScenario(f"unknown scenario {self.label!r}; expected one of {SCENARIO_LABELS}")
        object.__setattr__(self, "elements", tuple(self.elements))
        if self.label == "REF":
            ok = not self.elements
        else:
            kind, path = self.label.split("_")
            cls = Absorber if kind == "ABS" else Larmor
            ok = (
                len(self.elements) == 1
                and isinstance(self.elements[0], cls)
                and self.elements[0].path is Path(path)
            )
        if not ok:
            raise ValueError(f"elements {self.elements!r} do not match scenario {self.label}")

    @property
    def path(self) -> Path | None:
        return None if self.label == "REF" else Path(self.label.split("_")[1])


def make_scenario(label: str, T: float = DEFAULT_T, alpha: float = DEFAULT_ALPHA) -> Scenario:
    if label == "REF":
        return Scenario("REF")
    if label in ("ABS_I", "ABS_II"):
        return Scenario(label, (Absorber(T, label[4:]),), T=T)
    if label in ("MAG_I", "MAG_II"):
        return Scenario(label, (Larmor(alpha, label[4:]),), alpha=alpha)
    raise UnknownScenario(f"unknown scenario {label!r}; expected one of {SCENARIO_LABELS}")


# -- detector rates ----------------------------------------------------------


def _evolved(scenario: Scenario) -> SpinPathState:
    return apply(compose(scenario.elements), preselected_state())


def _h_path_bra(chi: float) -> np.ndarray:
    # conjugate of (|I> - exp(-i chi)|II>)/sqrt(2): the path state orthogonal to the O port
    return np.array([1.0, -np.exp(1j * chi)]) / sqrt(2)


def _o_path_bra(chi: float) -> np.ndarray:
    return np.array([1.0, np.exp(1j * chi)]) / sqrt(2)


def _port_spin_amplitudes(psi: SpinPathState, path_bra: np.ndarray) -> np.ndarray:
    # amp is indexed [path, spin]; contract the path index only
    return path_bra @ psi.amp.reshape(2, 2)


def _check_flux(flux: float) -> float:
    flux = float(flux)
    if not flux > 0:
        raise ValueError(f"flux must be positive, got {flux!r}")
    return flux


def o_port_rate(scenario: Scenario, chi: float, flux: float = DEFAULT_FLUX) -> float:
    """Spin-analyzed (postselected) O-detector rate."""
    flux = _check_flux(flux)
    return flux * abs(inner(postselected_state(chi), _evolved(scenario))) ** 2


def o_port_rate_unanalyzed(scenario: Scenario, chi: float, flux: float = DEFAULT_FLUX) -> float:
    """O-detector rate if the spin analyzer were removed."""
    flux = _check_flux(flux)
    amps = _port_spin_amplitudes(_evolved(scenario), _o_path_bra(chi))
    return flux * float(np.sum(np.abs(amps) ** 2))


def h_port_rate(scenario: Scenario, chi: float, flux: float = DEFAULT_FLUX) -> float:
    """H-detector rate; no spin analysis, so both spin components count."""
    flux = _check_flux(flux)
    amps = _port_spin_amplitudes(_evolved(scenario), _h_path_bra(chi))
    return flux * float(np.sum(np.abs(amps) ** 2))


@dataclass(frozen=True)
class PortIntensity:
    O: float
    H: float
    chi: float


def port_intensity(scenario: Scenario, chi: float, flux: float = DEFAULT_FLUX) -> PortIntensity:
    return PortIntensity(o_port_rate(scenario, chi, flux), h_port_rate(scenario, chi, flux), float(chi))


# -- interferograms ----------------------------------------------------------


@dataclass(frozen=True)
class Interferogram:
    chi: np.ndarray
    o_counts: np.ndarray
    h_counts: np.ndarray
    dwell: np.ndarray
    flux_calibration: float | None = None
    label: str = ""

    def __post_init__(self):
        arrays = {}
        for name in ("chi", "o_counts", "h_counts", "dwell"):
            a = np.array(getattr(self, name), dtype=float).reshape(-1)
            a.setflags(write=False)
            arrays[name] = a
            object.__setattr__(self, name, a)
        n = len(arrays["chi"])
        if n == 0 or any(len(a) != n for a in arrays.values()):
            raise ValueError("interferogram columns must be non-empty and of equal length")
        if not np.all(np.isfinite(np.concatenate(list(arrays.values())))):
            raise ValueError("interferogram values must be finite")
        if np.any(np.diff(arrays["chi"]) <= 0):
            raise ValueError("chi values must be strictly increasing")
        if np.any(arrays["o_counts"] < 0) or np.any(arrays["h_counts"] < 0):
            raise ValueError("counts must be non-negative")
        if np.any(arrays["dwell"] <= 0):
            raise ValueError("dwell times must be positive")

    def __len__(self) -> int:
        return len(self.chi)

    def counts(self, port: str) -> np.ndarray:
        if port == "O":
            return self.o_counts
        if port == "H":
            return self.h_counts
        raise ValueError(f"port must be 'O' or 'H', got {port!r}")


def default_chi_grid(points: int = 25, span: float = 2 * pi) -> np.ndarray:
    if points < 1:
        raise ValueError("need at least one grid point")
    return np.linspace(-span / 2, span / 2, int(points))


def scan(
    scenario: Scenario,
    chi_grid: Sequence[float],
    flux: float = DEFAULT_FLUX,
    dwell: float = 1.0,
    mode: str = "analytic",
    seed: int | None = None,
    stream_name: str | None = None,
) -> Interferogram:
    """Phase-shifter scan of one scenario.

    ``mode="analytic"`` stores the expected counts ``rate * dwell``;
    ``mode="stochastic"`` draws Poisson counts from a stream keyed by
    ``(seed, stream_name)`` (default name: the scenario label), drawing the
    O count and then the H count at each grid point.
    """
    chi_grid = np.asarray(chi_grid, dtype=float).reshape(-1)
    if chi_grid.size == 0:
        raise ValueError("chi grid must not be empty")
    dwell = float(dwell)
    if not dwell > 0:
        raise ValueError(f"dwell must be positive, got {dwell!r}")
    o_mean = np.array([o_port_rate(scenario, c, flux) for c in chi_grid]) * dwell
    h_mean = np.array([h_port_rate(scenario, c, flux) for c in chi_grid]) * dwell
    if mode == "analytic":
        o, h = o_mean, h_mean
    elif mode == "stochastic":
        if seed is None:
            raise ValueError("stochastic mode needs a seed")
        stream = make_stream(seed, stream_name or scenario.label)
        o = np.empty_like(o_mean)
        h = np.empty_like(h_mean)
        for k in range(len(chi_grid)):
            o[k] = draw_poisson(o_mean[k], stream)
            h[k] = draw_poisson(h_mean[k], stream)
    else:
        raise ValueError(f"mode must be 'analytic' or 'stochastic', got {mode!r}")
    return Interferogram(
        chi_grid, o, h, np.full(chi_grid.shape, dwell), flux_calibration=float(flux), label=scenario.label
    )


def reference_dwell(
    rel_sigma: float, flux: float = DEFAULT_FLUX, chi_grid: Sequence[float] | None = None
) -> float:
    """Dwell per point at which the fitted reference intensity has relative
    1-sigma ``rel_sigma`` (expected Poisson errors, single-harmonic fit)."""
    chi_grid = default_chi_grid() if chi_grid is None else chi_grid
    fit = fit_interferogram(scan(make_scenario("REF"), chi_grid, flux, dwell=1.0), "O")
    return (fit.sigma_intensity_at_zero / fit.intensity_at_zero / rel_sigma) ** 2


# -- fringe fit --------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    """Single-harmonic fit ``rate(chi) = mean * (1 + contrast * cos(chi + phase))``.

    ``cov`` is the covariance of ``(mean, contrast, phase)``. Entries that
    involve the phase are NaN when the fitted contrast is exactly zero.
    """

    mean: float
    contrast: float
    phase: float
    intensity_at_zero: float
    sigma_intensity_at_zero: float
    cov: np.ndarray
    chi2: float
    ndof: int

    @property
    def sigma_mean(self) -> float:
        return sqrt(self.cov[0, 0])

    @property
    def sigma_contrast(self) -> float:
        return sqrt(self.cov[1, 1]) if np.isfinite(self.cov[1, 1]) else float("nan")

    @property
    def sigma_phase(self) -> float:
        return sqrt(self.cov[2, 2]) if np.isfinite(self.cov[2, 2]) else float("nan")

    def rate(self, chi) -> np.ndarray:
        return self.mean * (1 + self.contrast * np.cos(np.asarray(chi) + self.phase))

    @property
    def intensity(self) -> Quantity:
        return Quantity(self.intensity_at_zero, self.sigma_intensity_at_zero)


def fit_interferogram(g: Interferogram, port: str = "O") -> FitResult:
    """Poisson-weighted least-squares fit of one port's fringe.

    The model is linear in ``(a, b, d)`` for ``a + b cos(chi) + d sin(chi)``,
    so it is solved exactly from the normal equations and then mapped to
    (mean, contrast, phase) with its Jacobian. Rates are ``counts / dwell``
    with variance ``max(counts, 1) / dwell^2``.
    """
    counts = g.counts(port)
    if len(g) < 4:
        raise FitDegenerate(f"need at least 4 samples, got {len(g)}")
    if g.chi[-1] - g.chi[0] < pi:
        raise FitDegenerate("chi samples span less than half a fringe period")
    y = counts / g.dwell
    var = np.maximum(counts, 1.0) / g.dwell**2
    X = np.column_stack([np.ones_like(g.chi), np.cos(g.chi), np.sin(g.chi)])
    w = 1.0 / var
    A = X.T @ (w[:, None] * X)
    rhs = X.T @ (w * y)
    if np.linalg.cond(A) > 1e12:
        raise FitDegenerate("normal equations are singular")
    cov_lin = np.linalg.inv(A)
    a, b, d = cov_lin @ rhs
    if not a > 0:
        raise FitDegenerate(f"fitted mean rate {a!r} is not positive")

    amp = hypot(b, d)
    contrast = amp / a
    phase = atan2(-d, b) if amp > 0 else 0.0
    J = np.zeros((3, 3))
    J[0] = (1.0, 0.0, 0.0)
    if amp > 0:
        J[1] = (-amp / a**2, b / (a * amp), d / (a * amp))
        J[2] = (0.0, d / amp**2, -b / amp**2)
    else:
        J[1:] = np.nan
    cov = J @ cov_lin @ J.T

    resid = y - X @ np.array([a, b, d])
    i0 = a + b
    var_i0 = cov_lin[0, 0] + cov_lin[1, 1] + 2 * cov_lin[0, 1]
    return FitResult(
        mean=float(a),
        contrast=float(contrast),
        phase=float(phase),
        intensity_at_zero=float(i0),
        sigma_intensity_at_zero=float(sqrt(max(var_i0, 0.0))),
        cov=cov,
        chi2=float(np.sum(w * resid**2)),
        ndof=len(g) - 3,
    )


# -- extraction --------------------------------------------------------------


@dataclass(frozen=True)
class WeakValueEstimate:
    """Extracted weak value with propagated 1-sigma.

    ``method="ABS"`` estimates Re<Pi_j>_w, ``method="MAG"`` estimates
    |<sigma_z Pi_j>_w|^2.
    """

    value: float
    sigma: float
    method: str
    path: Path

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError("sigma must be non-negative")
        if self.method not in ("ABS", "MAG"):
            raise ValueError(f"method must be 'ABS' or 'MAG', got {self.method!r}")
        object.__setattr__(self, "path", Path(self.path) if not isinstance(self.path, Path) else self.path)


def _population(i_ref, i_abs, T):
    return (1 - i_abs / i_ref) / (2 * (1 - sqrt(T)))


def extract_population(i_ref, i_abs, T, path=Path.I) -> WeakValueEstimate:
    """Re<Pi_j>_w from the absorber/reference intensity ratio.

    Each of ``i_ref``, ``i_abs`` and ``T`` is a float or ``(value, sigma)``.
    """
    i_ref, i_abs, T = as_quantity(i_ref), as_quantity(i_abs), as_quantity(T)
    if not i_ref.value > 0:
        raise ValueError("reference intensity must be positive")
    if T.value == 1:
        raise ValueError("T = 1: the absorber carries no information")
    if not 0 < T.value < 1:
        raise ValueError(f"transmissivity must lie in (0, 1), got {T.value!r}")
    q = propagate(_population, [i_ref, i_abs, T])
    return WeakValueEstimate(q.value, q.sigma, "ABS", path)


def extract_spin(i_ref, i_mag, alpha: float, path=Path.I) -> WeakValueEstimate:
    """|<sigma_z Pi_j>_w|^2 from the Larmor/reference intensity ratio."""
    i_ref, i_mag = as_quantity(i_ref), as_quantity(i_mag)
    path = Path(path) if not isinstance(path, Path) else path
    alpha = float(alpha)
    if not i_ref.value > 0:
        raise ValueError("reference intensity must be positive")
    if alpha == 0:
        raise ValueError("alpha = 0: no spin coupling")
    k = alpha**2 / 4
    offset = 0.0 if path is Path.I else k

    def f(r, m):
        return (m / r - 1 + offset) / k

    q = propagate(f, [i_ref, i_mag])
    return WeakValueEstimate(q.value, q.sigma, "MAG", path)


def truncation_residue(T: float = DEFAULT_T, alpha: float = DEFAULT_ALPHA) -> dict[str, float]:
    """Noise-free extraction minus the exact theory value, per estimate."""
    rates = {lab: o_port_rate(make_scenario(lab, T, alpha), 0.0) for lab in SCENARIO_LABELS}
    ref = rates["REF"]
    est = {
        "Pi_I": _population(ref, rates["ABS_I"], T),
        "Pi_II": _population(ref, rates["ABS_II"], T),
        "sz_Pi_I": (rates["MAG_I"] / ref - 1) * 4 / alpha**2,
        "sz_Pi_II": (rates["MAG_II"] / ref - 1 + alpha**2 / 4) * 4 / alpha**2,
    }
    theory = dict(zip(ESTIMATE_KEYS, (v for _, v in predicted_table())))
    return {k: est[k] - theory[k] for k in ESTIMATE_KEYS}


# -- full pipeline -----------------------------------------------------------


@dataclass
class CheshireResult:
    interferograms: dict[str, Interferogram]
    fits: dict[str, FitResult]
    h_fits: dict[str, FitResult]
    estimates: dict[str, WeakValueEstimate]
    theory: list[tuple[str, float]]
    truncation_residue: dict[str, float]
    imag_dropped: dict[str, float] = field(default_factory=dict)


def run_cheshire_experiment(
    T=DEFAULT_T,
    alpha: float = DEFAULT_ALPHA,
    flux: float = DEFAULT_FLUX,
    dwell: float = 1.0,
    chi_grid: Sequence[float] | None = None,
    mode: str = "analytic",
    seed: int | None = None,
    repetition: int = 0,
    max_workers: int | None = None,
) -> CheshireResult:
    """Scan, fit and extract all four weak values.

    ``T`` may carry its calibration uncertainty as ``(value, sigma)``. In
    stochastic mode each scan uses its own stream named
    ``"<label>/rep<repetition>"``, so results do not depend on whether the
    scans run concurrently (``max_workers > 1``).
    """
    Tq = as_quantity(T)
    if not 0 < Tq.value < 1:
        raise ValueError(f"transmissivity must lie in (0, 1), got {Tq.value!r}")
    if float(alpha) == 0:
        raise ValueError("alpha = 0: no spin coupling")
    chi_grid = default_chi_grid() if chi_grid is None else np.asarray(chi_grid, dtype=float)
    scenarios = [make_scenario(lab, Tq.value, alpha) for lab in SCENARIO_LABELS]

    def one(sc: Scenario):
        g = scan(sc, chi_grid, flux, dwell, mode, seed, stream_name=f"{sc.label}/rep{repetition}")
        return g, fit_interferogram(g, "O"), fit_interferogram(g, "H")

    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            out = list(pool.map(one, scenarios))
    else:
        out = [one(sc) for sc in scenarios]
    grams = {sc.label: o[0] for sc, o in zip(scenarios, out)}
    fits = {sc.label: o[1] for sc, o in zip(scenarios, out)}
    h_fits = {sc.label: o[2] for sc, o in zip(scenarios, out)}

    ref = fits["REF"].intensity
    estimates = {
        "Pi_I": extract_population(ref, fits["ABS_I"].intensity, Tq, Path.I),
        "Pi_II": extract_population(ref, fits["ABS_II"].intensity, Tq, Path.II),
        "sz_Pi_I": extract_spin(ref, fits["MAG_I"].intensity, alpha, Path.I),
        "sz_Pi_II": extract_spin(ref, fits["MAG_II"].intensity, alpha, Path.II),
    }
    wv = cheshire_weak_values()
    return CheshireResult(
        interferograms=grams,
        fits=fits,
        h_fits=h_fits,
        estimates=estimates,
        theory=predicted_table(),
        truncation_residue=truncation_residue(Tq.value, alpha),
        imag_dropped={k: wv[k].imag for k in ESTIMATE_KEYS},
    )
