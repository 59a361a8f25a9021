"""
End-to-end inversion runs.

A run goes tail extrapolation → Padé fit → spectral decomposition →
Marchenko solve → potential → forward round trip → bound states → optical α,
and every stage failure is re-raised as StageError carrying the stage name.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from libs.scattering.errors import DomainError, SchemaError, StageError
from libs.scattering.forward import find_bound_states, phase_eq_coupled, phase_eq_single
from libs.scattering.marchenko1 import (
    default_grid,
    extract_potential,
    marchenko_residual,
    solve_output_kernel,
)
from libs.scattering.marchenko2 import (
    coupled_marchenko_residual,
    extract_coupled_potential,
    solve_coupled_kernel,
)
from libs.scattering.models import (
    BoundState,
    CoupledPotential,
    CoupledRationalSMatrix,
    OpticalScaling,
    ParityPolynomial,
    PhaseRecord,
    PoleTerm,
    RadialPotential,
    RationalSMatrix,
    SpectralData,
)
from libs.scattering.optical import (
    alpha_predict_coupled,
    alpha_predict_single,
    alpha_refine_single,
    jacobian_diagnostics,
)
from libs.scattering.smatrix import (
    bar_from_eigen,
    bar_phases_from_s,
    bound_state_term,
    check_admissible,
    coupled_bound_state_term,
    eigenphases_from_s,
    extrapolate_power_tail,
    extrapolate_tail,
    fit_pade_coupled,
    fit_pade_single,
    pairing_defect,
    select_pade_coupled,
    select_pade_single,
    spectral_decompose,
)
from marchenko_lab.config import Settings, load_settings
from marchenko_lab.kinematics import energy_to_kappa, fm2_to_mev, reduced_mass
from marchenko_lab.models import (
    BoundStateRow,
    ChannelConfig,
    PoleRow,
    ResidualRow,
    RunReport,
)

logger = logging.getLogger(__name__)

Potential = Union[RadialPotential, CoupledPotential]

# (kind, tolerance) per observable; "abs" in the observable's unit, "rel" as a fraction
REFERENCE_TOLERANCES: Dict[str, Tuple[str, float]] = {
    "energy": ("abs", 1e-3),
    "A_S": ("rel", 5e-3),
    "eta": ("rel", 1e-2),
    "rms_radius": ("rel", 1e-2),
    "quadrupole": ("rel", 2e-2),
}

LEVINSON_PROBE = 1e-3
RESIDUAL_PROBES = 3
KERNEL_DECAY = 1e-7


@contextmanager
def stage(name: str) -> Iterator[None]:
    """Label failures inside the block with the stage name."""
    logger.info("Stage: %s", name)
    try:
        yield
    except StageError:
        raise
    except Exception as e:
        logger.error("Stage '%s' failed: %s", name, e)
        raise StageError(name, e) from e


def wrap_pi(angle):
    """Map an angle difference into [−π/2, π/2)."""
    return (np.asarray(angle) + np.pi / 2) % np.pi - np.pi / 2


def _complex_json(value) -> Any:
    array = np.asarray(value, dtype=complex)
    if array.ndim == 0:
        return [float(array.real), float(array.imag)]
    return [_complex_json(v) for v in array]


def _coefficients(**polys: ParityPolynomial) -> Dict[str, List[float]]:
    return {name: list(poly.coefficients) for name, poly in polys.items()}


def _pole_rows(terms: Sequence[PoleTerm]) -> List[PoleRow]:
    return [
        PoleRow(beta_re=float(t.beta.real), beta_im=float(t.beta.imag), order=t.order,
                source=t.source, weight=_complex_json(t.weight))
        for t in terms
    ]


def _map(func: Callable, items: Sequence, threads: int) -> List:
    if threads <= 1 or len(items) < 2:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def resolve_q_max(config: ChannelConfig, records: Sequence[PhaseRecord], settings: Settings) -> float:
    """Fit range end: explicit q_max, else factor × largest data momentum."""
    q_data = max(rec.q for rec in records)
    if config.q_max is not None:
        q_max = config.q_max
    else:
        q_max = (config.qmax_factor or settings.default_qmax_factor) * q_data
    if q_max <= q_data:
        raise DomainError(f"Q_max={q_max:.6g} fm^-1 must exceed the largest data momentum {q_data:.6g}")
    return float(q_max)


def kernel_reach(spectrum: SpectralData) -> float:
    """Radius (fm) where the slowest S-matrix pole term has decayed to KERNEL_DECAY.

    Poles next to a bound-state momentum are skipped; their slow decay
    cancels against the bound-state term.
    """
    bound = [term.beta for term in spectrum.bound_states]
    kappas = [
        term.beta.imag for term in spectrum.poles
        if all(abs(term.beta - b) > 0.1 * abs(b) for b in bound)
    ]
    if not kappas:
        return 0.0
    return math.log(1.0 / KERNEL_DECAY) / (2.0 * min(kappas))


def _grid(
    config: ChannelConfig, settings: Settings, spectrum: Optional[SpectralData] = None
) -> np.ndarray:
    r_min = config.r_min or settings.r_min
    r_max = config.r_max or settings.r_max
    points = config.grid_points or settings.grid_points
    if spectrum is not None and settings.extend_grid:
        reach = min(kernel_reach(spectrum), settings.grid_reach * r_max)
        if reach > r_max:
            points = int(math.ceil(points * (reach - r_min) / (r_max - r_min)))
            logger.info("Radial grid extended from %.4g to %.4g fm (%d points)", r_max, reach, points)
            r_max = reach
    return default_grid(r_min, r_max, points)


def _grid_info(grid: np.ndarray) -> Dict[str, Any]:
    return {
        "r_min": float(grid[0]), "r_max": float(grid[-1]), "points": int(len(grid)),
        "units": "fm", "potential_units": "fm^-2 (2 mu V)",
    }


def _reference(config: ChannelConfig) -> Dict[str, float]:
    reference: Dict[str, float] = {}
    if config.bound_states:
        state = max(config.bound_states, key=lambda b: b.energy)
        reference = {"energy": state.energy, "A_S": state.A_S}
        if config.coupled:
            reference["eta"] = state.eta
    reference.update(config.reference_observables)
    return reference


def _check(observable: str, value: float, expected: float) -> bool:
    kind, tol = REFERENCE_TOLERANCES.get(observable, ("rel", 1e-2))
    if kind == "abs":
        return abs(value - expected) <= tol
    return abs(value - expected) <= tol * max(abs(expected), 1e-300)


def _bound_rows(states: Sequence[BoundState], config: ChannelConfig) -> List[BoundStateRow]:
    reference = _reference(config)
    target = None
    if states and reference.get("energy") is not None:
        target = min(states, key=lambda s: abs(s.energy - reference["energy"]))
    rows = []
    for state in states:
        checks = {}
        if state is target:
            for key, expected in reference.items():
                if not hasattr(state, key):
                    continue
                checks[key] = _check(key, float(getattr(state, key)), expected)
            failed = [k for k, ok in checks.items() if not ok]
            if failed:
                logger.warning("Bound state at %.5g MeV misses reference for %s",
                               state.energy, ", ".join(failed))
        rows.append(BoundStateRow(
            energy=state.energy, kappa=state.kappa, A_S=state.A_S, eta=state.eta,
            rms_radius=state.rms_radius, quadrupole=state.quadrupole,
            d_state_probability=state.d_state_probability, checks=checks,
        ))
    return rows


def _residual_points(grid: np.ndarray) -> List[Tuple[int, float]]:
    indices = np.linspace(0, len(grid) - 1, RESIDUAL_PROBES + 2).astype(int)[1:-1]
    return [(int(i), float(grid[i]) + 0.5) for i in indices]


# ---------------------------------------------------------------------------
# Fit stages
# ---------------------------------------------------------------------------


class FitResult(NamedTuple):
    """Padé fit plus spectral data for one channel configuration."""
    smatrix: Union[RationalSMatrix, CoupledRationalSMatrix]
    spectrum: SpectralData
    q_max: float
    diagnostics: Dict[str, Any]


def _channel_records(records: Sequence[PhaseRecord], channel: int) -> List[PhaseRecord]:
    if channel == 1:
        return list(records)
    return [PhaseRecord(q=rec.q, delta=rec.delta2, delta_err=rec.delta2_err) for rec in records]


def _node_candidates(config: ChannelConfig) -> List[int]:
    """Configured node count first, then 2..max_nodes."""
    top = max(config.max_nodes, config.nodes)
    return [config.nodes] + [n for n in range(2, top + 1) if n != config.nodes]


def fit_spectrum(
    config: ChannelConfig, records: Sequence[PhaseRecord], settings: Optional[Settings] = None
) -> FitResult:
    """Tail extrapolation, Padé fit and spectral decomposition.

    Raises:
        DomainError: No records
        StageError: Failure in one of the three stages
    """
    settings = settings or load_settings()
    if not records:
        raise DomainError("no phase records to invert")
    records = sorted(records, key=lambda rec: rec.q)
    mu = reduced_mass(config.m1, config.m2)
    n1, n2 = config.levinson
    qs = np.array([rec.q for rec in records])
    tolerance = settings.fit_tolerance * (config.gate or settings.gate)
    diagnostics: Dict[str, Any] = {}

    if not config.coupled:
        l = config.l
        with stage("extrapolate_tail"):
            q_max = resolve_q_max(config, records, settings)
            curve = extrapolate_tail(records, q_max, l=l, model_shape=config.tail_model, levinson=n1)
            diagnostics["tail"] = {"amplitude": curve.amplitude, "rate": curve.rate}
        with stage("fit_pade"):
            kappas = [energy_to_kappa(b.energy, mu) for b in config.bound_states]
            if config.node_search:
                smat, diagnostics["order_scan"] = select_pade_single(
                    curve, l, q_max, qs, [rec.delta for rec in records], levinson=n1,
                    bound_momenta=kappas, pin_bound_poles=config.pin_bound_poles,
                    candidates=_node_candidates(config), tolerance=tolerance,
                    clearance=config.pole_clearance,
                )
            else:
                smat = fit_pade_single(curve, config.nodes, l, q_max, levinson=n1,
                                       bound_momenta=kappas if config.pin_bound_poles else ())
                check_admissible(smat.denominator(), 2 * n1, q_max, config.pole_clearance,
                                 exempt=kappas)
        with stage("spectral_decompose"):
            bound_terms = [bound_state_term(k, b.A_S, l) for k, b in zip(kappas, config.bound_states)]
            spec = spectral_decompose(smat, bound_states=bound_terms)
    else:
        l1, l2 = config.l, config.l2
        with stage("extrapolate_tail"):
            q_max = resolve_q_max(config, records, settings)
            curve1 = extrapolate_tail(_channel_records(records, 1), q_max, l=l1,
                                      model_shape=config.tail_model, levinson=n1)
            curve2 = extrapolate_tail(_channel_records(records, 2), q_max, l=l2, levinson=n2)
            mixing = extrapolate_power_tail(qs, np.array([rec.epsilon for rec in records]))
            diagnostics["tail"] = {
                "channel1": {"amplitude": curve1.amplitude, "rate": curve1.rate},
                "channel2": {"amplitude": curve2.amplitude, "rate": curve2.rate},
                "mixing_power": mixing.power,
            }
        with stage("fit_pade"):
            curves = (curve1, curve2, mixing)
            kappas = [energy_to_kappa(b.energy, mu) for b in config.bound_states]
            if config.node_search:
                phases = tuple(np.array([getattr(rec, name) for rec in records])
                               for name in ("delta", "delta2", "epsilon"))
                smat, diagnostics["order_scan"] = select_pade_coupled(
                    curves, l1, l2, q_max, qs, phases, levinson=(n1, n2),
                    convention=config.mixing_convention, bound_momenta=kappas,
                    candidates=_node_candidates(config), tolerance=tolerance,
                    clearance=config.pole_clearance,
                )
            else:
                smat = fit_pade_coupled(curves, config.nodes, l1, l2, q_max, levinson=(n1, n2),
                                        convention=config.mixing_convention)
                windings = (n1, n2, 0)
                for index, denominator in enumerate(smat.denominators()[:3]):
                    check_admissible(denominator, windings[index], q_max, config.pole_clearance,
                                     exempt=kappas if index < 2 else (), both_sides=index == 2)
        with stage("spectral_decompose"):
            bound_terms = [
                coupled_bound_state_term(energy_to_kappa(b.energy, mu), b.A_S, b.eta, l1, l2)
                for b in config.bound_states
            ]
            spec = spectral_decompose(smat, bound_states=bound_terms)

    diagnostics["pairing_defect"] = pairing_defect(spec)
    return FitResult(smat, spec, q_max, diagnostics)


def _fit_coefficients(smat) -> Dict[str, List[float]]:
    if isinstance(smat, RationalSMatrix):
        return _coefficients(f1=smat.f1, f2=smat.f2)
    return _coefficients(
        f1_ch1=smat.f1_ch1, f2_ch1=smat.f2_ch1, f1_ch2=smat.f1_ch2, f2_ch2=smat.f2_ch2,
        f1_mix=smat.f1_mix, f2_mix=smat.f2_mix,
    )


# ---------------------------------------------------------------------------
# Optical stage
# ---------------------------------------------------------------------------


def _as_bar(record: PhaseRecord, convention: str) -> PhaseRecord:
    if convention == "bar":
        return record
    d1, d2, eps = bar_from_eigen(record.delta, record.delta2, record.epsilon)
    return record.model_copy(update={"delta": float(d1), "delta2": float(d2), "epsilon": float(eps)})


def alpha_table(
    config: ChannelConfig,
    records: Sequence[PhaseRecord],
    potential: Potential,
    real_phases: Optional[Dict[float, float]] = None,
) -> Tuple[List[Dict[str, Any]], Dict[str, Any]]:
    """Predicted (and, for single channels, refined) α per absorptive record.

    Args:
        real_phases: Forward phase shifts of V⁽⁰⁾ keyed by q, when already known

    Returns:
        tuple: (α rows, diagnostics)
    """
    records = sorted(records, key=lambda rec: rec.q)
    diagnostics: Dict[str, Any] = {}
    table: List[Dict[str, Any]] = []

    if config.coupled:
        l1, l2 = config.l, config.l2
        absorptive = [_as_bar(rec, config.mixing_convention) for rec in records
                      if rec.rho > 0 or (rec.rho2 or 0.0) > 0]
        for rec in absorptive:
            alphas = alpha_predict_coupled(potential, rec, l1, l2)
            table.append({"q": rec.q, "t_lab": rec.t_lab, "predicted": list(alphas)})
        if absorptive:
            check = jacobian_diagnostics(potential, absorptive[0].q, l1, l2)
            diagnostics["jacobian"] = {
                "q": absorptive[0].q,
                "integral_gap": check["integral_gap"],
                "row_sum_error": check["row_sum_error"],
            }
        return table, diagnostics

    real_phases = dict(real_phases or {})
    predicted = []
    for rec in records:
        if rec.rho == 0.0:
            predicted.append(0.0)
            continue
        if rec.q not in real_phases:
            real_phases[rec.q] = float(np.real(phase_eq_single(potential, rec.q, config.l).terminal[0]))
        predicted.append(alpha_predict_single(real_phases[rec.q], rec.rho))

    refined: Optional[OpticalScaling] = None
    if config.refine_alpha and any(rec.rho > 0 for rec in records):
        refined = alpha_refine_single(potential, records, config.l, alpha_init=predicted)
        diagnostics["unconverged"] = sum(not e.converged for e in refined.entries)
    for index, rec in enumerate(records):
        entry: Dict[str, Any] = {"q": rec.q, "t_lab": rec.t_lab, "predicted": [predicted[index]]}
        if refined is not None:
            item = refined.entries[index]
            entry.update(refined=list(item.alpha), provenance=item.provenance,
                         converged=item.converged)
        table.append(entry)
    return table, diagnostics


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------


def _model_phases(smat: np.ndarray, convention: str, reference: Tuple[float, float]):
    if convention == "bar":
        return tuple(float(v) for v in bar_phases_from_s(smat, reference=reference))
    return tuple(float(np.real(v)) for v in eigenphases_from_s(smat, reference=reference))


def run_single(
    config: ChannelConfig,
    records: Sequence[PhaseRecord],
    settings: Optional[Settings] = None,
    observables: bool = True,
) -> Tuple[RunReport, RadialPotential]:
    """Invert one uncoupled partial wave.

    Args:
        config: Channel configuration
        records: Phase records
        settings: Ambient settings (defaults from :func:`load_settings`)
        observables: Also run the bound-state and optical stages

    Returns:
        tuple: (RunReport, reconstructed real potential)

    Raises:
        StageError: Any stage failure, labelled with the stage name
    """
    settings = settings or load_settings()
    if config.coupled:
        raise DomainError("run_single needs an uncoupled channel; use run_coupled")
    records = sorted(records, key=lambda rec: rec.q)
    l = config.l
    n_levinson = config.levinson[0]
    gate = config.gate or settings.gate

    fit = fit_spectrum(config, records, settings)
    q_max = fit.q_max
    diagnostics = dict(fit.diagnostics)

    with stage("marchenko_solve"):
        grid = _grid(config, settings, fit.spectrum)
        solution = solve_output_kernel(fit.spectrum, l, grid)
        diagnostics["max_condition"] = float(np.max(solution.condition))
        if solution.terms:
            diagnostics["marchenko_residual"] = max(
                marchenko_residual(solution, i, y) for i, y in _residual_points(grid)
            )

    with stage("extract_potential"):
        potential = extract_potential(solution)

    with stage("round_trip"):
        def forward(rec: PhaseRecord) -> ResidualRow:
            model = float(np.real(phase_eq_single(potential, rec.q, l, rtol=settings.rtol).terminal[0]))
            return ResidualRow(q=rec.q, data=(rec.delta,), model=(model,),
                               residual=float(abs(wrap_pi(model - rec.delta))))

        rows = _map(forward, records, settings.threads)
        max_residual = max(row.residual for row in rows)
        if max_residual > gate:
            logger.warning("Round-trip residual %.3e rad exceeds gate %.1e", max_residual, gate)

    with stage("levinson"):
        low = float(np.real(phase_eq_single(potential, LEVINSON_PROBE * q_max, l).terminal[0]))
        high = float(np.real(phase_eq_single(potential, q_max, l).terminal[0]))
        observed = int(round((low - high) / math.pi))
        levinson = {"expected": n_levinson, "observed": observed,
                    "kernel_bound_terms": len(fit.spectrum.bound_states),
                    "gap": float(low - high - n_levinson * math.pi)}
        if observed != n_levinson:
            logger.warning("Levinson count %d differs from configured %d", observed, n_levinson)

    report = RunReport(
        config_hash=config.config_hash(), channel=config.name, channels=(l,), q_max=q_max,
        fit=_fit_coefficients(fit.smatrix), poles=_pole_rows(fit.spectrum.kernel_terms()),
        grid=_grid_info(grid), round_trip=rows, max_residual=max_residual, gate=gate,
        gate_passed=max_residual <= gate, levinson=levinson, diagnostics=diagnostics,
    )
    if not observables:
        return report, potential

    with stage("bound_states"):
        mu = reduced_mass(config.m1, config.m2)
        states = find_bound_states(potential, l, mu, window=config.bound_window)
        report.bound_states = _bound_rows(states, config)

    with stage("optical"):
        report.alpha, optical = alpha_table(config, records, potential,
                                            {row.q: row.model[0] for row in rows})
        diagnostics.update(optical)

    logger.info("Run '%s' finished: max residual %.3e rad (gate %s)", config.name, max_residual,
                "passed" if report.gate_passed else "failed")
    return report, potential


def run_coupled(
    config: ChannelConfig,
    records: Sequence[PhaseRecord],
    settings: Optional[Settings] = None,
    observables: bool = True,
) -> Tuple[RunReport, CoupledPotential]:
    """Invert a two-channel partial wave (δ₁, δ₂, ε).

    The report carries a bound-state block (E, A_S, η, r_d, Q, P_D) checked
    against the configured bound-state inputs and ``reference_observables``.
    """
    settings = settings or load_settings()
    if not config.coupled:
        raise DomainError("run_coupled needs l2 in the channel config")
    records = sorted(records, key=lambda rec: rec.q)
    l1, l2 = config.l, config.l2
    n1, n2 = config.levinson
    convention = config.mixing_convention
    gate = config.gate or settings.gate

    fit = fit_spectrum(config, records, settings)
    q_max = fit.q_max
    diagnostics = dict(fit.diagnostics)

    with stage("marchenko_solve"):
        grid = _grid(config, settings, fit.spectrum)
        solution = solve_coupled_kernel(fit.spectrum, l1, l2, grid)
        diagnostics["max_condition"] = float(np.max(solution.condition))
        if solution.terms:
            diagnostics["marchenko_residual"] = max(
                coupled_marchenko_residual(solution, i, y) for i, y in _residual_points(grid)
            )

    with stage("extract_potential"):
        potential = extract_coupled_potential(solution)
        diagnostics["asymmetry"] = potential.asymmetry

    with stage("round_trip"):
        def forward(rec: PhaseRecord) -> ResidualRow:
            pf = phase_eq_coupled(potential, rec.q, l1, l2, rtol=settings.rtol)
            model = _model_phases(pf.smatrix, convention, (rec.delta, rec.delta2))
            data = (rec.delta, rec.delta2, rec.epsilon)
            residual = max(
                float(abs(wrap_pi(model[0] - data[0]))),
                float(abs(wrap_pi(model[1] - data[1]))),
                abs(model[2] - data[2]),
            )
            return ResidualRow(q=rec.q, data=data, model=model, residual=residual)

        rows = _map(forward, records, settings.threads)
        max_residual = max(row.residual for row in rows)
        if max_residual > gate:
            logger.warning("Round-trip residual %.3e rad exceeds gate %.1e", max_residual, gate)

    with stage("levinson"):
        low = phase_eq_coupled(potential, LEVINSON_PROBE * q_max, l1, l2).terminal
        high = phase_eq_coupled(potential, q_max, l1, l2).terminal
        observed = [int(round(float(np.real(low[i] - high[i])) / math.pi)) for i in range(2)]
        levinson = {"expected": [n1, n2], "observed": observed,
                    "kernel_bound_terms": len(fit.spectrum.bound_states)}
        if observed != [n1, n2]:
            logger.warning("Levinson counts %s differ from configured %s", observed, [n1, n2])

    report = RunReport(
        config_hash=config.config_hash(), channel=config.name, channels=(l1, l2), q_max=q_max,
        fit=_fit_coefficients(fit.smatrix), poles=_pole_rows(fit.spectrum.kernel_terms()),
        grid=_grid_info(grid), round_trip=rows, max_residual=max_residual, gate=gate,
        gate_passed=max_residual <= gate, levinson=levinson, diagnostics=diagnostics,
    )
    if not observables:
        return report, potential

    with stage("bound_states"):
        mu = reduced_mass(config.m1, config.m2)
        states = find_bound_states(potential, (l1, l2), mu, window=config.bound_window)
        report.bound_states = _bound_rows(states, config)

    with stage("optical"):
        report.alpha, optical = alpha_table(config, records, potential)
        diagnostics.update(optical)

    logger.info("Coupled run '%s' finished: max residual %.3e rad (gate %s)", config.name,
                max_residual, "passed" if report.gate_passed else "failed")
    return report, potential


def run(
    config: ChannelConfig, records: Sequence[PhaseRecord], settings: Optional[Settings] = None,
    observables: bool = True,
) -> Tuple[RunReport, Potential]:
    """Dispatch to :func:`run_single` or :func:`run_coupled`."""
    runner = run_coupled if config.coupled else run_single
    return runner(config, records, settings, observables)


def qmax_sweep(
    config: ChannelConfig,
    records: Sequence[PhaseRecord],
    factors: Sequence[float] = (1.25, 1.5, 2.0),
    settings: Optional[Settings] = None,
) -> List[Dict[str, Any]]:
    """Round-trip residual of the inversion for several Q_max factors."""
    results = []
    for factor in factors:
        trial = config.model_copy(update={"q_max": None, "qmax_factor": factor})
        try:
            report, _ = run(trial, records, settings, observables=False)
            results.append({"factor": factor, "q_max": report.q_max,
                            "max_residual": report.max_residual,
                            "gate_passed": report.gate_passed})
        except StageError as e:
            logger.warning("Q_max factor %.3g failed at stage '%s': %s", factor, e.stage, e.error)
            results.append({"factor": factor, "q_max": None, "max_residual": None,
                            "gate_passed": False, "failed_stage": e.stage})
    return results


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

COMPONENTS = ("11", "22", "12")


def potential_frame(potential: Potential, mu: float) -> pd.DataFrame:
    """Potential table in fm⁻² (2μV) and MeV, one column pair per component."""
    frame = pd.DataFrame({"r_fm": potential.grid})
    if isinstance(potential, CoupledPotential):
        columns = [(f"_{c}", potential.values[:, i]) for i, c in enumerate(COMPONENTS)]
    else:
        columns = [("", potential.values)]
    for suffix, values in columns:
        values = np.asarray(values, dtype=complex)
        frame[f"ReV{suffix}_fm2"] = values.real
        frame[f"ImV{suffix}_fm2"] = values.imag
        frame[f"ReV{suffix}_MeV"] = fm2_to_mev(values.real, mu)
        frame[f"ImV{suffix}_MeV"] = fm2_to_mev(values.imag, mu)
    return frame


def write_potential(
    potential: Potential, path: Union[str, Path], mu: float, config_hash: str = ""
) -> Path:
    """CSV with a commented header naming the config hash, grid and units."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = potential.grid
    with open(path, "w") as f:
        f.write(f"# config_hash: {config_hash}\n")
        f.write(f"# grid: r_min={grid[0]:.10g} fm, r_max={grid[-1]:.10g} fm, points={len(grid)}\n")
        f.write(f"# units: r in fm; V in fm^-2 (2 mu V) and MeV with mu={mu:.10g} MeV\n")
        potential_frame(potential, mu).to_csv(f, index=False, float_format="%.12g")
    return path


def read_potential(path: Union[str, Path], l: int = 0, l2: Optional[int] = None) -> Potential:
    """Load a potential CSV written by :func:`write_potential`."""
    frame = pd.read_csv(path, comment="#")
    if "r_fm" not in frame.columns or not ({"ReV_fm2", "ReV_11_fm2"} & set(frame.columns)):
        raise SchemaError(f"{path} is not a potential table", column="r_fm")
    grid = frame["r_fm"].to_numpy(dtype=float)
    if "ReV_11_fm2" in frame.columns:
        values = np.stack([
            frame[f"ReV_{c}_fm2"].to_numpy() + 1j * frame[f"ImV_{c}_fm2"].to_numpy()
            for c in COMPONENTS
        ], axis=1)
        if not np.any(values.imag):
            values = values.real
        return CoupledPotential(grid=grid, values=values, l1=l, l2=2 if l2 is None else l2)
    values = frame["ReV_fm2"].to_numpy() + 1j * frame["ImV_fm2"].to_numpy()
    if not np.any(values.imag):
        values = values.real
    return RadialPotential(grid=grid, values=values, l=l)


def write_outputs(
    report: RunReport, potential: Potential, output_dir: Union[str, Path], mu: float
) -> Dict[str, Path]:
    """Write ``<channel>_potential.csv`` and ``<channel>_report.json``."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "potential": write_potential(potential, output_dir / f"{report.channel}_potential.csv",
                                     mu, report.config_hash),
        "report": output_dir / f"{report.channel}_report.json",
    }
    paths["report"].write_text(report.payload())
    logger.info("Wrote %s and %s", paths["potential"], paths["report"])
    return paths
