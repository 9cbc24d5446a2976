import logging
import math
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.constants import speed_of_light as C

from app.schemas.calibration import TAU_SCALE_S, CalibMeasurement, CalibParams, FitReport
from app.schemas.dsp import RangeProfile
from app.schemas.fabric import FabricConfig
from app.schemas.scene import NoiseSpec, RawDataCube, ReferenceScatterer
from app.schemas.waveform import ChirpSchedule
from app.services.dsp_pipeline import range_profile, window_coefficients
from app.services.echo_synthesis import system_scale
from app.services.fabric_model import active_module, fabric_span, nominal_map, positions_with_offsets
from app.utils.errors import CalibrationError
from app.utils.normalizer import db_to_amplitude, normalized_frequency

logger = logging.getLogger(__name__)

# =========================
# Solver constants
# =========================

FD_STEP = 1e-3             # forward-difference step, in natural-scale units
REL_DECREASE_TOL = 1e-8
STEP_NORM_TOL = 1e-10
LAMBDA_INIT = 1e-3
LAMBDA_MAX = 1e12
DELAY_GRID_STEP_S = 1e-12
IDENTIFIABILITY_FACTOR = 4
CARRIER_CYCLES_SEARCHED = 3


def _refs_arrays(refs: Sequence[ReferenceScatterer]) -> Tuple[np.ndarray, np.ndarray]:
    ordered = sorted(refs, key=lambda r: r.id)
    pos = np.array([r.position for r in ordered], dtype=np.float64)
    rcs = np.array([r.rcs for r in ordered], dtype=np.float64)
    return pos, rcs


def calibrated_map(theta_hat: CalibParams, fabric: FabricConfig, f: float) -> np.ndarray:
    """x_hat(f): the perturbed mapping under the fitted module offsets."""
    offsets = {k: theta_hat.offset(k) for k in fabric.module_ids}
    return positions_with_offsets(fabric, [f], offsets)[0]


def _state_geometry(
    theta: CalibParams,
    fabric: FabricConfig,
    f_centers: np.ndarray,
    ref_pos: np.ndarray,
) -> np.ndarray:
    """(S, P) ranges from each state's virtual sample to each reference."""
    offsets = {k: theta.offset(k) for k in fabric.module_ids}
    x = positions_with_offsets(fabric, f_centers, offsets)
    return np.linalg.norm(ref_pos[None, :, :] - x[:, None, :], axis=-1)


def _model_terms(
    theta: CalibParams,
    fabric: FabricConfig,
    f_centers: np.ndarray,
    ref_pos: np.ndarray,
    ref_rcs: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """Modeled responses (S, P) and the ranges they were computed at."""
    span = fabric_span(fabric)
    nu = normalized_frequency(f_centers, span.f_lo, span.f_hi)
    amp = db_to_amplitude(theta.gain_db(nu))
    ranges = _state_geometry(theta, fabric, f_centers, ref_pos)
    f = f_centers[:, None]
    phase = -4.0 * np.pi * f * ranges / C - 2.0 * np.pi * f * theta.tau0_s
    values = amp[:, None] * np.sqrt(ref_rcs)[None, :] / ranges ** 2 * np.exp(1j * phase)
    return values, ranges


def model_reference_response(
    theta: CalibParams,
    fabric: FabricConfig,
    refs: Sequence[ReferenceScatterer],
    f: float,
) -> np.ndarray:
    """
    S~(p)(f; theta) for the three references at one state frequency:
    10^(A_dB(nu)/20) sqrt(sigma_p)/R_p^2 exp(-j 4 pi f R_p / c - j 2 pi f tau0).
    """
    ref_pos, ref_rcs = _refs_arrays(refs)
    values, _ = _model_terms(theta, fabric, np.array([f], dtype=np.float64), ref_pos, ref_rcs)
    return values[0]


def _window_transfer(window: np.ndarray, sample_rate: float, delta_hz: np.ndarray) -> np.ndarray:
    """K(delta) = sum_n w_n exp(j 2 pi delta n / fs) / sum_n w_n."""
    n = np.arange(window.size, dtype=np.float64)
    kernel = np.exp(2j * np.pi * delta_hz[..., None] * n / sample_rate)
    return kernel @ window / window.sum()


def predict_measurement(
    theta: CalibParams,
    fabric: FabricConfig,
    refs: Sequence[ReferenceScatterer],
    meas: CalibMeasurement,
) -> np.ndarray:
    """
    Modeled nearest-bin values (P, S): every reference's response leaks into
    each extraction bin through the window transfer at the beat offset.
    """
    ref_pos, ref_rcs = _refs_arrays(refs)
    values, ranges = _model_terms(theta, fabric, meas.f_centers, ref_pos, ref_rcs)  # (S, Q)
    w = window_coefficients(meas.window, meas.n_fast)

    f_beat = 2.0 * meas.slope * ranges / C                                   # (S, Q)
    f_bin = meas.bins.T.astype(np.float64) * meas.sample_rate / meas.n_fft    # (S, P)
    delta = f_beat[:, None, :] - f_bin[:, :, None]                            # (S, P, Q)
    leakage = _window_transfer(w, meas.sample_rate, delta)
    pred = np.einsum("spq,sq->sp", leakage, values)
    return pred.T


def measure_references(
    cube: RawDataCube,
    fabric_nominal: FabricConfig,
    refs: Sequence[ReferenceScatterer],
    noise: NoiseSpec,
    window: str = "hann",
    zero_pad: int = 4,
    states: Optional[Sequence[int]] = None,
) -> CalibMeasurement:
    """
    S_cal(p)(f_c[m]): profile value at the bin nearest each reference's nominal
    range, averaged coherently over evolutions and divided by the system scale.
    """
    schedule = cube.schedule
    states = list(range(schedule.num_states)) if states is None else sorted(states)
    ordered = sorted(refs, key=lambda r: r.id)
    if [r.id for r in ordered] != [1, 2, 3]:
        raise CalibrationError("calibration needs exactly three references with ids 1, 2, 3")
    ref_pos, _ = _refs_arrays(ordered)

    f_centers = schedule.state_centers[states]
    values = np.empty((len(ordered), len(states)), dtype=np.complex128)
    bins = np.empty((len(ordered), len(states)), dtype=np.int64)

    for j, m in enumerate(states):
        f = float(schedule.state_centers[m])
        profiles = [range_profile(cube, m, q, window, zero_pad) for q in range(schedule.evolutions)]
        averaged = np.mean(np.stack([p.bins for p in profiles]), axis=0)
        bin_width = profiles[0].bin_width_m

        nominal_ranges = np.linalg.norm(ref_pos - nominal_map(fabric_nominal, f), axis=-1)
        gaps = np.abs(nominal_ranges[:, None] - nominal_ranges[None, :])
        np.fill_diagonal(gaps, np.inf)
        if gaps.min() < bin_width:
            raise CalibrationError(
                f"references unresolvable at state {m}: nominal ranges "
                f"{np.round(nominal_ranges, 4).tolist()} m are closer than one range bin "
                f"({bin_width:.4f} m); use a wider calibration chirp or references at distinct ranges"
            )

        idx = np.rint(nominal_ranges / bin_width).astype(np.int64)
        if idx.max() >= profiles[0].n_fft:
            raise CalibrationError(f"reference beyond the range axis at state {m}")
        scale = system_scale(noise, fabric_nominal, f, window, schedule.n_fast)
        values[:, j] = averaged[idx] / scale
        bins[:, j] = idx

    logger.info("Measured %d references over %d states", len(ordered), len(states))
    return CalibMeasurement(
        ref_ids=tuple(r.id for r in ordered),
        states=tuple(int(m) for m in states),
        f_centers=np.asarray(f_centers, dtype=np.float64),
        values=values,
        bins=bins,
        slope=schedule.slope,
        sample_rate=schedule.sample_rate,
        n_fast=schedule.n_fast,
        zero_pad=zero_pad,
        window=window,
    )


def objective(meas: CalibMeasurement, pred: np.ndarray) -> float:
    """sum_p sum_m |S_cal - S~|^2."""
    return float(np.sum(np.abs(meas.values - pred) ** 2))


def _initial_delay(meas: CalibMeasurement, pred: np.ndarray, half_width: float) -> float:
    """
    Extra delay that best aligns measurement and model, found on a 1 ps grid.
    The objective is multimodal in tau0 (carrier cycles of ~16 ps under an
    envelope of ~1/span), so LM starts from here.
    """
    cross = np.sum(meas.values * np.conj(pred), axis=0)  # (S,)
    taus = np.arange(-half_width, half_width + 0.5 * DELAY_GRID_STEP_S, DELAY_GRID_STEP_S)
    # real part: a delay also rotates the carrier, and theta has no free phase
    spectrum = np.real(np.exp(2j * np.pi * taus[:, None] * meas.f_centers[None, :]) @ cross)
    return float(taus[int(np.argmax(spectrum))])


def _cycle_order(n: int) -> List[int]:
    """0, -1, +1, -2, +2, ..."""
    order = [0]
    for k in range(1, n + 1):
        order.extend((-k, k))
    return order


def _check_states(meas: CalibMeasurement, fabric: FabricConfig) -> None:
    per_module: Dict[int, int] = {k: 0 for k in fabric.module_ids}
    for f in meas.f_centers:
        k = active_module(fabric, float(f))
        if k is None:
            raise CalibrationError(f"state at {f / 1e9:.6f} GHz falls in a guard band")
        per_module[k] += 1
    short = [k for k, n in per_module.items() if n < 2]
    if short:
        raise CalibrationError(f"modules {short} have fewer than 2 usable calibration states")


def _levenberg_marquardt(
    residual: Callable[[np.ndarray], np.ndarray],
    z0: np.ndarray,
    max_iterations: int,
) -> Tuple[np.ndarray, List[float], bool, int, str]:
    """
    Damped Gauss-Newton on scaled parameters. Returns
    (z, accepted objective history, converged, iterations, diagnostic).
    """
    z = z0.copy()
    r = residual(z)
    obj = float(r @ r)
    history = [obj]
    lam = LAMBDA_INIT
    n = z.size

    for it in range(1, max_iterations + 1):
        jac = np.empty((r.size, n))
        for i in range(n):
            zp = z.copy()
            zp[i] += FD_STEP
            jac[:, i] = (residual(zp) - r) / FD_STEP

        jtj = jac.T @ jac
        grad = jac.T @ r
        diag = np.maximum(np.diag(jtj), 1e-12)

        while True:
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                step = None

            if step is not None and np.linalg.norm(step) < STEP_NORM_TOL:
                return z, history, True, it, ""

            if step is not None:
                r_new = residual(z + step)
                obj_new = float(r_new @ r_new)
                if obj_new < obj:
                    rel = (obj - obj_new) / obj
                    z, r, obj = z + step, r_new, obj_new
                    history.append(obj)
                    lam = max(lam / 10.0, 1e-15)
                    logger.debug("LM iter %d: objective %.6e (lambda %.1e)", it, obj, lam)
                    if rel < REL_DECREASE_TOL:
                        return z, history, True, it, ""
                    break
                if obj > 0 and abs(obj_new - obj) / obj < REL_DECREASE_TOL:
                    return z, history, True, it, ""

            lam *= 10.0
            if lam > LAMBDA_MAX:
                rank = int(np.linalg.matrix_rank(jac))
                diagnostic = f"damping exceeded {LAMBDA_MAX:.0e} without decrease"
                if rank < n:
                    diagnostic += f"; Jacobian rank {rank} of {n}"
                return z, history, False, it, diagnostic

        if obj == 0.0:
            return z, history, True, it, ""

    return z, history, False, max_iterations, f"iteration cap {max_iterations} reached"


def fit_calibration(
    meas: CalibMeasurement,
    fabric: FabricConfig,
    refs: Sequence[ReferenceScatterer],
    theta_init: Optional[CalibParams] = None,
    max_iterations: int = 200,
    delay_search_s: float = 5e-9,
) -> FitReport:
    """theta_hat = argmin_theta sum |S_cal - S~(theta)|^2 over references and states."""
    theta_init = theta_init or CalibParams()
    _check_states(meas, fabric)

    module_ids = fabric.module_ids
    n_params = CalibParams.dimension(len(module_ids))
    n_equations = 2 * meas.values.size
    if n_equations < IDENTIFIABILITY_FACTOR * n_params:
        logger.warning(
            "Calibration weakly determined: %d residual equations for %d parameters",
            n_equations, n_params,
        )

    # coarse delay, then the amplitude level that goes with it
    pred0 = predict_measurement(theta_init, fabric, refs, meas)
    tau = theta_init.tau0_s + _initial_delay(meas, pred0, delay_search_s)
    start = theta_init.model_copy(update={"tau0_s": tau})
    pred1 = predict_measurement(start, fabric, refs, meas)
    power = float(np.sum(np.abs(pred1) ** 2))
    if power > 0:
        ratio = float(np.sum(np.abs(meas.values) * np.abs(pred1))) / power
        if ratio > 0:
            g0, g1, g2 = start.gain_coeffs
            start = start.model_copy(update={"gain_coeffs": (g0 + 20.0 * math.log10(ratio), g1, g2)})
    logger.info("Calibration start: tau0 = %.2f ps, g0 = %.3f dB", start.tau0_s * 1e12, start.gain_coeffs[0])

    scales = CalibParams.scales(module_ids)

    def residual(z: np.ndarray) -> np.ndarray:
        theta = CalibParams.from_vector(z * scales, module_ids)
        diff = (meas.values - predict_measurement(theta, fabric, refs, meas)).ravel()
        return np.concatenate((diff.real, diff.imag))

    # offsets bias the carrier phase, so neighbouring carrier cycles of tau0 are tried too
    carrier_period = 1.0 / float(np.mean(meas.f_centers))
    best = None
    for k in _cycle_order(CARRIER_CYCLES_SEARCHED):
        z0 = start.to_vector(module_ids) / scales
        z0[0] += k * carrier_period / TAU_SCALE_S
        outcome = _levenberg_marquardt(residual, z0, max_iterations)
        logger.debug("Start at cycle %+d: objective %.6e", k, outcome[1][-1])
        if best is None or outcome[1][-1] < best[1][-1]:
            best = outcome

    z, history, converged, iterations, diagnostic = best
    theta_hat = CalibParams.from_vector(z * scales, module_ids)

    if converged:
        logger.info("Calibration converged in %d iterations, objective %.6e", iterations, history[-1])
    else:
        logger.warning("Calibration did not converge: %s", diagnostic)

    return FitReport(
        theta_hat=theta_hat,
        residual_history=history,
        converged=converged,
        iterations=iterations,
        objective=history[-1],
        n_equations=n_equations,
        n_params=n_params,
        diagnostic=diagnostic,
    )


def normalize_state(profile: RangeProfile, theta_hat: CalibParams, fabric: FabricConfig) -> RangeProfile:
    """Y_hat(r) = Y(r) exp(+j 2 pi f tau0_hat) / 10^(A_dB(nu)/20)."""
    span = fabric_span(fabric)
    nu = normalized_frequency(profile.f_center, span.f_lo, span.f_hi)
    gain = float(db_to_amplitude(theta_hat.gain_db(nu)))
    correction = np.exp(2j * np.pi * profile.f_center * theta_hat.tau0_s) / gain
    return profile.model_copy(update={"bins": profile.bins * correction})


def calibrated_mapping_rows(theta_hat: CalibParams, fabric: FabricConfig, schedule: ChirpSchedule) -> List[Dict[str, Any]]:
    rows = []
    for m, f in enumerate(schedule.state_centers):
        x = calibrated_map(theta_hat, fabric, float(f))
        x0 = nominal_map(fabric, float(f))
        rows.append({
            "state_index": m,
            "f_center_hz": float(f),
            "module_id": active_module(fabric, float(f)),
            "x_m": float(x[0]),
            "y_m": float(x[1]),
            "z_m": float(x[2]),
            "shift_m": float(np.linalg.norm(x - x0)),
        })
    return rows
