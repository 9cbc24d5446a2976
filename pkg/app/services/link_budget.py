import logging
from typing import Any, Dict, List, Sequence, Tuple

import pandas as pd

from app.schemas.budget import BudgetInput, BudgetReport
from app.services.dsp_pipeline import usable_from_snr

logger = logging.getLogger(__name__)


def total_clip_on_loss(coupling_db: float, guided_wave_db: float, insertion_db: float, ripple_db: float) -> float:
    return coupling_db + guided_wave_db + insertion_db + ripple_db


def range_reduction_factor(loss_db: float) -> float:
    """10^(L/40): an L dB penalty under the R^-4 law."""
    if loss_db < 0:
        raise ValueError(f"loss must be non-negative, got {loss_db} dB")
    return 10.0 ** (loss_db / 40.0)


def reduced_max_range(baseline_max: float, loss_db: float) -> float:
    if baseline_max <= 0:
        raise ValueError(f"baseline range must be positive, got {baseline_max} m")
    return baseline_max / range_reduction_factor(loss_db)


def effective_aperture(per_state_snr_db: Sequence[float], threshold_db: float) -> Tuple[int, List[int]]:
    """(M_eff, states at or below threshold), same strict '>' as usable_states."""
    usable = usable_from_snr(per_state_snr_db, threshold_db)
    below = [m for m in range(len(per_state_snr_db)) if m not in usable]
    return usable.size, below


def per_state_snr(inp: BudgetInput) -> List[float]:
    """Baseline minus fixed losses minus each state's ripple."""
    fixed = inp.coupling_db + inp.guided_wave_db + inp.insertion_db
    ripple = inp.per_state_ripple_db if inp.per_state_ripple_db is not None else [inp.ripple_db] * inp.num_states
    return [inp.baseline_snr_db - fixed - r for r in ripple]


def budget_report(inp: BudgetInput) -> BudgetReport:
    total = total_clip_on_loss(inp.coupling_db, inp.guided_wave_db, inp.insertion_db, inp.ripple_db)
    snrs = per_state_snr(inp)
    m_eff, below = effective_aperture(snrs, inp.threshold_db)

    report = BudgetReport(
        total_loss_db=total,
        snr_at_reference_db=inp.baseline_snr_db - total,
        range_reduction_factor=range_reduction_factor(total),
        reduced_max_range_m=reduced_max_range(inp.baseline_max_range_m, total),
        m_eff=m_eff,
        below_threshold_states=below,
        per_state_snr_db=snrs,
    )
    logger.info(
        "Budget: %.3f dB loss, %.3f dB at %.1f m, range x%.4f -> %.3f m, M_eff %d/%d",
        report.total_loss_db, report.snr_at_reference_db, inp.reference_range_m,
        report.range_reduction_factor, report.reduced_max_range_m, m_eff, inp.num_states,
    )
    return report


def budget_table(inp: BudgetInput, report: BudgetReport) -> List[Dict[str, Any]]:
    """Rows of the boxed-example reproduction table."""
    rows = [
        ("coupling loss", inp.coupling_db, "dB"),
        ("guided-wave loss", inp.guided_wave_db, "dB"),
        ("insertion loss", inp.insertion_db, "dB"),
        ("ripple", inp.ripple_db, "dB"),
        ("total penalty", report.total_loss_db, "dB"),
        ("baseline SNR", inp.baseline_snr_db, "dB"),
        (f"SNR at {inp.reference_range_m:g} m", report.snr_at_reference_db, "dB"),
        ("range reduction factor", report.range_reduction_factor, "x"),
        ("baseline max range", inp.baseline_max_range_m, "m"),
        ("reduced max range", report.reduced_max_range_m, "m"),
        ("frequency states", float(inp.num_states), "count"),
        ("M_eff", float(report.m_eff), "count"),
    ]
    return [{"quantity": q, "value": v, "unit": u} for q, v, u in rows]


def format_budget(rows: List[Dict[str, Any]]) -> str:
    df = pd.DataFrame(rows)
    counts = df["unit"] == "count"
    df["value"] = [f"{int(v)}" if c else f"{v:.4f}" for v, c in zip(df["value"], counts)]
    df.loc[counts, "unit"] = ""
    width = int(df["quantity"].str.len().max())
    unit_width = int(df["unit"].str.len().max())
    text = df.to_string(
        index=False,
        header=False,
        formatters={"quantity": lambda s: s.ljust(width), "unit": lambda s: s.ljust(unit_width)},
    )
    return "\n".join(line.rstrip() for line in text.splitlines()) + "\n"
