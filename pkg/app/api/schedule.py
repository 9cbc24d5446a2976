import logging
from typing import Any, Dict

from fastapi import APIRouter, Body, HTTPException

from app.api._scenario import raise_for_domain_error, scenario_from_body
from app.services.pipeline_runner import pipeline_runner
from app.services.waveform_scheduler import schedule_rows
from app.utils.errors import GuardValidationFailed
from app.utils.json_sanitizer import to_jsonable

router = APIRouter()
logger = logging.getLogger(__name__)


@router.post("")
def build_schedule(payload: Dict[str, Any] = Body(...)) -> Dict[str, Any]:
    """
    Build the chirp schedule of a scenario and validate its guard gaps.

    Returns the per-chirp rows and the validation report; a failed guard
    check answers 422 with the margin.
    """
    scenario = scenario_from_body(payload)
    try:
        result = pipeline_runner.run_schedule(scenario)
    except HTTPException:
        raise
    except GuardValidationFailed as e:
        logger.warning(f"Schedule rejected for '{scenario.name}': {e}")
        raise_for_domain_error(e)
    except Exception as e:
        logger.error(f"Schedule build failed: {e}")
        raise_for_domain_error(e)

    return {
        "scenario": scenario.name,
        "report": to_jsonable(result.report),
        "chirps": to_jsonable(schedule_rows(result.schedule)),
    }
