import logging
from pathlib import Path
from typing import Any, Dict

from fastapi import APIRouter, Body, HTTPException, Query

from app.api._scenario import raise_for_domain_error, scenario_from_body
from app.config import settings
from app.services.pipeline_runner import pipeline_runner
from app.utils.json_sanitizer import to_jsonable

router = APIRouter()
logger = logging.getLogger(__name__)


@router.post("")
def run_end_to_end(
    payload: Dict[str, Any] = Body(...),
    calibrate: bool = Query(True, description="Run the start-up calibration pass before focusing"),
) -> Dict[str, Any]:
    """Run synthesize -> profiles -> calibrate -> focus -> metrics; artifacts land under OUTPUT_DIR."""
    scenario = scenario_from_body(payload)
    out_dir = Path(settings.OUTPUT_DIR) / scenario.name
    try:
        summary = pipeline_runner.run_e2e(scenario, out_dir, calibrate=calibrate)
    except HTTPException:
        raise
    except Exception as e:
        logger.error(f"End-to-end run failed for '{scenario.name}': {e}")
        raise_for_domain_error(e)
    return to_jsonable(summary)
