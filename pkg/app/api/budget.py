import logging
from typing import Any, Dict

from fastapi import APIRouter, Body, HTTPException
from pydantic import ValidationError

from app.api._scenario import raise_for_domain_error, scenario_from_body
from app.schemas.budget import BudgetInput
from app.services import link_budget
from app.services.pipeline_runner import pipeline_runner
from app.utils.json_sanitizer import to_jsonable

router = APIRouter()
logger = logging.getLogger(__name__)


@router.post("")
def compute_budget(payload: Dict[str, Any] = Body(...)) -> Dict[str, Any]:
    """
    Link-budget report.

    Accepts either a full scenario (with a `budget` block) or a bare
    BudgetInput object.
    """
    try:
        if "schema_version" in payload:
            scenario = scenario_from_body(payload)
            report = pipeline_runner.run_budget(scenario)
        else:
            inp = BudgetInput(**payload)
            report = link_budget.budget_report(inp)
    except HTTPException:
        raise
    except ValidationError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Budget failed: {e}")
        raise_for_domain_error(e)

    return to_jsonable(report)
