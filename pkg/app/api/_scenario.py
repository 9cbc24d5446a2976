import logging
from typing import Any, Dict

from fastapi import HTTPException

from app.schemas.scenario import Scenario
from app.services.scenario_loader import parse_scenario
from app.utils.errors import ConfigError, FaaError, GuardValidationFailed

logger = logging.getLogger(__name__)


def scenario_from_body(payload: Dict[str, Any]) -> Scenario:
    """Validate a scenario posted as JSON; config problems are the caller's fault (400)."""
    try:
        return parse_scenario(payload)
    except ConfigError as e:
        logger.error(f"Rejected scenario: {e}")
        raise HTTPException(status_code=400, detail=str(e))


def raise_for_domain_error(e: Exception) -> None:
    """Map simulator errors onto HTTP status codes."""
    if isinstance(e, ConfigError):
        raise HTTPException(status_code=400, detail=str(e))
    if isinstance(e, GuardValidationFailed):
        raise HTTPException(status_code=422, detail={"message": str(e), "margin_s": e.margin_s})
    if isinstance(e, FaaError) and getattr(e, "exit_code", 3) == 2:
        raise HTTPException(status_code=422, detail=str(e))
    raise HTTPException(status_code=500, detail=str(e))
