import copy
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from app.config import settings
from app.repositories.fixture_repository import fixture_repository
from app.schemas.budget import BudgetInput
from app.schemas.fabric import ClipOnModule, FabricConfig
from app.schemas.scenario import SCHEMA_VERSION, Scenario
from app.schemas.waveform import ChirpSchedule, GuardBudget, Subband
from app.services.waveform_scheduler import assign_subbands, build_schedule, guard_budget_for_range
from app.utils.errors import ConfigError

logger = logging.getLogger(__name__)


def _resolve_fixtures(raw: Dict[str, Any]) -> Dict[str, Any]:
    """Inline shipped ripple tables named by `fixture` keys."""
    data = copy.deepcopy(raw)
    modules = data.get("fabric", {}).get("modules", [])
    for module in modules if isinstance(modules, list) else []:
        ripple = (module.get("losses") or {}).get("ripple") if isinstance(module, dict) else None
        if isinstance(ripple, dict) and ripple.get("fixture"):
            knots_hz, knots_db = fixture_repository.ripple_knots(ripple["fixture"])
            ripple.setdefault("kind", "tabulated")
            ripple["knots_hz"] = knots_hz
            ripple["knots_db"] = knots_db

    budget = data.get("budget")
    if isinstance(budget, dict) and budget.get("ripple_fixture") and budget.get("per_state_ripple_db") is None:
        budget["per_state_ripple_db"] = fixture_repository.ripple_values(budget["ripple_fixture"])
    return data


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def parse_scenario(raw: Dict[str, Any]) -> Scenario:
    if not isinstance(raw, dict):
        raise ConfigError("scenario must be a JSON object")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    try:
        return Scenario.model_validate(_resolve_fixtures(raw))
    except ValidationError as e:
        raise ConfigError(f"invalid scenario: {_format_validation(e)}") from e


def load_scenario(path: str | Path) -> Scenario:
    """Read and validate a scenario JSON file; every problem becomes a ConfigError."""
    path = Path(path)
    if not path.exists() and not path.is_absolute():
        for shipped in (Path(settings.SCENARIO_DIR) / path, Path(settings.SCENARIO_DIR) / f"{path}.json"):
            if shipped.exists():
                path = shipped
                break
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read scenario {path}: {e}") from e
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from e

    scenario = parse_scenario(raw)
    logger.info("Loaded scenario '%s' from %s", scenario.name, path)
    return scenario


def config_hash(scenario: Scenario) -> str:
    return hashlib.sha256(scenario.model_dump_json().encode("utf-8")).hexdigest()


# =========================
# Builders
# =========================

def build_subbands(scenario: Scenario) -> List[Subband]:
    block = scenario.schedule
    if block.subbands is not None:
        return sorted(block.subbands, key=lambda s: s.f_lo)
    subbands = assign_subbands(block.band, len(scenario.fabric.modules), block.guard_band_hz)
    # equal split hands subbands to module ids in ascending order
    ids = sorted(m.id for m in scenario.fabric.modules)
    return [s.model_copy(update={"module_id": k}) for s, k in zip(subbands, ids)]


def build_fabric(scenario: Scenario, subbands: Optional[List[Subband]] = None) -> FabricConfig:
    subbands = subbands or build_subbands(scenario)
    by_module = {s.module_id: s for s in subbands}
    try:
        modules = [
            ClipOnModule(
                id=m.id,
                anchor=m.anchor,
                axis=m.axis,
                aperture_length=m.aperture_length,
                passband=by_module[m.id],
                losses=m.losses,
                mapping_law=m.mapping_law,
            )
            for m in scenario.fabric.modules
        ]
        return FabricConfig(modules=modules, trunk_feed_origin=scenario.fabric.trunk_feed_origin)
    except ValidationError as e:
        raise ConfigError(f"invalid fabric: {_format_validation(e)}") from e


def build_scenario_schedule(
    scenario: Scenario,
    subbands: Optional[List[Subband]] = None,
    chirp_bandwidth: Optional[float] = None,
    max_range: Optional[float] = None,
) -> ChirpSchedule:
    block = scenario.schedule
    return build_schedule(
        band=block.band,
        subbands=subbands or build_subbands(scenario),
        num_states=block.num_states,
        chirp_bandwidth=chirp_bandwidth or block.chirp_bandwidth_hz,
        chirp_duration=block.chirp_duration_s,
        guard_time=block.guard_time_s,
        evolutions=block.evolutions,
        sample_rate=block.sample_rate_hz,
        max_range=max_range or scenario.guard.max_range_m,
    )


def build_guard_budget(scenario: Scenario, max_range: Optional[float] = None) -> GuardBudget:
    g = scenario.guard
    return guard_budget_for_range(max_range or g.max_range_m, g.ringing_s, g.multipath_s)


def build_budget_input(scenario: Scenario) -> BudgetInput:
    if scenario.budget is None:
        raise ConfigError(f"scenario '{scenario.name}' has no budget block")
    return BudgetInput(**scenario.budget.model_dump(exclude={"ripple_fixture"}))
