import logging
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

from app.config import settings
from app.api import health, schedule, budget, e2e

# ==========================================
# CLEAN LOGGING CONFIGURATION
# ==========================================
logging.basicConfig(
    level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
    format="%(levelname)s:%(name)s:%(message)s"
)
logger = logging.getLogger(__name__)


# Filter out "/health" spam from the terminal
class HealthCheckFilter(logging.Filter):
    def filter(self, record: logging.LogRecord) -> bool:
        return "/health" not in record.getMessage()


logging.getLogger("uvicorn.access").addFilter(HealthCheckFilter())
# ==========================================


def create_app() -> FastAPI:
    app = FastAPI(
        title="FaA Near-Field Simulator",
        description="Batch schedule, link-budget and end-to-end imaging runs for frequency-as-aperture FMCW sensing",
        version="1.0.0",
    )

    # ---- CORS for local dashboards ----
    app.add_middleware(
        CORSMiddleware,
        allow_origins=settings.CORS_ORIGINS,
        allow_methods=["GET", "POST"],
        allow_headers=["*"],
    )

    # ---- Register Routers ----
    app.include_router(health.router, prefix="/api/health", tags=["Health"])
    app.include_router(schedule.router, prefix="/api/schedule", tags=["Schedule"])
    app.include_router(budget.router, prefix="/api/budget", tags=["Budget"])
    app.include_router(e2e.router, prefix="/api/e2e", tags=["Runs"])

    @app.get("/")
    async def root():
        return {
            "message": "FaA simulator is running",
            "docs_url": "/docs",
            "health_url": "/api/health"
        }

    logger.info(f"App created (env={settings.ENV})")
    return app


app = create_app()

if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)
