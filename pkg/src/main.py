"""集約クエリ PIR サーバ - FastAPI アプリケーション"""

import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI

from config.settings import settings
from src.api.pir import router as pir_router
from src.crypto.field import verify_presets
from src.models.catalog import Catalog
from src.protocol.deployment import load_server_state
from src.protocol.server import ServerState

logging.basicConfig(
    level=getattr(logging, settings.log_level),
    format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
)
logger = logging.getLogger(__name__)

VERSION = "1.0.0"


def create_app(state: ServerState | None = None, catalog: Catalog | None = None) -> FastAPI:
    """state を渡さなければ起動時に settings.deploy_dir から読み込む。"""

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        # 起動時
        verify_presets()
        if app.state.server is None:
            logger.info("Loading server %d from %s", settings.server_index, settings.deploy_dir)
            app.state.server, app.state.catalog = load_server_state(
                settings.deploy_dir, settings.server_index,
            )
        logger.info("PIR server at x=%d ready", app.state.server.coord)

        yield

        # 終了時
        logger.info("PIR server at x=%d shutdown complete", app.state.server.coord)

    app = FastAPI(
        title="IAQ PIR server",
        description="集約クエリ索引つき IT-PIR の 1 サーバ",
        version=VERSION,
        lifespan=lifespan,
    )
    app.state.server = state
    app.state.catalog = catalog
    app.include_router(pir_router)

    @app.get("/")
    async def root():
        server = app.state.server
        return {
            "name": "iaq-pir",
            "version": VERSION,
            "coordinate": server.coord if server else None,
            "keywords": sorted(server.buckets) if server else [],
        }

    @app.get("/health")
    async def health():
        return {"status": "ok" if app.state.server is not None else "loading"}

    return app


app = create_app()
