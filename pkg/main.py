from __future__ import annotations

import logging
import os

import uvicorn
from dotenv import load_dotenv
from fastapi import FastAPI

from api import router
from kappa_mu_relay import __version__


def create_app() -> FastAPI:
    """Create the FastAPI application serving the outage endpoints."""
    fastapi_app = FastAPI(title="kappa-mu relay outage", version=__version__)
    fastapi_app.include_router(router)
    return fastapi_app


app: FastAPI = create_app()


def main() -> None:
    """Run a development server for the outage API."""
    load_dotenv()
    logging.basicConfig(level=os.getenv("KMR_LOG_LEVEL", "INFO"))
    port = int(os.getenv("PORT", "8000"))
    uvicorn.run("main:app", host="0.0.0.0", port=port, reload=False)


if __name__ == "__main__":
    main()
