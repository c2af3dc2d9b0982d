from .sessions import (  # noqa: F401
    GatewayConfig,
    GatewayError,
    Pipeline,
    SessionStore,
    TurnRecord,
    bootstrap_demo_artifacts,
)
from .service import create_app  # noqa: F401
