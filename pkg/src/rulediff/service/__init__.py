from .client import HttpServiceClient, LocalServiceClient, ServiceClient, ServiceTransportError
from .faults import (
    CATEGORY_ORDER,
    DEFAULT_DATE_FORMAT,
    FaultConfig,
    ServiceResponse,
    ServiceResult,
    validate_message,
)
from .server import HEALTH_PATH, VALIDATION_PATH, RuleService, embedded_service, make_server

__all__ = [
    "HttpServiceClient", "LocalServiceClient", "ServiceClient", "ServiceTransportError",
    "CATEGORY_ORDER", "DEFAULT_DATE_FORMAT", "FaultConfig", "ServiceResponse", "ServiceResult",
    "validate_message",
    "HEALTH_PATH", "VALIDATION_PATH", "RuleService", "embedded_service", "make_server",
]
