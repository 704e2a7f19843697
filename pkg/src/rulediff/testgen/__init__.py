from .parsing import (
    CASE_KEYS,
    SLOT_FOR,
    GeneratedTestSet,
    Hallucination,
    HallucinationReport,
    JsonDefect,
    exact_match,
    normalize_confidence,
    parse_response,
)
from .prompt import SYSTEM_PROMPT, Prompt, build_prompt
from .providers import (
    HttpChatProvider,
    MockProvider,
    MockScenario,
    Provider,
    ProviderConfigError,
    ProviderTransportError,
)
from .generate import (
    DEFAULT_REPS,
    DEFAULT_TEMPERATURE,
    GenerationRecord,
    TransportFailure,
    derive_seed,
    generate,
    generate_all,
    read_records,
    write_records,
)

__all__ = [
    "CASE_KEYS", "SLOT_FOR", "GeneratedTestSet", "Hallucination", "HallucinationReport", "JsonDefect",
    "exact_match", "normalize_confidence", "parse_response",
    "SYSTEM_PROMPT", "Prompt", "build_prompt",
    "HttpChatProvider", "MockProvider", "MockScenario", "Provider", "ProviderConfigError", "ProviderTransportError",
    "DEFAULT_REPS", "DEFAULT_TEMPERATURE", "GenerationRecord", "TransportFailure", "derive_seed",
    "generate", "generate_all", "read_records", "write_records",
]
