"""Security-game and scenario harness for the recursive token mechanism."""

from .flows import SCENARIOS, FlowReport, FlowStep, MockService, run_flow
from .games import (
    GAME_COMMANDS,
    GAME_NOW,
    TAG_BITS_CHOICES,
    GameOracles,
    GameOutcome,
    OracleTranscript,
    run_game_ftt,
    run_game_utt,
)
from .strategies import (
    STRATEGIES,
    BitFlip,
    CrossServiceKeyless,
    ExtendObserved,
    LeakedServiceKey,
    RandomTag,
    TruncateLayer,
    make_strategy,
)

__all__ = [
    "GAME_COMMANDS",
    "GAME_NOW",
    "TAG_BITS_CHOICES",
    "GameOracles",
    "GameOutcome",
    "OracleTranscript",
    "run_game_ftt",
    "run_game_utt",
    "SCENARIOS",
    "FlowReport",
    "FlowStep",
    "MockService",
    "run_flow",
    "STRATEGIES",
    "BitFlip",
    "CrossServiceKeyless",
    "ExtendObserved",
    "LeakedServiceKey",
    "RandomTag",
    "TruncateLayer",
    "make_strategy",
]
