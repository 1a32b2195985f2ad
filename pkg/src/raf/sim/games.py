"""Monte Carlo forgery games against the recursive token construction.

A game pits an adversary strategy against a challenger that holds fresh
keys for every trial. The challenger exposes three oracles: depth-1
issuance from its secret root token, child issuance from any token the
adversary presents, and verification. Every token an oracle hands out is
recorded first, and the adversary's final candidate only counts as a win
when it verifies AND falls outside what the oracles gave away:

* user-tied game: the candidate and every ancestor of it must be outside
  the transcript;
* fully-tied game: the candidate must be outside the transcript and its
  outermost layer must not be signed by a leaked service key.

Tag width is adjustable (8/16/32/256 bits) so the guessing bound 2^-t is
empirically observable at small widths; 256 is the production width.
"""

from __future__ import annotations

import dataclasses
import multiprocessing
import random
from functools import lru_cache

from ..codec import b64url_decode
from ..errors import TokenError
from ..fernet import FernetKey, fernet_issue
from ..payload import TokenPayload
from ..policy import PolicyRuleSet, find_service_key, sample_policy
from ..token import (
    RAF_VERSION,
    ServiceKeySet,
    Variant,
    service_issue_ft,
    service_issue_ut,
    user_issue,
    verify_ft,
    verify_ut,
)

__all__ = [
    "GAME_NOW",
    "TAG_BITS_CHOICES",
    "OracleTranscript",
    "GameOracles",
    "GameOutcome",
    "run_game_utt",
    "run_game_ftt",
]

# Fixed logical clock: all trial randomness flows from the seed, so wall
# time must not leak into issued tokens.
GAME_NOW = 1_700_000_000

TAG_BITS_CHOICES = (8, 16, 32, 256)

_PAYLOAD = TokenPayload(
    user_id="u-game",
    project_id="p-game",
    methods=("password",),
    expires_at=GAME_NOW + 3600,
    audit_id="game-root",
)

# Route-diverse command vocabulary matching the bundled sample policy.
GAME_COMMANDS = (
    'compute/v2.1/servers {"server": {"name": "vm-a"}}',
    'network/v2.0/ports {"port": {"network_id": "net-1"}}',
    'volume/v3/volumes {"volume": {"size": 10}}',
    "image/v2/images",
)


@lru_cache(maxsize=1)
def _routing() -> PolicyRuleSet:
    return sample_policy()


@dataclasses.dataclass
class OracleTranscript:
    """Everything the challenger has handed to the adversary so far."""

    phi: set  # decoded bytes of every token an issue oracle returned
    query_count: int = 0
    leaked_keys: frozenset = frozenset()

    def messages(self, tag_bytes: int) -> set:
        """Signed messages of the transcript tokens (for ancestor checks)."""
        return {raw[:-tag_bytes] for raw in self.phi}


class GameOracles:
    """Challenger-side oracles for one trial.

    The root token and key material stay private; strategies interact only
    through the issue/verify methods and the public attributes (rng, tag
    width, routing table, command vocabulary, leaked keys).
    """

    def __init__(
        self,
        variant: Variant,
        key: FernetKey,
        root_token: str,
        keyset: ServiceKeySet | None,
        transcript: OracleTranscript,
        rng: random.Random,
        tag_bytes: int,
        leaked_keys: dict,
    ):
        self._key = key
        self._root_token = root_token
        self._keyset = keyset
        self._transcript = transcript
        self.variant = variant
        self.rng = rng
        self.tag_bytes = tag_bytes
        self.now = GAME_NOW
        self.routing = _routing()
        self.commands = GAME_COMMANDS
        self.leaked_keys = dict(leaked_keys)

    def _record(self, token: str) -> str:
        # recorded before the adversary ever sees it
        self._transcript.phi.add(b64url_decode(token))
        return token

    def user_issue(self, command, lifetime: int = 600) -> str:
        """Depth-1 issuance from the challenger's secret root token."""
        self._transcript.query_count += 1
        token = user_issue(
            self._root_token,
            command,
            lifetime,
            self.now,
            self.rng.randbytes(8),
            tag_bytes=self.tag_bytes,
        )
        return self._record(token)

    def service_issue(self, parent: str, command, lifetime: int = 600):
        """Extend an adversary-supplied token; None when the parent fails
        the internal verification gate (or the command has no route)."""
        self._transcript.query_count += 1
        try:
            if self.variant is Variant.FULLY_TIED:
                index = find_service_key(self.routing, _as_bytes(command))
                token = service_issue_ft(
                    index,
                    self._keyset,
                    self.routing,
                    parent,
                    command,
                    lifetime,
                    self.now,
                    self.rng.randbytes(8),
                    tag_bytes=self.tag_bytes,
                )
            else:
                token = service_issue_ut(
                    parent,
                    command,
                    lifetime,
                    self.now,
                    self.rng.randbytes(8),
                    verify_key=self._key,
                    tag_bytes=self.tag_bytes,
                )
        except TokenError:
            return None
        return self._record(token)

    def ver(self, token) -> bool:
        """Verification oracle; returns a bit and records nothing."""
        self._transcript.query_count += 1
        try:
            self._verify(token)
        except TokenError:
            return False
        return True

    def _verify(self, token):
        if self.variant is Variant.FULLY_TIED:
            return verify_ft(
                self._keyset, self.routing, token, self.now, tag_bytes=self.tag_bytes
            )
        return verify_ut(self._key, token, self.now, tag_bytes=self.tag_bytes)


@dataclasses.dataclass(frozen=True)
class GameOutcome:
    """Aggregate result of one game run.

    ``wins`` counts trials whose candidate met every win clause;
    ``ver_successes`` counts candidates that merely passed verification,
    which separates "cryptographically valid" from "counts as a forgery"
    (a delegated descendant of an observed token is the canonical example
    of the former without the latter).
    """

    game: str
    strategy: str
    trials: int
    tag_bits: int
    seed: int
    wins: int
    ver_successes: int
    won: bool
    forged_token: bytes | None

    @property
    def win_rate(self) -> float:
        return self.wins / self.trials


@dataclasses.dataclass(frozen=True)
class _GameSpec:
    variant: Variant
    strategy: object
    seed: int
    tag_bytes: int
    leaked: frozenset


def _as_bytes(command) -> bytes:
    return command.encode("utf-8") if isinstance(command, str) else bytes(command)


def _ancestor_messages(message: bytes) -> list:
    """Embedded messages below a token's own, outermost-first."""
    out = []
    current = message
    while current[0] == RAF_VERSION:
        parent_len = int.from_bytes(current[1:3], "big")
        current = current[3 : 3 + parent_len]
        out.append(current)
    return out


def _judge(spec: _GameSpec, oracles: GameOracles, transcript, candidate):
    """Score one candidate: (verified, won, decoded bytes)."""
    try:
        raw = b64url_decode(candidate)
        chain = oracles._verify(candidate)
    except TokenError:
        return False, False, None
    if raw in transcript.phi:
        return True, False, raw
    if spec.variant is Variant.USER_TIED:
        phi_messages = transcript.messages(spec.tag_bytes)
        message = raw[: -spec.tag_bytes]
        intact = message not in phi_messages and not any(
            ancestor in phi_messages for ancestor in _ancestor_messages(message)
        )
        return True, intact, raw
    if chain.depth >= 2:
        signer = find_service_key(oracles.routing, chain.commands[-1])
        if signer in spec.leaked:
            return True, False, raw
    return True, True, raw


def _run_range(spec: _GameSpec, lo: int, hi: int):
    """Play trials [lo, hi); returns a commutative-reducible partial."""
    wins = 0
    ver_successes = 0
    first_index = None
    forged = None
    fully = spec.variant is Variant.FULLY_TIED
    routing = _routing()
    n_services = len(routing.services)
    for i in range(lo, hi):
        rng = random.Random(f"{spec.seed}:{i}")
        key = FernetKey(rng.randbytes(32))
        root = fernet_issue(key, _PAYLOAD, GAME_NOW, rng.randbytes(16))
        keyset = None
        leaked_keys = {}
        if fully:
            keyset = ServiceKeySet.assemble(
                key, [rng.randbytes(32) for _ in range(n_services)]
            )
            leaked_keys = {index: keyset.key(index) for index in sorted(spec.leaked)}
        transcript = OracleTranscript(phi=set(), leaked_keys=spec.leaked)
        oracles = GameOracles(
            spec.variant, key, root, keyset, transcript, rng, spec.tag_bytes, leaked_keys
        )
        candidate = spec.strategy.play(oracles, transcript)
        verified, won, raw = _judge(spec, oracles, transcript, candidate)
        if verified:
            ver_successes += 1
        if won:
            wins += 1
            if first_index is None:
                first_index = i
                forged = raw
    return wins, ver_successes, first_index, forged


def _run_game(
    game: str,
    variant: Variant,
    strategy,
    trials: int,
    tag_bits: int,
    seed: int,
    leaked: frozenset,
    workers,
) -> GameOutcome:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if tag_bits not in TAG_BITS_CHOICES:
        raise ValueError(f"tag_bits must be one of {TAG_BITS_CHOICES}")
    spec = _GameSpec(variant, strategy, seed, tag_bits // 8, frozenset(leaked))
    if workers and workers > 1 and trials > 1:
        step = -(-trials // workers)
        ranges = [(spec, lo, min(lo + step, trials)) for lo in range(0, trials, step)]
        with multiprocessing.Pool(workers) as pool:
            partials = pool.starmap(_run_range, ranges)
    else:
        partials = [_run_range(spec, 0, trials)]
    wins = sum(p[0] for p in partials)
    ver_successes = sum(p[1] for p in partials)
    forged = min(
        (p for p in partials if p[2] is not None), key=lambda p: p[2], default=None
    )
    return GameOutcome(
        game=game,
        strategy=getattr(strategy, "name", type(strategy).__name__),
        trials=trials,
        tag_bits=tag_bits,
        seed=seed,
        wins=wins,
        ver_successes=ver_successes,
        won=wins > 0,
        forged_token=forged[3] if forged else None,
    )


def run_game_utt(
    strategy, trials: int, tag_bits: int = 256, seed: int = 0, *, workers=None
) -> GameOutcome:
    """Forgery game against the user-tied construction.

    A win requires the candidate to verify while neither it nor any of its
    ancestors were handed out by the oracles.
    """
    return _run_game(
        "forge-utt", Variant.USER_TIED, strategy, trials, tag_bits, seed, frozenset(), workers
    )


def run_game_ftt(
    strategy,
    trials: int,
    leaked=frozenset(),
    tag_bits: int = 256,
    seed: int = 0,
    *,
    workers=None,
) -> GameOutcome:
    """Forgery game against the fully-tied construction.

    ``leaked`` names the service key indices the adversary knows. The root
    key (index 0) can never be leaked. A win requires the candidate to
    verify, to be absent from the transcript, and to not be the output of
    service issuance under a leaked key.
    """
    leaked = frozenset(leaked)
    n_services = len(_routing().services)
    if any(index < 1 or index > n_services for index in leaked):
        raise ValueError(
            f"leaked indices must be within 1..{n_services}; the root key is never leaked"
        )
    return _run_game(
        "forge-ftt", Variant.FULLY_TIED, strategy, trials, tag_bits, seed, leaked, workers
    )
