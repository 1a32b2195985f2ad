"""Built-in adversary strategies for the forgery games.

A strategy is a named object with ``play(oracles, transcript)`` returning
one candidate token per trial. Strategies draw every random choice from
``oracles.rng`` (so runs are seed-reproducible) and may only use key
material exposed through ``oracles.leaked_keys``.
"""

from __future__ import annotations

import hmac
from hashlib import sha256

from ..codec import b64url_decode, b64url_encode
from ..policy import find_service_key
from ..token import _HEADER_LEN, _build_message, _parse_layer, service_issue_ut

__all__ = [
    "RandomTag",
    "BitFlip",
    "TruncateLayer",
    "ExtendObserved",
    "CrossServiceKeyless",
    "LeakedServiceKey",
    "STRATEGIES",
    "make_strategy",
]


def _as_bytes(command) -> bytes:
    return command.encode("utf-8") if isinstance(command, str) else bytes(command)


def _observed_parts(oracles, token: str):
    raw = b64url_decode(token)
    return raw[: -oracles.tag_bytes], raw[-oracles.tag_bytes :]


class RandomTag:
    """Rebuild an observed token as a sibling with a different command and
    guess its tag uniformly.

    The embedded root message is reused but the signing key (derived from
    the root tag, which is never embedded) stays unknown, so the candidate
    verifies with probability exactly 2^-tag_bits.
    """

    name = "random-tag"

    def play(self, oracles, transcript) -> str:
        rng = oracles.rng
        observed = oracles.user_issue(oracles.commands[0], 600)
        message, _tag = _observed_parts(oracles, observed)
        layer = _parse_layer(message)
        forged = _build_message(
            layer.parent, _as_bytes(oracles.commands[1]), 500, oracles.now, rng.randbytes(8)
        )
        return b64url_encode(forged + rng.randbytes(oracles.tag_bytes))


class BitFlip:
    """Flip one random bit inside an observed token's command, keeping the
    stale tag. The mutated message no longer matches the tag."""

    name = "bit-flip"

    def play(self, oracles, transcript) -> str:
        rng = oracles.rng
        observed = oracles.user_issue(oracles.commands[0], 600)
        raw = bytearray(b64url_decode(observed))
        end = len(raw) - oracles.tag_bytes
        layer = _parse_layer(bytes(raw[:end]))
        start = _HEADER_LEN + len(layer.parent)
        bit = rng.randrange((end - start) * 8)
        raw[start + bit // 8] ^= 1 << (bit % 8)
        return b64url_encode(bytes(raw))


class TruncateLayer:
    """Strip the outermost layer of an observed depth-2 token and guess the
    parent's tag (the parent message is embedded, its tag never is).

    A correct guess merely reconstructs a token the oracle already issued,
    so this strategy demonstrates that shortening a delegation chain wins
    nothing.
    """

    name = "truncate-layer"

    def play(self, oracles, transcript) -> str:
        rng = oracles.rng
        inner = oracles.user_issue(oracles.commands[0], 600)
        outer = oracles.service_issue(inner, oracles.commands[1], 500)
        message, _tag = _observed_parts(oracles, outer if outer is not None else inner)
        layer = _parse_layer(message)
        return b64url_encode(layer.parent + rng.randbytes(oracles.tag_bytes))


class ExtendObserved:
    """Extend an observed token locally with the user-tied derivation rule.

    Possession of the parent makes the child verify, but the parent sits in
    the transcript, so the candidate never counts as a forgery.
    """

    name = "extend-observed"

    def play(self, oracles, transcript) -> str:
        observed = oracles.user_issue(oracles.commands[0], 600)
        return service_issue_ut(
            observed,
            oracles.commands[1],
            500,
            oracles.now,
            oracles.rng.randbytes(8),
            tag_bytes=oracles.tag_bytes,
        )


class CrossServiceKeyless:
    """Hold a valid depth-1 token and append a layer aimed at a service
    whose key is unknown, guessing the tag.

    Against the fully-tied rules this is the token-theft scenario: the
    stolen token alone must not let its holder reach another service.
    """

    name = "cross-service-keyless"

    def play(self, oracles, transcript) -> str:
        rng = oracles.rng
        observed = oracles.user_issue(oracles.commands[0], 600)
        message, _tag = _observed_parts(oracles, observed)
        child = _build_message(
            message, _as_bytes(oracles.commands[1]), 500, oracles.now, rng.randbytes(8)
        )
        return b64url_encode(child + rng.randbytes(oracles.tag_bytes))


class LeakedServiceKey:
    """Derive a child under a leaked service key, targeting that service.

    The candidate genuinely verifies, but the fully-tied win conditions
    exclude outputs signed by leaked keys: compromising one service's key
    forges tokens for that service alone. Without any leak it degrades to
    keyless guessing.
    """

    name = "leaked-service-key"

    def play(self, oracles, transcript) -> str:
        rng = oracles.rng
        observed = oracles.user_issue(oracles.commands[0], 600)
        message, tag = _observed_parts(oracles, observed)
        if not oracles.leaked_keys:
            child = _build_message(
                message, _as_bytes(oracles.commands[1]), 500, oracles.now, rng.randbytes(8)
            )
            return b64url_encode(child + rng.randbytes(oracles.tag_bytes))
        index, key = sorted(oracles.leaked_keys.items())[0]
        command = next(
            c
            for c in oracles.commands
            if find_service_key(oracles.routing, _as_bytes(c)) == index
        )
        child = _build_message(message, _as_bytes(command), 500, oracles.now, rng.randbytes(8))
        forged_tag = hmac.new(key, child + tag, sha256).digest()[: oracles.tag_bytes]
        return b64url_encode(child + forged_tag)


STRATEGIES = {
    strategy.name: strategy
    for strategy in (
        RandomTag,
        BitFlip,
        TruncateLayer,
        ExtendObserved,
        CrossServiceKeyless,
        LeakedServiceKey,
    )
}


def make_strategy(name: str):
    try:
        return STRATEGIES[name]()
    except KeyError:
        raise ValueError(
            f"unknown strategy {name!r}; choose from {', '.join(sorted(STRATEGIES))}"
        ) from None
