"""Protocol error taxonomy.

Every rejected operation raises a subclass of ProtocolError. The class name
doubles as the revert-reason code that appears in transaction receipts and
trace lines, so names mirror the protocol vocabulary rather than PEP 8
"...Error" spelling.
"""

from __future__ import annotations


class ProtocolError(Exception):
    """Base for all simulated protocol reverts."""

    @property
    def code(self) -> str:
        return type(self).__name__

    def __str__(self) -> str:
        msg = super().__str__()
        return f"{self.code}: {msg}" if msg else self.code


# --- codec ---

class CodecError(ProtocolError):
    pass


class TooShort(CodecError):
    pass


class GuidMismatch(CodecError):
    pass


class UnknownType(CodecError):
    pass


class Truncated(CodecError):
    pass


class LengthMismatch(CodecError):
    pass


# --- channel / endpoint ---

class ChannelError(ProtocolError):
    pass


class NoSendLibrary(ChannelError):
    pass


class NoReceiveStack(ChannelError):
    pass


class PayloadTooLarge(ChannelError):
    pass


class NotSender(ChannelError):
    pass


class NotReceiver(ChannelError):
    pass


class NotReceiveLibrary(ChannelError):
    pass


class StalePacket(ChannelError):
    pass


class Censorship(ChannelError):
    pass


class HashMismatch(ChannelError):
    pass


class AlreadyDelivered(ChannelError):
    pass


class Nilified(ChannelError):
    pass


class WrongNonce(ChannelError):
    pass


class NoEntry(ChannelError):
    pass


class NonceAhead(ChannelError):
    pass


class NotOwner(ChannelError):
    pass


class InvalidStack(ChannelError):
    pass


class UnknownLibrary(ChannelError):
    pass


class DuplicateCompose(ChannelError):
    pass


class NoSuchCompose(ChannelError):
    pass


class AlreadyExecuted(ChannelError):
    pass


# --- message libraries ---

class MsgLibError(ProtocolError):
    pass


class NotAdmin(MsgLibError):
    pass


class DuplicateVersion(MsgLibError):
    pass


class InsufficientBalance(MsgLibError):
    pass


class DuplicateAttestation(MsgLibError):
    pass


class NotWhitelisted(MsgLibError):
    pass


class WrongVersion(MsgLibError):
    """Library asked to handle a packet whose version maps to another major."""


# --- simulated chains ---

class SimError(ProtocolError):
    pass


class UnknownChain(SimError):
    pass


class RangeAhead(SimError):
    pass


class OutOfBudget(SimError):
    """Per-transaction iteration budget exhausted; the transaction rolls back."""


class CallbackAbort(ProtocolError):
    """Raised by application callbacks to abort the enclosing delivery/compose."""

    def __init__(self, reason: str = ""):
        super().__init__(reason)
        self.reason = reason
