"""The immutable per-chain endpoint.

Owns the lossless channel state machine (exactly-once, out-of-order delivery
behind a gapless nonce), the per-OApp Security Stack registry, and the
compose queue. One endpoint instance per simulated chain; it is mutated only
by that chain's transaction executor.

Channel bookkeeping follows the lazy-inbound-nonce scheme: the channel stores
verified payload hashes per nonce, tracks the highest delivered-or-skipped
nonce, and deletes a hash when its packet is consumed. Delivery of nonce n
requires every nonce in (lazy, n] to hold a live verified hash, which the
delivery transaction walks step by step (each step charges the chain's
iteration meter).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

from .codec import Address, MessageOptions, PacketHeader, Path, compute_guid, encode_options, payload_hash
from .errors import (
    AlreadyDelivered,
    AlreadyExecuted,
    Censorship,
    DuplicateCompose,
    HashMismatch,
    InvalidStack,
    Nilified,
    NoEntry,
    NonceAhead,
    NoReceiveStack,
    NoSendLibrary,
    NoSuchCompose,
    NotOwner,
    NotReceiver,
    NotReceiveLibrary,
    NotSender,
    PayloadTooLarge,
    StalePacket,
    UnknownLibrary,
    WrongNonce,
)
from .events import ComposeDelivered, ComposeSent, PacketDelivered, PayloadVerified, StackConfigured

MAX_TOTAL_DVNS = 254


class _Nil:
    """Distinguished sentinel stored in place of an invalidated payload hash."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NIL"

    def __copy__(self):
        return self

    def __deepcopy__(self, memo):
        return self


NIL = _Nil()


class LibVersion(NamedTuple):
    lib_id: int
    major: int
    minor: int

    def label(self) -> str:
        return f"{self.lib_id}@{self.major}.{self.minor}"


@dataclass(frozen=True)
class SecurityStack:
    """Extrinsic security configuration, owned exclusively by one OApp.

    With is_default_opt_in set, every other field is ignored and resolution
    follows the chain's admin-maintained default for the remote eid.
    """

    send_library: LibVersion | None = None
    receive_library: LibVersion | None = None
    prev_receive_library: LibVersion | None = None
    grace_period_end: int | None = None
    required_dvns: frozenset[str] = frozenset()
    optional_dvns: frozenset[str] = frozenset()
    optional_threshold: int = 0
    executor: str | None = None
    is_default_opt_in: bool = False

    def validate(self):
        if self.is_default_opt_in:
            return
        if self.send_library is None or self.receive_library is None:
            raise InvalidStack("send and receive libraries must be set")
        if self.required_dvns & self.optional_dvns:
            raise InvalidStack("required and optional DVN sets overlap")
        if self.optional_threshold > len(self.optional_dvns):
            raise InvalidStack("threshold exceeds optional DVN count")
        if len(self.required_dvns) + len(self.optional_dvns) > MAX_TOTAL_DVNS:
            raise InvalidStack(f"more than {MAX_TOTAL_DVNS} DVNs")
        if not self.required_dvns and not self.optional_dvns:
            raise InvalidStack("at least one DVN required")

    @classmethod
    def default_opt_in(cls) -> SecurityStack:
        return cls(is_default_opt_in=True)

    def all_dvns(self) -> tuple[str, ...]:
        return tuple(sorted(self.required_dvns | self.optional_dvns))


@dataclass
class ChannelState:
    """Per-path lossless channel bookkeeping."""

    outbound_nonce: int = 0
    lazy_inbound_nonce: int = 0
    verified: dict = field(default_factory=dict)  # nonce -> bytes payload hash | NIL

    def snapshot(self):
        return (self.outbound_nonce, self.lazy_inbound_nonce, dict(self.verified))

    def restore(self, snap):
        self.outbound_nonce, self.lazy_inbound_nonce, verified = snap
        self.verified = dict(verified)


COMPOSE_STORED = "stored"
COMPOSE_EXECUTED = "executed"


@dataclass(frozen=True)
class ComposeEntry:
    message_hash: bytes
    state: str


@dataclass(frozen=True)
class DeliveryReceipt:
    guid: bytes
    nonce: int
    outcome: str  # "delivered" / "executed"


class Endpoint:
    """Channel state machine + configuration registry for one chain."""

    def __init__(self, chain):
        self.chain = chain
        self.channels: dict[Path, ChannelState] = {}
        self.stacks: dict[tuple[Address, int], SecurityStack] = {}
        self.default_stacks: dict[int, SecurityStack] = {}
        self.pending_stacks: list[tuple[Address, int, SecurityStack]] = []
        self.compose_queue: dict[tuple[Address, Address, bytes, int], ComposeEntry] = {}

    # -- configuration ----------------------------------------------------

    def set_security_stack(self, caller: Address, owner: Address, remote_eid: int,
                           stack: SecurityStack, immediate: bool = False):
        """Replace the owner's stack for one remote. Mid-run changes take
        effect at the next block boundary so every transaction in a block
        sees one consistent stack; initial deployment applies immediately."""
        if caller != owner:
            raise NotOwner("only the OApp itself may configure its stack")
        stack.validate()
        self._check_registered(stack)
        if immediate:
            self.stacks[(owner, remote_eid)] = stack
        else:
            self.pending_stacks.append((owner, remote_eid, stack))
        self.chain.emit(StackConfigured(owner, remote_eid))

    def set_receive_library_with_grace(self, caller: Address, owner: Address,
                                       remote_eid: int, new_lib: LibVersion,
                                       grace_period_blocks: int, immediate: bool = False):
        if caller != owner:
            raise NotOwner("only the OApp itself may configure its stack")
        if not self.chain.registry.is_registered(new_lib):
            raise UnknownLibrary(new_lib.label())
        current = self.stacks.get((owner, remote_eid))
        if current is None or current.is_default_opt_in:
            raise NoReceiveStack("no explicit stack to migrate")
        updated = replace(
            current,
            receive_library=new_lib,
            prev_receive_library=current.receive_library,
            grace_period_end=self.chain.height + grace_period_blocks,
        )
        if immediate:
            self.stacks[(owner, remote_eid)] = updated
        else:
            self.pending_stacks.append((owner, remote_eid, updated))
        self.chain.emit(StackConfigured(owner, remote_eid))

    def set_default_stack(self, remote_eid: int, stack: SecurityStack):
        """Admin-maintained default resolved by opted-in OApps."""
        stack.validate()
        self._check_registered(stack)
        self.default_stacks[remote_eid] = stack

    def apply_pending_stacks(self):
        for owner, remote_eid, stack in self.pending_stacks:
            self.stacks[(owner, remote_eid)] = stack
        self.pending_stacks.clear()

    def resolve_stack(self, owner: Address, remote_eid: int) -> SecurityStack | None:
        record = self.stacks.get((owner, remote_eid))
        if record is None:
            return None
        if record.is_default_opt_in:
            return self.default_stacks.get(remote_eid)
        return record

    def _check_registered(self, stack: SecurityStack):
        if stack.is_default_opt_in:
            return
        for lib in (stack.send_library, stack.receive_library):
            if not self.chain.registry.is_registered(lib):
                raise UnknownLibrary(lib.label())

    # -- channel: send side ------------------------------------------------

    def channel(self, path: Path) -> ChannelState:
        state = self.channels.get(path)
        if state is None:
            state = self.channels[path] = ChannelState()
        return state

    def send(self, caller: Address, path: Path, payload: bytes,
             options: MessageOptions | bytes | None) -> PacketHeader:
        if path.src_eid != self.chain.eid:
            raise ValueError("path does not originate on this chain")
        if caller != path.sender:
            raise NotSender("send must come from the path sender")
        if len(payload) > self.chain.config.max_payload:
            raise PayloadTooLarge(f"{len(payload)} > {self.chain.config.max_payload}")
        stack = self.resolve_stack(path.sender, path.dst_eid)
        if stack is None or stack.send_library is None:
            raise NoSendLibrary(f"no stack for remote eid {path.dst_eid}")
        lib = self.chain.lib_instance(stack.send_library)
        options_bytes = _options_bytes(options)

        channel = self.channel(path)
        nonce = channel.outbound_nonce + 1
        header = PacketHeader.make(stack.send_library.major, nonce, path)
        lib.send_side(header, bytes(payload), options_bytes, stack)
        channel.outbound_nonce = nonce
        return header

    # -- channel: receive side ----------------------------------------------

    def commit_verification(self, lib_key: LibVersion, header: PacketHeader,
                            verified_hash: bytes):
        """Store a verified payload hash. Only the receiver's configured
        receive library (or the previous one inside its grace window) may
        commit; prior entries, including NIL, are overwritten so a nilified
        nonce can be recovered by an honest re-commit."""
        path = header.path
        stack = self.resolve_stack(path.receiver, path.src_eid)
        if stack is None or stack.receive_library is None:
            raise NoReceiveStack(f"receiver has no stack for eid {path.src_eid}")
        if lib_key != stack.receive_library:
            in_grace = (
                stack.prev_receive_library is not None
                and lib_key == stack.prev_receive_library
                and stack.grace_period_end is not None
                and self.chain.height <= stack.grace_period_end
            )
            if not in_grace:
                raise NotReceiveLibrary(lib_key.label())
        channel = self.channel(path)
        if header.nonce <= channel.lazy_inbound_nonce:
            raise StalePacket(f"nonce {header.nonce} at or below lazy inbound nonce")
        channel.verified[header.nonce] = verified_hash
        self.chain.emit(PayloadVerified(path, header.nonce, verified_hash))

    def get_inbound_nonce(self, path: Path, iteration_budget: int | None = None) -> int:
        """Largest nonce with every predecessor after the lazy nonce verified.

        Pure read. The walk visits at most iteration_budget nonces; running
        out returns the last nonce reached, never an error.
        """
        channel = self.channels.get(path)
        if channel is None:
            return 0
        return self._frontier(channel, budget=iteration_budget)

    def _frontier(self, channel: ChannelState, stop: int | None = None,
                  budget: int | None = None, metered: bool = False) -> int:
        """Walk the verified prefix from the lazy nonce. NIL blocks the walk."""
        nonce = channel.lazy_inbound_nonce
        steps = 0
        while stop is None or nonce < stop:
            if budget is not None and steps >= budget:
                break
            entry = channel.verified.get(nonce + 1)
            if entry is None or entry is NIL:
                break
            if metered:
                self.chain.meter.charge(1)
            steps += 1
            nonce += 1
        return nonce

    def _check_deliverable(self, channel: ChannelState, nonce: int,
                           guid: bytes, message: bytes):
        """Shared gate for lz_receive and clear; raises on any obstacle."""
        entry = channel.verified.get(nonce)
        if nonce <= channel.lazy_inbound_nonce:
            if entry is None:
                raise AlreadyDelivered(f"nonce {nonce}")
        if entry is NIL:
            raise Nilified(f"nonce {nonce}")
        if nonce > channel.lazy_inbound_nonce:
            # every nonce in (lazy, n] must hold a live hash; metered walk
            frontier = self._frontier(channel, stop=nonce, metered=True)
            if frontier < nonce:
                raise Censorship(f"nonce {frontier + 1} not verified")
        if entry != payload_hash(guid, message):
            raise HashMismatch(f"nonce {nonce}")

    def lz_receive(self, caller, path: Path, nonce: int, guid: bytes,
                   message: bytes, extra: bytes = b"") -> DeliveryReceipt:
        """Deliver a committed packet. Permissionless. The verified hash is
        deleted and the lazy nonce raised before the receiver callback runs;
        a callback abort must roll back the enclosing transaction."""
        channel = self.channel(path)
        self._check_deliverable(channel, nonce, guid, message)
        del channel.verified[nonce]
        channel.lazy_inbound_nonce = max(channel.lazy_inbound_nonce, nonce)
        self.chain.meter.charge(1)  # callback execution step
        app = self.chain.apps.get(path.receiver)
        if app is not None and hasattr(app, "on_lz_receive"):
            app.on_lz_receive(self, path, nonce, guid, message, extra)
        self.chain.emit(PacketDelivered(guid, path, nonce))
        return DeliveryReceipt(guid, nonce, "delivered")

    def skip(self, caller: Address, path: Path, nonce: int):
        """Receiver-only: give up on the next undelivered nonce without
        requiring verification. The nonce becomes permanently undeliverable."""
        if caller != path.receiver:
            raise NotReceiver("skip is receiver-only")
        channel = self.channel(path)
        inbound = self._frontier(channel, metered=True)
        if nonce != inbound + 1:
            raise WrongNonce(f"skip requires nonce {inbound + 1}, got {nonce}")
        channel.lazy_inbound_nonce = nonce
        channel.verified.pop(nonce, None)

    def clear(self, caller: Address, path: Path, nonce: int, guid: bytes,
              message: bytes):
        """Receiver-only delivery without execution: same gates and channel
        effect as lz_receive, but the receiver callback is not invoked."""
        if caller != path.receiver:
            raise NotReceiver("clear is receiver-only")
        channel = self.channel(path)
        self._check_deliverable(channel, nonce, guid, message)
        del channel.verified[nonce]
        channel.lazy_inbound_nonce = max(channel.lazy_inbound_nonce, nonce)

    def nilify(self, caller: Address, path: Path, nonce: int, expected_hash):
        """Receiver-only compare-and-invalidate of a verified, undelivered
        hash. The NIL left behind blocks the inbound walk until a library
        commits a fresh hash for the nonce."""
        if caller != path.receiver:
            raise NotReceiver("nilify is receiver-only")
        channel = self.channel(path)
        if nonce <= channel.lazy_inbound_nonce:
            raise StalePacket(f"nonce {nonce} at or below lazy inbound nonce")
        entry = channel.verified.get(nonce)
        if entry is None or entry is NIL:
            raise NoEntry(f"nonce {nonce}")
        if entry != expected_hash:
            raise HashMismatch(f"nonce {nonce}")
        channel.verified[nonce] = NIL

    def burn(self, caller: Address, path: Path, nonce: int, expected_hash):
        """Receiver-only removal of an entry at or below the lazy nonce,
        without needing the packet contents. NIL is a legal expected hash so
        a nilified leftover can be purged."""
        if caller != path.receiver:
            raise NotReceiver("burn is receiver-only")
        channel = self.channel(path)
        if nonce > channel.lazy_inbound_nonce:
            raise NonceAhead("burn only applies at or below the lazy inbound nonce")
        if nonce not in channel.verified:
            raise NoEntry(f"nonce {nonce}")
        entry = channel.verified[nonce]
        if entry is NIL or expected_hash is NIL:
            if entry is not expected_hash:
                raise HashMismatch(f"nonce {nonce}")
        elif entry != expected_hash:
            raise HashMismatch(f"nonce {nonce}")
        del channel.verified[nonce]

    # -- composition --------------------------------------------------------

    def send_compose(self, sender: Address, to: Address, guid: bytes,
                     index: int, message: bytes):
        """Store a composed payload for later exactly-once execution.
        Intended to be called from inside a delivery or compose callback."""
        key = (sender, to, guid, index)
        if key in self.compose_queue:
            raise DuplicateCompose(f"index {index}")
        self.compose_queue[key] = ComposeEntry(payload_hash(guid, message), COMPOSE_STORED)
        self.chain.emit(ComposeSent(sender, to, guid, index, message))

    def lz_compose(self, caller, sender: Address, to: Address, guid: bytes,
                   index: int, message: bytes) -> DeliveryReceipt:
        """Execute a stored compose entry. Permissionless. A callback abort
        rolls back the enclosing transaction, leaving the entry retryable."""
        key = (sender, to, guid, index)
        entry = self.compose_queue.get(key)
        if entry is None:
            raise NoSuchCompose(f"index {index}")
        if entry.state == COMPOSE_EXECUTED:
            raise AlreadyExecuted(f"index {index}")
        if entry.message_hash != payload_hash(guid, message):
            raise HashMismatch(f"compose index {index}")
        self.compose_queue[key] = ComposeEntry(entry.message_hash, COMPOSE_EXECUTED)
        self.chain.meter.charge(1)
        app = self.chain.apps.get(to)
        if app is not None and hasattr(app, "on_lz_compose"):
            app.on_lz_compose(self, sender, guid, index, message)
        self.chain.emit(ComposeDelivered(sender, to, guid, index))
        return DeliveryReceipt(guid, index, "executed")

    # -- snapshots (transaction atomicity) -----------------------------------

    def snapshot(self):
        return (
            {path: ch.snapshot() for path, ch in self.channels.items()},
            dict(self.stacks),
            dict(self.default_stacks),
            list(self.pending_stacks),
            dict(self.compose_queue),
        )

    def restore(self, snap):
        channels, stacks, defaults, pending, compose = snap
        self.channels = {}
        for path, ch_snap in channels.items():
            state = ChannelState()
            state.restore(ch_snap)
            self.channels[path] = state
        self.stacks = dict(stacks)
        self.default_stacks = dict(defaults)
        self.pending_stacks = list(pending)
        self.compose_queue = dict(compose)


def _options_bytes(options: MessageOptions | bytes | None) -> bytes:
    if options is None:
        return b""
    if isinstance(options, (bytes, bytearray)):
        return bytes(options)
    return encode_options(options)
