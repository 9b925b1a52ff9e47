"""Append-only message library registry and the verification libraries.

Registered library versions are immutable: nobody, the registry admin
included, can modify or remove one. Each simulated chain carries one
instance per registered (lib_id, major, minor); the quorum library instance
owns that chain's attestation store, keyed by (header hash, payload hash) so
an equivocating DVN produces a second key instead of overwriting anyone.

The packet version byte equals the major version of the send library that
emitted it, and an instance only handles packets of its own major.
"""

from __future__ import annotations

from dataclasses import dataclass

from .codec import Packet, PacketHeader, header_hash
from .endpoint import LibVersion, SecurityStack
from .errors import DuplicateAttestation, DuplicateVersion, InsufficientBalance, NotAdmin, NotWhitelisted, WrongVersion
from .events import PacketSent, PayloadAttested

KIND_ULN = "uln"
KIND_WHITELIST = "whitelist"

COMMITTED = "committed"
NOT_READY = "not_ready"


@dataclass(frozen=True)
class MessageLibRecord:
    """One immutable registry entry. frozen-forever by construction."""

    lib_id: int
    major: int
    minor: int
    kind: str = KIND_ULN
    allowlist: frozenset[str] = frozenset()  # whitelist kind only
    name: str = ""

    @property
    def version(self) -> LibVersion:
        return LibVersion(self.lib_id, self.major, self.minor)


class MessageLibRegistry:
    """Append-only version registry shared by every chain."""

    def __init__(self, admin):
        self.admin = admin
        self.records: list[MessageLibRecord] = []
        self._by_version: dict[LibVersion, MessageLibRecord] = {}

    def register(self, caller, record: MessageLibRecord) -> MessageLibRecord:
        if caller != self.admin:
            raise NotAdmin("registry appends are admin-only")
        if record.version in self._by_version:
            raise DuplicateVersion(record.version.label())
        self.records.append(record)
        self._by_version[record.version] = record
        return record

    def is_registered(self, version: LibVersion) -> bool:
        return version in self._by_version

    def get(self, version: LibVersion) -> MessageLibRecord | None:
        return self._by_version.get(version)

    def newest_with_major(self, major: int) -> MessageLibRecord | None:
        match = None
        for record in self.records:
            if record.major == major:
                match = record
        return match

    def versions(self) -> tuple[LibVersion, ...]:
        return tuple(r.version for r in self.records)


@dataclass(frozen=True)
class EmittedJob:
    """Send-side result: what was emitted and which workers were hired."""

    packet: Packet
    options_bytes: bytes
    dvn_ids: tuple[str, ...]
    executor_id: str | None


@dataclass(frozen=True)
class UlnConfigView:
    """Receiver quorum parameters, resolved from its stack at check time."""

    required_dvns: frozenset[str]
    optional_dvns: frozenset[str]
    optional_threshold: int

    @classmethod
    def from_stack(cls, stack: SecurityStack) -> UlnConfigView:
        return cls(stack.required_dvns, stack.optional_dvns, stack.optional_threshold)


def quorum_met(attesters, cfg: UlnConfigView) -> bool:
    """True iff all required DVNs and at least the optional threshold of
    optional DVNs are among the attesters. Unknown attesters never count."""
    attesters = set(attesters)
    if not cfg.required_dvns <= attesters:
        return False
    return len(attesters & cfg.optional_dvns) >= cfg.optional_threshold


class MessageLibInstance:
    """Per-chain instance of a registered library version."""

    def __init__(self, record: MessageLibRecord, chain):
        self.record = record
        self.key = record.version
        self.chain = chain

    def _check_version(self, header: PacketHeader):
        if header.version != self.key.major:
            raise WrongVersion(
                f"packet v{header.version} vs library major {self.key.major}")

    def send_side(self, header: PacketHeader, payload: bytes,
                  options_bytes: bytes, stack: SecurityStack) -> EmittedJob:
        """Debit flat worker fees from the sender and emit the packet."""
        self._check_version(header)
        dvn_ids = stack.all_dvns()
        fees = self.chain.fees
        total = fees.per_dvn * len(dvn_ids)
        if stack.executor is not None:
            total += fees.executor
        sender = header.path.sender
        if self.chain.balance(sender) < total:
            raise InsufficientBalance(f"need {total}")
        self.chain.debit(sender, total)
        for dvn in dvn_ids:
            self.chain.credit(dvn, fees.per_dvn)
        if stack.executor is not None:
            self.chain.credit(stack.executor, fees.executor)
        packet = Packet(header, payload)
        self.chain.emit(PacketSent(packet, options_bytes, dvn_ids, stack.executor))
        return EmittedJob(packet, options_bytes, dvn_ids, stack.executor)

    def snapshot(self):
        return None

    def restore(self, snap):
        pass


class UlnInstance(MessageLibInstance):
    """Quorum library: aggregates DVN attestations, commits when fulfilled."""

    def __init__(self, record: MessageLibRecord, chain):
        super().__init__(record, chain)
        # (header hash, payload hash) -> attesting DVN ids; never deleted
        self.attestations: dict[tuple[bytes, bytes], set[str]] = {}

    def dvn_verify(self, dvn_id: str, header: PacketHeader, verified_hash: bytes):
        """Record one DVN's attestation. Permissionless: unknown DVNs may
        attest, they simply never count toward any quorum."""
        self._check_version(header)
        key = (header_hash(header), verified_hash)
        attesters = self.attestations.setdefault(key, set())
        if dvn_id in attesters:
            raise DuplicateAttestation(dvn_id)
        attesters.add(dvn_id)
        self.chain.emit(PayloadAttested(dvn_id, key[0], verified_hash,
                                        header.path, header.nonce))

    def attesters(self, header: PacketHeader, verified_hash: bytes) -> frozenset[str]:
        return frozenset(self.attestations.get((header_hash(header), verified_hash), ()))

    def committable(self, header: PacketHeader, verified_hash: bytes,
                    cfg: UlnConfigView) -> bool:
        return quorum_met(self.attesters(header, verified_hash), cfg)

    def commit_if_ready(self, header: PacketHeader, verified_hash: bytes) -> str:
        """Commit to the endpoint iff the receiver's current quorum is met.

        Config is resolved now, not at attestation time; endpoint-side
        rejections (stale nonce, unauthorized library) propagate.
        """
        self._check_version(header)
        stack = self.chain.endpoint.resolve_stack(header.path.receiver,
                                                  header.path.src_eid)
        if stack is None:
            return NOT_READY
        if not self.committable(header, verified_hash, UlnConfigView.from_stack(stack)):
            return NOT_READY
        self.chain.endpoint.commit_verification(self.key, header, verified_hash)
        return COMMITTED

    def snapshot(self):
        return {key: set(val) for key, val in self.attestations.items()}

    def restore(self, snap):
        self.attestations = {key: set(val) for key, val in snap.items()}


class WhitelistInstance(MessageLibInstance):
    """Prototyping library: a fixed allowlist of workers commits directly."""

    def verify_and_commit(self, caller: str, header: PacketHeader,
                          verified_hash: bytes) -> str:
        if caller not in self.record.allowlist:
            raise NotWhitelisted(caller)
        self._check_version(header)
        self.chain.endpoint.commit_verification(self.key, header, verified_hash)
        return COMMITTED


def make_instance(record: MessageLibRecord, chain) -> MessageLibInstance:
    if record.kind == KIND_ULN:
        return UlnInstance(record, chain)
    if record.kind == KIND_WHITELIST:
        return WhitelistInstance(record, chain)
    return MessageLibInstance(record, chain)


def route_for_version(chain, receiver, src_eid: int, version: int):
    """Destination instance a verifier should submit to for a packet version:
    the receiver's current receive library if its major matches, else the
    previous one, else the newest registered library of that major."""
    stack = chain.endpoint.resolve_stack(receiver, src_eid)
    if stack is not None:
        for key in (stack.receive_library, stack.prev_receive_library):
            if key is not None and key.major == version:
                return chain.lib_instance(key)
    record = chain.registry.newest_with_major(version)
    if record is not None:
        return chain.lib_instance(record.version)
    return None
