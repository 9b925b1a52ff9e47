"""Ledger events: the onchain surface offchain workers observe.

Each simulated chain appends EventRecord entries ordered by (height, seq).
Records render to one trace line each:

    <height> <seq> CHAIN=<eid> <NAME> key=value ...

with hashes hex-encoded and addresses in short hex form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .codec import Address, Packet, Path


def _fmt(value) -> str:
    if isinstance(value, Address):
        return value.short_hex()
    if isinstance(value, (bytes, bytearray)):
        return value.hex() if value else "-"
    if isinstance(value, Path):
        return (
            f"{value.src_eid}:{value.sender.short_hex()}"
            f"->{value.dst_eid}:{value.receiver.short_hex()}"
        )
    return str(value)


@dataclass(frozen=True)
class Event:
    name = "Event"

    def fields(self) -> dict:
        return {}

    def render(self) -> str:
        kv = " ".join(f"{k}={_fmt(v)}" for k, v in self.fields().items())
        return f"{self.name} {kv}".rstrip()


@dataclass(frozen=True)
class PacketSent(Event):
    """Emitted by the source chain's send library; names the hired workers."""

    packet: Packet
    options_bytes: bytes
    dvn_ids: tuple[str, ...]
    executor_id: str | None

    name = "PacketSent"

    def fields(self) -> dict:
        return {
            "path": self.packet.path,
            "nonce": self.packet.nonce,
            "version": self.packet.header.version,
            "guid": self.packet.guid,
            "payload": self.packet.payload,
            "options": self.options_bytes,
            "dvns": ",".join(self.dvn_ids) or "-",
            "executor": self.executor_id or "-",
        }


@dataclass(frozen=True)
class PayloadAttested(Event):
    dvn: str
    header_hash: bytes
    payload_hash: bytes
    path: Path
    nonce: int

    name = "PayloadAttested"

    def fields(self) -> dict:
        return {
            "dvn": self.dvn,
            "path": self.path,
            "nonce": self.nonce,
            "headerhash": self.header_hash,
            "payloadhash": self.payload_hash,
        }


@dataclass(frozen=True)
class PayloadVerified(Event):
    path: Path
    nonce: int
    payload_hash: bytes

    name = "PayloadVerified"

    def fields(self) -> dict:
        return {"path": self.path, "nonce": self.nonce, "hash": self.payload_hash}


@dataclass(frozen=True)
class PacketDelivered(Event):
    guid: bytes
    path: Path
    nonce: int

    name = "PacketDelivered"

    def fields(self) -> dict:
        return {"guid": self.guid, "path": self.path, "nonce": self.nonce}


@dataclass(frozen=True)
class ComposeSent(Event):
    sender: Address
    to: Address
    guid: bytes
    index: int
    message: bytes

    name = "ComposeSent"

    def fields(self) -> dict:
        return {
            "from": self.sender,
            "to": self.to,
            "guid": self.guid,
            "index": self.index,
            "message": self.message,
        }


@dataclass(frozen=True)
class ComposeDelivered(Event):
    sender: Address
    to: Address
    guid: bytes
    index: int

    name = "ComposeDelivered"

    def fields(self) -> dict:
        return {"from": self.sender, "to": self.to, "guid": self.guid, "index": self.index}


@dataclass(frozen=True)
class StackConfigured(Event):
    owner: Address
    remote_eid: int

    name = "StackConfigured"

    def fields(self) -> dict:
        return {"owner": self.owner, "remote": self.remote_eid}


@dataclass(frozen=True)
class EventRecord:
    """One ledger entry; tick is simulator metadata, not part of the line."""

    height: int
    seq: int
    chain_eid: int
    event: Event
    tick: int = field(default=0, compare=False)

    def render(self) -> str:
        return f"{self.height} {self.seq} CHAIN={self.chain_eid} {self.event.render()}"
