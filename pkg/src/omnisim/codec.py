"""Bit-exact wire formats: packets, GUIDs, payload hashes, message options.

All integers are big-endian. Packet layout (header is exactly 81 bytes):

    version(1) | nonce(8) | srcEid(4) | sender(32) | dstEid(4) | receiver(32)
    | payload(...)

The GUID is SHA-256 over the 80-byte concatenation
nonce(8) | srcEid(4) | sender(32) | dstEid(4) | receiver(32); it is fully
derived from the header, so it is never serialized — decoders recompute it.
The payload hash stored in the channel is SHA-256(guid | payload).

Message options come in three wire shapes selected by a leading tag byte:

    0x01 | executionGas(16)                                     gas only
    0x02 | executionGas(16) | nativeDrop(16) | receiver(32)     gas + drop
    0x03 | [workerId(1) | opType(1) | length(2) | command]*     worker list

Everything here is pure and safe to call from any thread.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .errors import GuidMismatch, LengthMismatch, TooShort, Truncated, UnknownType

ADDRESS_LEN = 32
HEADER_LEN = 81
GUID_PREIMAGE_LEN = 80

U8_MAX = 0xFF
U16_MAX = 0xFFFF
U32_MAX = 0xFFFFFFFF
U64_MAX = 0xFFFFFFFFFFFFFFFF
U128_MAX = (1 << 128) - 1

OPTIONS_GAS = 1
OPTIONS_GAS_DROP = 2
OPTIONS_WORKERS = 3


def _check_uint(value: int, limit: int, what: str) -> int:
    if not isinstance(value, int) or value < 0 or value > limit:
        raise ValueError(f"{what} out of range: {value!r}")
    return value


def check_eid(value: int) -> int:
    """Endpoint ids are uint32 with 0 reserved as 'unset'."""
    _check_uint(value, U32_MAX, "endpoint id")
    if value == 0:
        raise ValueError("endpoint id 0 is reserved")
    return value


@dataclass(frozen=True, slots=True)
class Address:
    """Opaque 32-byte identity; shorter native addresses are left-padded."""

    data: bytes

    def __post_init__(self):
        if not isinstance(self.data, bytes) or len(self.data) != ADDRESS_LEN:
            raise ValueError("address must be exactly 32 bytes")

    @classmethod
    def from_int(cls, value: int) -> Address:
        return cls(_check_uint(value, (1 << 256) - 1, "address").to_bytes(ADDRESS_LEN, "big"))

    @classmethod
    def from_hex(cls, text: str) -> Address:
        raw = bytes.fromhex(text.removeprefix("0x"))
        if len(raw) > ADDRESS_LEN:
            raise ValueError("address longer than 32 bytes")
        return cls(raw.rjust(ADDRESS_LEN, b"\x00"))

    def short_hex(self) -> str:
        stripped = self.data.lstrip(b"\x00") or b"\x00"
        return "0x" + stripped.hex()

    def __repr__(self) -> str:
        return f"Address({self.short_hex()})"


@dataclass(frozen=True, slots=True)
class Path:
    """Channel identity: (source eid, sender, destination eid, receiver)."""

    src_eid: int
    sender: Address
    dst_eid: int
    receiver: Address

    def __post_init__(self):
        check_eid(self.src_eid)
        check_eid(self.dst_eid)
        if self.src_eid == self.dst_eid:
            raise ValueError("cross-chain path requires distinct endpoint ids")

    def encode(self) -> bytes:
        return (
            self.src_eid.to_bytes(4, "big")
            + self.sender.data
            + self.dst_eid.to_bytes(4, "big")
            + self.receiver.data
        )

    def __repr__(self) -> str:
        return (
            f"Path({self.src_eid}:{self.sender.short_hex()}"
            f"->{self.dst_eid}:{self.receiver.short_hex()})"
        )


def compute_guid(nonce: int, path: Path) -> bytes:
    """Globally unique packet id: SHA-256 over nonce(8) | encoded path."""
    _check_uint(nonce, U64_MAX, "nonce")
    if nonce < 1:
        raise ValueError("nonce starts at 1")
    preimage = nonce.to_bytes(8, "big") + path.encode()
    return hashlib.sha256(preimage).digest()


def payload_hash(guid: bytes, payload: bytes) -> bytes:
    """Hash committed to the channel and attested by verifiers."""
    if len(guid) != 32:
        raise ValueError("guid must be 32 bytes")
    return hashlib.sha256(guid + bytes(payload)).digest()


@dataclass(frozen=True, slots=True)
class PacketHeader:
    version: int
    nonce: int
    path: Path
    guid: bytes

    def __post_init__(self):
        _check_uint(self.version, U8_MAX, "packet version")
        _check_uint(self.nonce, U64_MAX, "nonce")
        if self.nonce < 1:
            raise ValueError("nonce starts at 1")
        if self.guid != compute_guid(self.nonce, self.path):
            raise ValueError("guid does not match nonce and path")

    @classmethod
    def make(cls, version: int, nonce: int, path: Path) -> PacketHeader:
        return cls(version, nonce, path, compute_guid(nonce, path))

    def encode(self) -> bytes:
        return (
            self.version.to_bytes(1, "big")
            + self.nonce.to_bytes(8, "big")
            + self.path.encode()
        )


def header_hash(header: PacketHeader) -> bytes:
    """Key under which attestations for this header are aggregated."""
    return hashlib.sha256(header.encode()).digest()


@dataclass(frozen=True, slots=True)
class Packet:
    header: PacketHeader
    payload: bytes

    def encode(self) -> bytes:
        return self.header.encode() + self.payload

    @property
    def guid(self) -> bytes:
        return self.header.guid

    @property
    def nonce(self) -> int:
        return self.header.nonce

    @property
    def path(self) -> Path:
        return self.header.path


def encode_packet(packet: Packet) -> bytes:
    return packet.encode()


def decode_packet(data: bytes) -> Packet:
    """Inverse of encode_packet; rejects corrupted or forged headers.

    The GUID is recomputed from (nonce, path). Field values no honest
    encoder can produce (nonce 0, endpoint id 0, src == dst) signal a
    corrupted or forged header and raise GuidMismatch.
    """
    if len(data) < HEADER_LEN:
        raise TooShort(f"need {HEADER_LEN} header bytes, got {len(data)}")
    version = data[0]
    nonce = int.from_bytes(data[1:9], "big")
    src_eid = int.from_bytes(data[9:13], "big")
    sender = data[13:45]
    dst_eid = int.from_bytes(data[45:49], "big")
    receiver = data[49:81]
    if nonce < 1 or src_eid < 1 or dst_eid < 1 or src_eid == dst_eid:
        raise GuidMismatch("header fields unreachable by any valid encoder")
    path = Path(src_eid, Address(sender), dst_eid, Address(receiver))
    header = PacketHeader(version, nonce, path, compute_guid(nonce, path))
    return Packet(header, data[HEADER_LEN:])


@dataclass(frozen=True, slots=True)
class GasOptions:
    """Tag 0x01: execution gas limit for the delivering executor."""

    execution_gas: int

    def __post_init__(self):
        _check_uint(self.execution_gas, U128_MAX, "execution gas")


@dataclass(frozen=True, slots=True)
class GasDropOptions:
    """Tag 0x02: execution gas plus a native-token drop to a receiver."""

    execution_gas: int
    native_drop: int
    receiver: Address

    def __post_init__(self):
        _check_uint(self.execution_gas, U128_MAX, "execution gas")
        _check_uint(self.native_drop, U128_MAX, "native drop")


@dataclass(frozen=True, slots=True)
class WorkerCommand:
    worker_id: int
    op_type: int
    command: bytes

    def __post_init__(self):
        _check_uint(self.worker_id, U8_MAX, "worker id")
        _check_uint(self.op_type, U8_MAX, "op type")
        if len(self.command) > U16_MAX:
            raise ValueError("worker command longer than 65535 bytes")


@dataclass(frozen=True, slots=True)
class WorkerOptions:
    """Tag 0x03: arbitrary per-worker argument list (possibly empty)."""

    entries: tuple[WorkerCommand, ...] = ()


MessageOptions = GasOptions | GasDropOptions | WorkerOptions


def encode_options(options: MessageOptions) -> bytes:
    if isinstance(options, GasOptions):
        return bytes([OPTIONS_GAS]) + options.execution_gas.to_bytes(16, "big")
    if isinstance(options, GasDropOptions):
        return (
            bytes([OPTIONS_GAS_DROP])
            + options.execution_gas.to_bytes(16, "big")
            + options.native_drop.to_bytes(16, "big")
            + options.receiver.data
        )
    if isinstance(options, WorkerOptions):
        out = bytearray([OPTIONS_WORKERS])
        for entry in options.entries:
            out.append(entry.worker_id)
            out.append(entry.op_type)
            out += len(entry.command).to_bytes(2, "big")
            out += entry.command
        return bytes(out)
    raise TypeError(f"not a message options value: {options!r}")


def decode_options(data: bytes) -> MessageOptions:
    """Strict inverse of encode_options; trailing bytes are rejected."""
    if len(data) < 1:
        raise Truncated("empty options")
    tag = data[0]
    body = data[1:]
    if tag == OPTIONS_GAS:
        if len(body) < 16:
            raise Truncated("gas options need 16 body bytes")
        if len(body) > 16:
            raise LengthMismatch("trailing bytes after gas options")
        return GasOptions(int.from_bytes(body, "big"))
    if tag == OPTIONS_GAS_DROP:
        if len(body) < 64:
            raise Truncated("gas+drop options need 64 body bytes")
        if len(body) > 64:
            raise LengthMismatch("trailing bytes after gas+drop options")
        return GasDropOptions(
            int.from_bytes(body[0:16], "big"),
            int.from_bytes(body[16:32], "big"),
            Address(body[32:64]),
        )
    if tag == OPTIONS_WORKERS:
        entries = []
        offset = 0
        while offset < len(body):
            if len(body) - offset < 4:
                raise Truncated("worker entry header incomplete")
            worker_id = body[offset]
            op_type = body[offset + 1]
            length = int.from_bytes(body[offset + 2:offset + 4], "big")
            offset += 4
            if len(body) - offset < length:
                raise Truncated("worker command shorter than its length field")
            entries.append(WorkerCommand(worker_id, op_type, body[offset:offset + length]))
            offset += length
        return WorkerOptions(tuple(entries))
    raise UnknownType(f"options tag {tag}")
