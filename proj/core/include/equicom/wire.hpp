#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "equicom/types.hpp"

namespace equicom::wire {

// Frame layout, all integers big-endian:
//
//   header:  magic 0x55 0x43 | version 0x01 | kind u8 | body_len u32
//   string:  len u16 | UTF-8 bytes
//
//   HELLO / HELLO_ACK  node_id u64 | listen_addr string | sub_count u16 | sub_count x string
//   PEERS              count u16 | count x (node_id u64 | addr string | sub_count u16 | sub_count x string)
//   SUB                node_id u64 | op u8 (1=add, 2=remove) | tag string
//   DATA               sender u64 | seq u64 | mechanism u8 | tag string | payload_len u32 | payload
//   PING / PONG        nonce u64
//   BYE                (empty)
//
// A DATA frame carries exactly one (mechanism, tag) pair: the matched route,
// never the sender's full directive list.

inline constexpr std::uint8_t kMagic0 = 0x55;
inline constexpr std::uint8_t kMagic1 = 0x43;
inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::size_t kHeaderSize = 8;
inline constexpr std::size_t kMaxStringLen = 65535;
inline constexpr std::uint64_t kMaxPayloadLen = 0xFFFFFFFFull;

enum class FrameKind : std::uint8_t {
    Hello = 0x01,
    HelloAck = 0x02,
    Peers = 0x03,
    Sub = 0x04,
    Data = 0x05,
    Ping = 0x06,
    Pong = 0x07,
    Bye = 0x08,
};

const char* frame_kind_name(FrameKind kind);

struct PeerEntry {
    NodeId node_id = 0;
    std::string addr;
    std::vector<std::string> subscriptions;

    bool operator==(const PeerEntry&) const = default;
};

// Body of HELLO and HELLO_ACK.
struct HelloBody {
    NodeId node_id = 0;
    std::string listen_addr;
    std::vector<std::string> subscriptions;

    bool operator==(const HelloBody&) const = default;
};

struct PeersBody {
    std::vector<PeerEntry> entries;

    bool operator==(const PeersBody&) const = default;
};

struct SubBody {
    NodeId node_id = 0;
    SubOp op = SubOp::Add;
    std::string tag;

    bool operator==(const SubBody&) const = default;
};

struct DataBody {
    NodeId sender = 0;
    std::uint64_t seq = 0;
    Mechanism mechanism = Mechanism::Broadcast;
    std::string tag;
    std::vector<std::uint8_t> payload;

    bool operator==(const DataBody&) const = default;
};

// Body of PING and PONG.
struct PingBody {
    std::uint64_t nonce = 0;

    bool operator==(const PingBody&) const = default;
};

struct ByeBody {
    bool operator==(const ByeBody&) const = default;
};

struct Frame {
    FrameKind kind = FrameKind::Bye;
    std::variant<HelloBody, PeersBody, SubBody, DataBody, PingBody, ByeBody> body = ByeBody{};

    bool operator==(const Frame&) const = default;

    static Frame hello(HelloBody body) { return {FrameKind::Hello, std::move(body)}; }
    static Frame hello_ack(HelloBody body) { return {FrameKind::HelloAck, std::move(body)}; }
    static Frame peers(PeersBody body) { return {FrameKind::Peers, std::move(body)}; }
    static Frame sub(SubBody body) { return {FrameKind::Sub, std::move(body)}; }
    static Frame data(DataBody body) { return {FrameKind::Data, std::move(body)}; }
    static Frame ping(std::uint64_t nonce) { return {FrameKind::Ping, PingBody{nonce}}; }
    static Frame pong(std::uint64_t nonce) { return {FrameKind::Pong, PingBody{nonce}}; }
    static Frame bye() { return {FrameKind::Bye, ByeBody{}}; }
};

enum class DecodeStatus : std::uint8_t {
    Ok,
    BadMagic,             // first two bytes are not 0x55 0x43
    UnsupportedVersion,   // version byte != 0x01
    UnknownKind,          // kind byte outside 0x01..0x08
    Truncated,            // fewer bytes available than the header demands
    MalformedBody,        // field parse failure, bad enum code, invalid UTF-8
};

const char* decode_status_name(DecodeStatus status);

struct DecodeResult {
    DecodeStatus status = DecodeStatus::Truncated;
    Frame frame;
    std::size_t consumed = 0;  // bytes consumed on Ok; 0 otherwise

    bool ok() const { return status == DecodeStatus::Ok; }
};

// Serializes a frame to its canonical byte sequence. Deterministic: equal
// frames produce equal bytes. Throws Error{OversizeField} when a string
// exceeds 65535 bytes or a payload exceeds 2^32-1 bytes, and
// Error{InvalidArgument} when kind and body type disagree.
std::vector<std::uint8_t> encode_frame(const Frame& frame);

// Parses one frame from the front of `bytes`. Trailing bytes beyond the frame
// are left for the caller; `consumed` tells how many bytes the frame took.
// Truncated means "wait for more bytes", every other non-Ok status is fatal
// for the stream.
DecodeResult decode_frame(std::span<const std::uint8_t> bytes);

bool utf8_valid(std::string_view text);

}  // namespace equicom::wire
