#include "equicom/wire.hpp"

#include <cstring>
#include <optional>

#include "equicom/errors.hpp"

namespace equicom::wire {
namespace {

class ByteWriter {
public:
    explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}

    void u8(std::uint8_t v) { out_.push_back(v); }

    void u16(std::uint16_t v) {
        out_.push_back(static_cast<std::uint8_t>(v >> 8));
        out_.push_back(static_cast<std::uint8_t>(v));
    }

    void u32(std::uint32_t v) {
        out_.push_back(static_cast<std::uint8_t>(v >> 24));
        out_.push_back(static_cast<std::uint8_t>(v >> 16));
        out_.push_back(static_cast<std::uint8_t>(v >> 8));
        out_.push_back(static_cast<std::uint8_t>(v));
    }

    void u64(std::uint64_t v) {
        u32(static_cast<std::uint32_t>(v >> 32));
        u32(static_cast<std::uint32_t>(v));
    }

    void str(const std::string& s) {
        if (s.size() > kMaxStringLen) {
            throw Error(Errc::OversizeField, "string field of " + std::to_string(s.size()) +
                                                 " bytes exceeds 65535");
        }
        u16(static_cast<std::uint16_t>(s.size()));
        out_.insert(out_.end(), s.begin(), s.end());
    }

    void bytes(const std::vector<std::uint8_t>& b) { out_.insert(out_.end(), b.begin(), b.end()); }

private:
    std::vector<std::uint8_t>& out_;
};

// Reads fixed-width integers and length-prefixed strings from a body slice.
// Every reader returns nullopt on exhaustion; the caller maps that to
// MalformedBody because the header already promised body_len bytes.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::size_t remaining() const { return data_.size() - pos_; }
    bool exhausted() const { return pos_ == data_.size(); }

    std::optional<std::uint8_t> u8() {
        if (remaining() < 1) return std::nullopt;
        return data_[pos_++];
    }

    std::optional<std::uint16_t> u16() {
        if (remaining() < 2) return std::nullopt;
        std::uint16_t v = static_cast<std::uint16_t>(std::uint16_t{data_[pos_]} << 8 | data_[pos_ + 1]);
        pos_ += 2;
        return v;
    }

    std::optional<std::uint32_t> u32() {
        if (remaining() < 4) return std::nullopt;
        std::uint32_t v = std::uint32_t{data_[pos_]} << 24 | std::uint32_t{data_[pos_ + 1]} << 16 |
                          std::uint32_t{data_[pos_ + 2]} << 8 | std::uint32_t{data_[pos_ + 3]};
        pos_ += 4;
        return v;
    }

    std::optional<std::uint64_t> u64() {
        auto hi = u32();
        if (!hi) return std::nullopt;
        auto lo = u32();
        if (!lo) return std::nullopt;
        return std::uint64_t{*hi} << 32 | *lo;
    }

    std::optional<std::string> str() {
        auto len = u16();
        if (!len || remaining() < *len) return std::nullopt;
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), *len);
        pos_ += *len;
        if (!utf8_valid(s)) return std::nullopt;
        return s;
    }

    std::optional<std::vector<std::uint8_t>> bytes(std::size_t n) {
        if (remaining() < n) return std::nullopt;
        std::vector<std::uint8_t> b(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                    data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return b;
    }

private:
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

void write_hello(ByteWriter& w, const HelloBody& b) {
    w.u64(b.node_id);
    w.str(b.listen_addr);
    if (b.subscriptions.size() > kMaxStringLen) {
        throw Error(Errc::OversizeField, "subscription count exceeds 65535");
    }
    w.u16(static_cast<std::uint16_t>(b.subscriptions.size()));
    for (const auto& s : b.subscriptions) w.str(s);
}

std::optional<HelloBody> read_hello(ByteReader& r) {
    HelloBody b;
    auto id = r.u64();
    if (!id) return std::nullopt;
    b.node_id = *id;
    auto addr = r.str();
    if (!addr) return std::nullopt;
    b.listen_addr = std::move(*addr);
    auto count = r.u16();
    if (!count) return std::nullopt;
    b.subscriptions.reserve(*count);
    for (std::uint16_t i = 0; i < *count; ++i) {
        auto s = r.str();
        if (!s) return std::nullopt;
        b.subscriptions.push_back(std::move(*s));
    }
    return b;
}

std::optional<Frame> read_body(FrameKind kind, ByteReader& r) {
    switch (kind) {
        case FrameKind::Hello:
        case FrameKind::HelloAck: {
            auto b = read_hello(r);
            if (!b) return std::nullopt;
            return Frame{kind, std::move(*b)};
        }
        case FrameKind::Peers: {
            PeersBody b;
            auto count = r.u16();
            if (!count) return std::nullopt;
            b.entries.reserve(*count);
            for (std::uint16_t i = 0; i < *count; ++i) {
                PeerEntry e;
                auto id = r.u64();
                if (!id) return std::nullopt;
                e.node_id = *id;
                auto addr = r.str();
                if (!addr) return std::nullopt;
                e.addr = std::move(*addr);
                auto subs = r.u16();
                if (!subs) return std::nullopt;
                e.subscriptions.reserve(*subs);
                for (std::uint16_t j = 0; j < *subs; ++j) {
                    auto s = r.str();
                    if (!s) return std::nullopt;
                    e.subscriptions.push_back(std::move(*s));
                }
                b.entries.push_back(std::move(e));
            }
            return Frame{kind, std::move(b)};
        }
        case FrameKind::Sub: {
            SubBody b;
            auto id = r.u64();
            if (!id) return std::nullopt;
            b.node_id = *id;
            auto op = r.u8();
            if (!op || (*op != 1 && *op != 2)) return std::nullopt;
            b.op = static_cast<SubOp>(*op);
            auto tag = r.str();
            if (!tag) return std::nullopt;
            b.tag = std::move(*tag);
            return Frame{kind, std::move(b)};
        }
        case FrameKind::Data: {
            DataBody b;
            auto sender = r.u64();
            if (!sender) return std::nullopt;
            b.sender = *sender;
            auto seq = r.u64();
            if (!seq) return std::nullopt;
            b.seq = *seq;
            auto mech = r.u8();
            if (!mech || !mechanism_code_valid(*mech)) return std::nullopt;
            b.mechanism = static_cast<Mechanism>(*mech);
            auto tag = r.str();
            if (!tag) return std::nullopt;
            b.tag = std::move(*tag);
            auto len = r.u32();
            if (!len) return std::nullopt;
            auto payload = r.bytes(*len);
            if (!payload) return std::nullopt;
            b.payload = std::move(*payload);
            return Frame{kind, std::move(b)};
        }
        case FrameKind::Ping:
        case FrameKind::Pong: {
            auto nonce = r.u64();
            if (!nonce) return std::nullopt;
            return Frame{kind, PingBody{*nonce}};
        }
        case FrameKind::Bye:
            return Frame{kind, ByeBody{}};
    }
    return std::nullopt;
}

bool kind_matches_body(const Frame& frame) {
    switch (frame.kind) {
        case FrameKind::Hello:
        case FrameKind::HelloAck:
            return std::holds_alternative<HelloBody>(frame.body);
        case FrameKind::Peers:
            return std::holds_alternative<PeersBody>(frame.body);
        case FrameKind::Sub:
            return std::holds_alternative<SubBody>(frame.body);
        case FrameKind::Data:
            return std::holds_alternative<DataBody>(frame.body);
        case FrameKind::Ping:
        case FrameKind::Pong:
            return std::holds_alternative<PingBody>(frame.body);
        case FrameKind::Bye:
            return std::holds_alternative<ByeBody>(frame.body);
    }
    return false;
}

}  // namespace

const char* frame_kind_name(FrameKind kind) {
    switch (kind) {
        case FrameKind::Hello: return "HELLO";
        case FrameKind::HelloAck: return "HELLO_ACK";
        case FrameKind::Peers: return "PEERS";
        case FrameKind::Sub: return "SUB";
        case FrameKind::Data: return "DATA";
        case FrameKind::Ping: return "PING";
        case FrameKind::Pong: return "PONG";
        case FrameKind::Bye: return "BYE";
    }
    return "?";
}

const char* decode_status_name(DecodeStatus status) {
    switch (status) {
        case DecodeStatus::Ok: return "Ok";
        case DecodeStatus::BadMagic: return "BadMagic";
        case DecodeStatus::UnsupportedVersion: return "UnsupportedVersion";
        case DecodeStatus::UnknownKind: return "UnknownKind";
        case DecodeStatus::Truncated: return "Truncated";
        case DecodeStatus::MalformedBody: return "MalformedBody";
    }
    return "?";
}

bool utf8_valid(std::string_view text) {
    const auto* p = reinterpret_cast<const unsigned char*>(text.data());
    const auto* end = p + text.size();
    while (p < end) {
        unsigned char c = *p;
        if (c < 0x80) {
            ++p;
            continue;
        }
        int len;
        std::uint32_t cp;
        if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1Fu;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0Fu;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07u;
        } else {
            return false;
        }
        if (end - p < len) return false;
        for (int i = 1; i < len; ++i) {
            if ((p[i] & 0xC0) != 0x80) return false;
            cp = cp << 6 | (p[i] & 0x3Fu);
        }
        // Reject overlongs, surrogates, and values past U+10FFFF.
        if (len == 2 && cp < 0x80) return false;
        if (len == 3 && (cp < 0x800 || (cp >= 0xD800 && cp <= 0xDFFF))) return false;
        if (len == 4 && (cp < 0x10000 || cp > 0x10FFFF)) return false;
        p += len;
    }
    return true;
}

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
    if (!kind_matches_body(frame)) {
        throw Error(Errc::InvalidArgument,
                    std::string("frame kind ") + frame_kind_name(frame.kind) +
                        " does not match its body type");
    }
    std::vector<std::uint8_t> out;
    out.reserve(kHeaderSize + 32);
    ByteWriter w(out);
    w.u8(kMagic0);
    w.u8(kMagic1);
    w.u8(kVersion);
    w.u8(static_cast<std::uint8_t>(frame.kind));
    w.u32(0);  // body_len backpatched below

    switch (frame.kind) {
        case FrameKind::Hello:
        case FrameKind::HelloAck:
            write_hello(w, std::get<HelloBody>(frame.body));
            break;
        case FrameKind::Peers: {
            const auto& b = std::get<PeersBody>(frame.body);
            if (b.entries.size() > kMaxStringLen) {
                throw Error(Errc::OversizeField, "peer entry count exceeds 65535");
            }
            w.u16(static_cast<std::uint16_t>(b.entries.size()));
            for (const auto& e : b.entries) {
                w.u64(e.node_id);
                w.str(e.addr);
                if (e.subscriptions.size() > kMaxStringLen) {
                    throw Error(Errc::OversizeField, "subscription count exceeds 65535");
                }
                w.u16(static_cast<std::uint16_t>(e.subscriptions.size()));
                for (const auto& s : e.subscriptions) w.str(s);
            }
            break;
        }
        case FrameKind::Sub: {
            const auto& b = std::get<SubBody>(frame.body);
            w.u64(b.node_id);
            w.u8(static_cast<std::uint8_t>(b.op));
            w.str(b.tag);
            break;
        }
        case FrameKind::Data: {
            const auto& b = std::get<DataBody>(frame.body);
            if (b.payload.size() > kMaxPayloadLen) {
                throw Error(Errc::OversizeField, "payload exceeds 2^32-1 bytes");
            }
            w.u64(b.sender);
            w.u64(b.seq);
            w.u8(static_cast<std::uint8_t>(b.mechanism));
            w.str(b.tag);
            w.u32(static_cast<std::uint32_t>(b.payload.size()));
            w.bytes(b.payload);
            break;
        }
        case FrameKind::Ping:
        case FrameKind::Pong:
            w.u64(std::get<PingBody>(frame.body).nonce);
            break;
        case FrameKind::Bye:
            break;
    }

    std::size_t body_len = out.size() - kHeaderSize;
    out[4] = static_cast<std::uint8_t>(body_len >> 24);
    out[5] = static_cast<std::uint8_t>(body_len >> 16);
    out[6] = static_cast<std::uint8_t>(body_len >> 8);
    out[7] = static_cast<std::uint8_t>(body_len);
    return out;
}

DecodeResult decode_frame(std::span<const std::uint8_t> bytes) {
    DecodeResult res;
    if (bytes.size() < 2) {
        // Not enough to even check the magic, unless what is there already
        // disagrees with it.
        if (bytes.size() == 1 && bytes[0] != kMagic0) {
            res.status = DecodeStatus::BadMagic;
            return res;
        }
        res.status = DecodeStatus::Truncated;
        return res;
    }
    if (bytes[0] != kMagic0 || bytes[1] != kMagic1) {
        res.status = DecodeStatus::BadMagic;
        return res;
    }
    if (bytes.size() < 3) {
        res.status = DecodeStatus::Truncated;
        return res;
    }
    if (bytes[2] != kVersion) {
        res.status = DecodeStatus::UnsupportedVersion;
        return res;
    }
    if (bytes.size() < 4) {
        res.status = DecodeStatus::Truncated;
        return res;
    }
    std::uint8_t kind_code = bytes[3];
    if (kind_code < 0x01 || kind_code > 0x08) {
        res.status = DecodeStatus::UnknownKind;
        return res;
    }
    if (bytes.size() < kHeaderSize) {
        res.status = DecodeStatus::Truncated;
        return res;
    }
    std::uint32_t body_len = std::uint32_t{bytes[4]} << 24 | std::uint32_t{bytes[5]} << 16 |
                             std::uint32_t{bytes[6]} << 8 | std::uint32_t{bytes[7]};
    if (bytes.size() - kHeaderSize < body_len) {
        res.status = DecodeStatus::Truncated;
        return res;
    }

    auto kind = static_cast<FrameKind>(kind_code);
    ByteReader r(bytes.subspan(kHeaderSize, body_len));
    auto frame = read_body(kind, r);
    // The body must parse and consume exactly body_len bytes.
    if (!frame || !r.exhausted()) {
        res.status = DecodeStatus::MalformedBody;
        return res;
    }
    res.status = DecodeStatus::Ok;
    res.frame = std::move(*frame);
    res.consumed = kHeaderSize + body_len;
    return res;
}

}  // namespace equicom::wire
