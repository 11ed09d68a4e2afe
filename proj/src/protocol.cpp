#include <aerogym/protocol.hpp>

#include <aerogym/error.hpp>
#include <aerogym/serialization.hpp>

#include <array>
#include <utility>

namespace aerogym {

namespace {

constexpr std::array<std::pair<MessageKind, std::string_view>, 7> kKindNames{{
    {MessageKind::join, "JOIN"},
    {MessageKind::join_accept, "JOIN_ACCEPT"},
    {MessageKind::join_deny, "JOIN_DENY"},
    {MessageKind::state_report, "STATE_REPORT"},
    {MessageKind::central_state, "CENTRAL_STATE"},
    {MessageKind::episode_end, "EPISODE_END"},
    {MessageKind::error, "ERROR"},
}};

}  // namespace

std::string_view to_string(MessageKind kind) {
    for (const auto& [k, name] : kKindNames) {
        if (k == kind) return name;
    }
    return "UNKNOWN";
}

std::optional<MessageKind> message_kind_from_string(std::string_view name) {
    for (const auto& [k, n] : kKindNames) {
        if (n == name) return k;
    }
    return std::nullopt;
}

Message error_message(const std::string& team, std::int64_t step, const std::string& code,
                      const std::string& text) {
    return {MessageKind::error, step, team, {{"code", code}, {"message", text}}};
}

std::string encode_message(const Message& m) {
    return canonical_dump({{"kind", to_string(m.kind)},
                           {"step_index", m.step_index},
                           {"team_name", m.team_name},
                           {"payload", m.payload}});
}

Message decode_message(std::string_view body) {
    nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ProtocolError("malformed_message", "frame body is not a JSON object");
    }
    auto field = [&](const char* key) -> const nlohmann::json& {
        auto it = j.find(key);
        if (it == j.end()) {
            throw ProtocolError("malformed_message", std::string("message lacks '") + key + "'");
        }
        return *it;
    };
    const auto& kind = field("kind");
    const auto& step = field("step_index");
    const auto& team = field("team_name");
    const auto& payload = field("payload");
    if (!kind.is_string() || !team.is_string() || !payload.is_object() ||
        !step.is_number_integer() || step.get<std::int64_t>() < 0) {
        throw ProtocolError("malformed_message", "message field has the wrong type");
    }
    auto k = message_kind_from_string(kind.get<std::string>());
    if (!k) {
        throw ProtocolError("malformed_message", "unknown message kind '" + kind.get<std::string>() + "'");
    }
    return {*k, step.get<std::int64_t>(), team.get<std::string>(), payload};
}

std::string encode_frame(std::string_view body) {
    if (body.size() > kMaxFrameBytes) {
        throw ProtocolError("frame_too_large", "frame of " + std::to_string(body.size()) + " bytes");
    }
    const auto n = static_cast<std::uint32_t>(body.size());
    std::string out;
    out.reserve(kFrameHeaderBytes + body.size());
    out.push_back(static_cast<char>((n >> 24) & 0xff));
    out.push_back(static_cast<char>((n >> 16) & 0xff));
    out.push_back(static_cast<char>((n >> 8) & 0xff));
    out.push_back(static_cast<char>(n & 0xff));
    out.append(body);
    return out;
}

void FrameDecoder::feed(std::string_view bytes) { buffer_.append(bytes); }

std::optional<std::string> FrameDecoder::next() {
    if (buffer_.size() < kFrameHeaderBytes) return std::nullopt;
    std::uint32_t n = 0;
    for (std::size_t i = 0; i < kFrameHeaderBytes; ++i) {
        n = (n << 8) | static_cast<unsigned char>(buffer_[i]);
    }
    if (n > kMaxFrameBytes) {
        throw ProtocolError("frame_too_large", "incoming frame of " + std::to_string(n) + " bytes");
    }
    if (buffer_.size() < kFrameHeaderBytes + n) return std::nullopt;
    std::string body = buffer_.substr(kFrameHeaderBytes, n);
    buffer_.erase(0, kFrameHeaderBytes + n);
    return body;
}

}  // namespace aerogym
