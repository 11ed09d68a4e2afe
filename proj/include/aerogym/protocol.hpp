#pragma once

// Wire protocol between team clients and the state server. A frame is a
// 4-byte big-endian length followed by that many bytes of canonical JSON:
// {"kind":..,"payload":{..},"step_index":n,"team_name":".."}.

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace aerogym {

enum class MessageKind {
    join,
    join_accept,
    join_deny,
    state_report,
    central_state,
    episode_end,
    error,
};

/// Upper-case wire names: JOIN, JOIN_ACCEPT, ...
std::string_view to_string(MessageKind kind);
std::optional<MessageKind> message_kind_from_string(std::string_view name);

struct Message {
    MessageKind kind = MessageKind::error;
    std::int64_t step_index = 0;
    std::string team_name;
    nlohmann::json payload = nlohmann::json::object();

    friend bool operator==(const Message&, const Message&) = default;
};

Message error_message(const std::string& team, std::int64_t step, const std::string& code,
                      const std::string& text);

/// Canonical JSON body of a message.
std::string encode_message(const Message& message);
/// Throws ProtocolError("malformed_message").
Message decode_message(std::string_view body);

inline constexpr std::size_t kFrameHeaderBytes = 4;
inline constexpr std::size_t kMaxFrameBytes = 16u << 20;

/// Length prefix + body. Throws ProtocolError("frame_too_large").
std::string encode_frame(std::string_view body);

/// Incremental frame splitter for a byte stream.
class FrameDecoder {
public:
    void feed(std::string_view bytes);
    /// Next complete frame body, if any. Throws ProtocolError("frame_too_large").
    std::optional<std::string> next();
    std::size_t buffered() const { return buffer_.size(); }

private:
    std::string buffer_;
};

}  // namespace aerogym
