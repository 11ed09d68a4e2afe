#include <aerogym/state_server.hpp>

#include <aerogym/error.hpp>

namespace aerogym {

std::string_view to_string(AdmissionMode mode) {
    return mode == AdmissionMode::k_fixed ? "k_fixed" : "open";
}

std::optional<AdmissionMode> admission_mode_from_string(std::string_view text) {
    if (text == "k-fixed" || text == "k_fixed") return AdmissionMode::k_fixed;
    if (text == "open") return AdmissionMode::open;
    return std::nullopt;
}

void validate(const ServerConfig& config) {
    if (config.mode == AdmissionMode::k_fixed && config.k < 1) {
        throw ConfigError("invalid_k", "k-fixed mode needs k >= 1");
    }
    if (!(config.dt > 0.0) || config.dt > kMaxDt) {
        throw ConfigError("invalid_dt", "dt must lie in (0, " + std::to_string(kMaxDt) + "]");
    }
    if (config.step_timeout.count() <= 0) {
        throw ConfigError("invalid_step_timeout", "step timeout must be positive");
    }
    if (config.auto_start && *config.auto_start < 1) {
        throw ConfigError("invalid_start", "auto start needs at least one team");
    }
    if (config.max_episodes && *config.max_episodes < 1) {
        throw ConfigError("invalid_max_episodes", "max episodes must be at least 1");
    }
}

void CoreOutput::append(CoreOutput other) {
    for (auto& m : other.messages) messages.push_back(std::move(m));
    for (auto id : other.close) close.push_back(id);
}

// ---------------------------------------------------------------------------
// ServerCore
// ---------------------------------------------------------------------------

ServerCore::ServerCore(ServerConfig config) : config_(std::move(config)), hub_(config_.dt) {
    validate(config_);
}

void ServerCore::log(const std::string& line) const {
    if (logger_) logger_(line);
}

CoreOutput ServerCore::on_frame(ConnectionId from, std::string_view body) {
    if (phase_ == Phase::finished) return {};
    auto it = peers_.find(from);
    if (it == peers_.end()) it = peers_.emplace(from, Peer{}).first;
    Message m;
    try {
        m = decode_message(body);
    } catch (const ProtocolError& e) {
        return violation(from, e.code(), e.what());
    }
    if (!it->second.team) {
        if (m.kind != MessageKind::join) {
            return violation(from, "expected_join", "the first message must be JOIN");
        }
        return handle_join(from, m);
    }
    const std::string team = *it->second.team;
    switch (m.kind) {
        case MessageKind::state_report: return handle_report(from, team, m);
        case MessageKind::join: return violation(from, "duplicate_join", "connection already joined");
        default:
            return violation(from, "unexpected_message",
                             std::string(to_string(m.kind)) + " is not a client message");
    }
}

CoreOutput ServerCore::handle_join(ConnectionId from, const Message& m) {
    CoreOutput out;
    const std::string& team = m.team_name;
    auto deny = [&](const char* code, const std::string& text) {
        log("deny " + team + ": " + code);
        out.messages.push_back({from, {MessageKind::join_deny, 0, team, {{"code", code}, {"message", text}}}});
        out.close.push_back(from);
        peers_.erase(from);
        return out;
    };
    if (phase_ == Phase::running) {
        if (config_.mode == AdmissionMode::k_fixed) {
            return deny(deny_code::simulation_full,
                        "all " + std::to_string(config_.k) + " slots are taken");
        }
        return deny(deny_code::simulation_started, "the simulation already started");
    }
    if (teams_.contains(team)) {
        return deny(deny_code::duplicate_team_name, "team name '" + team + "' is already taken");
    }
    TeamJoin join;
    try {
        join = team_join_from_json(m.payload, team);
    } catch (const ProtocolError& e) {
        return violation(from, e.code(), e.what());
    }
    hub_.admit(std::move(join));
    teams_[team] = from;
    peers_[from].team = team;
    ++accepts_;
    log("accept " + team + " (" + std::to_string(hub_.team_count()) + " admitted)");
    out.messages.push_back({from,
                            {MessageKind::join_accept, 0, team,
                             {{"dt", config_.dt},
                              {"mode", to_string(config_.mode)},
                              {"admitted", hub_.team_count()}}}});
    const auto n = static_cast<int>(hub_.team_count());
    if ((config_.mode == AdmissionMode::k_fixed && n == config_.k) ||
        (config_.mode == AdmissionMode::open && config_.auto_start && n >= *config_.auto_start)) {
        out.append(begin());
    }
    return out;
}

CoreOutput ServerCore::handle_report(ConnectionId from, const std::string& team, const Message& m) {
    if (phase_ != Phase::running) {
        return violation(from, "not_running", "STATE_REPORT before the simulation started");
    }
    std::optional<CentralHub::Assembly> assembly;
    try {
        assembly = hub_.submit(team_report_from_json(m.payload, team, m.step_index));
    } catch (const ProtocolError& e) {
        CoreOutput out;
        out.messages.push_back({from, error_message(team, m.step_index, e.code(), e.what())});
        log("error " + team + ": " + e.code() + " at step " + std::to_string(m.step_index));
        out.append(end_episode(e.code() == "desync" ? end_reason::desync : end_reason::protocol_error,
                               {{"team", team}}));
        return out;
    }
    if (!assembly) return {};
    return broadcast(*assembly);
}

CoreOutput ServerCore::violation(ConnectionId from, const std::string& code, const std::string& text) {
    CoreOutput out;
    auto it = peers_.find(from);
    const std::optional<std::string> team = it == peers_.end() ? std::nullopt : it->second.team;
    log("error " + team.value_or("?") + ": " + code);
    out.messages.push_back(
        {from, error_message(team.value_or(""), phase_ == Phase::running ? hub_.step_index() : 0, code, text)});
    if (team && phase_ == Phase::running) {
        out.append(end_episode(end_reason::protocol_error, {{"team", *team}}));
        return out;
    }
    if (team) {
        teams_.erase(*team);
        hub_.remove(*team);
    }
    peers_.erase(from);
    out.close.push_back(from);
    return out;
}

CoreOutput ServerCore::start() {
    if (config_.mode != AdmissionMode::open) return {};
    return begin();
}

CoreOutput ServerCore::begin() {
    if (phase_ != Phase::admitting || hub_.team_count() == 0) return {};
    try {
        CentralHub::Assembly a = hub_.start();
        phase_ = Phase::running;
        log("start with " + std::to_string(hub_.team_count()) + " teams, budget " +
            std::to_string(hub_.step_budget()) + " steps");
        return broadcast(a);
    } catch (const StartError& e) {
        CoreOutput out;
        out.messages.push_back({teams_.at(e.team), error_message(e.team, 0, e.code(), e.what())});
        out.append(end_episode(end_reason::invalid_targets, {{"team", e.team}, {"code", e.code()}}));
        return out;
    }
}

CoreOutput ServerCore::broadcast(const CentralHub::Assembly& a) {
    if (observer_) observer_(a.state);
    CoreOutput out;
    for (const auto& [team, view] : a.views) {
        out.messages.push_back(
            {teams_.at(team), {MessageKind::central_state, view.step_index, team, team_view_to_json(view)}});
    }
    ++generation_;
    log("step " + std::to_string(a.state.step_index));
    if (a.end_reason) out.append(end_episode(*a.end_reason));
    return out;
}

CoreOutput ServerCore::end_episode(const std::string& reason, nlohmann::json detail) {
    CoreOutput out;
    const std::int64_t step = hub_.step_index();
    detail["reason"] = reason;
    for (const auto& [team, id] : teams_) {
        out.messages.push_back({id, {MessageKind::episode_end, step, team, detail}});
        out.close.push_back(id);
        peers_.erase(id);
    }
    if (!teams_.empty()) log("episode end at step " + std::to_string(step) + ": " + reason);
    teams_.clear();
    hub_ = CentralHub(config_.dt);
    ++episodes_;
    const bool more = config_.mode == AdmissionMode::k_fixed &&
                      (!config_.max_episodes || episodes_ < *config_.max_episodes);
    phase_ = more ? Phase::admitting : Phase::finished;
    return out;
}

CoreOutput ServerCore::on_disconnect(ConnectionId id) {
    auto it = peers_.find(id);
    if (it == peers_.end()) return {};
    const std::optional<std::string> team = it->second.team;
    peers_.erase(it);
    if (!team) return {};
    teams_.erase(*team);
    log("disconnect " + *team);
    if (phase_ == Phase::admitting) {
        hub_.remove(*team);
        return {};
    }
    if (phase_ == Phase::running) return end_episode(end_reason::team_disconnected, {{"team", *team}});
    return {};
}

CoreOutput ServerCore::on_timeout() {
    if (phase_ != Phase::running) return {};
    return end_episode(end_reason::team_timeout, {{"waiting_on", hub_.waiting_on()}});
}

// ---------------------------------------------------------------------------
// StateServer
// ---------------------------------------------------------------------------

StateServer::StateServer(ServerConfig config, std::unique_ptr<Listener> listener)
    : core_(std::move(config)), listener_(std::move(listener)) {}

StateServer::~StateServer() {
    for (auto& t : threads_) {
        if (t.joinable()) t.join();
    }
}

void StateServer::set_observer(std::function<void(const CentralState&)> observer) {
    core_.set_observer(std::move(observer));
}

void StateServer::set_logger(std::function<void(const std::string&)> logger) {
    core_.set_logger(std::move(logger));
}

void StateServer::push(Event event) {
    {
        std::lock_guard lock(mutex_);
        events_.push_back(std::move(event));
    }
    cv_.notify_all();
}

void StateServer::request_start() { push({Event::Type::start}); }
void StateServer::stop() { push({Event::Type::stop}); }

void StateServer::apply(const CoreOutput& out) {
    for (const auto& m : out.messages) {
        auto it = connections_.find(m.to);
        if (it == connections_.end()) continue;
        try {
            it->second->send_message(m.message);
        } catch (const TransportError&) {
            // The reader thread reports the disconnect.
        }
    }
    for (ConnectionId id : out.close) {
        auto it = connections_.find(id);
        if (it == connections_.end()) continue;
        it->second->close();
        connections_.erase(it);
    }
}

void StateServer::run() {
    std::thread acceptor([this] {
        while (auto conn = listener_->accept()) {
            push({Event::Type::connected, 0, {}, std::shared_ptr<Connection>(std::move(conn))});
        }
    });

    using Clock = std::chrono::steady_clock;
    std::optional<Clock::time_point> deadline;
    std::uint64_t generation = core_.barrier_generation();
    bool stopping = false;
    while (!stopping && core_.phase() != ServerCore::Phase::finished) {
        std::optional<Event> event;
        {
            std::unique_lock lock(mutex_);
            auto ready = [&] { return !events_.empty(); };
            if (deadline) {
                cv_.wait_until(lock, *deadline, ready);
            } else {
                cv_.wait(lock, ready);
            }
            if (!events_.empty()) {
                event = std::move(events_.front());
                events_.pop_front();
            }
        }
        if (!event) {
            apply(core_.on_timeout());
        } else {
            switch (event->type) {
                case Event::Type::connected: {
                    const ConnectionId id = next_id_++;
                    connections_[id] = event->connection;
                    threads_.emplace_back([this, id, conn = event->connection] {
                        try {
                            while (auto body = conn->receive()) {
                                push({Event::Type::frame, id, std::move(*body)});
                            }
                        } catch (const std::exception&) {
                            // Oversized or broken frame: treat as a disconnect.
                        }
                        push({Event::Type::closed, id});
                    });
                    break;
                }
                case Event::Type::frame:
                    if (connections_.contains(event->id)) apply(core_.on_frame(event->id, event->body));
                    break;
                case Event::Type::closed:
                    if (auto it = connections_.find(event->id); it != connections_.end()) {
                        it->second->close();
                        connections_.erase(it);
                    }
                    apply(core_.on_disconnect(event->id));
                    break;
                case Event::Type::start: apply(core_.start()); break;
                case Event::Type::stop: stopping = true; break;
            }
        }
        if (core_.barrier_generation() != generation) {
            generation = core_.barrier_generation();
            deadline = Clock::now() + core_.config().step_timeout;
        }
        if (core_.phase() != ServerCore::Phase::running) deadline.reset();
    }

    listener_->close();
    acceptor.join();
    for (auto& [id, conn] : connections_) conn->close();
    connections_.clear();
    for (auto& t : threads_) t.join();
    threads_.clear();
}

// ---------------------------------------------------------------------------
// RemoteLink
// ---------------------------------------------------------------------------

RemoteLink::RemoteLink(Connector connector) : connector_(std::move(connector)) {}

RemoteLink::~RemoteLink() { disconnect(); }

void RemoteLink::disconnect() {
    if (connection_) {
        connection_->close();
        connection_.reset();
    }
}

Message RemoteLink::receive() {
    auto m = connection_->receive_message();
    if (!m) {
        disconnect();
        throw TransportError("connection_closed", "the state server closed the connection");
    }
    return *m;
}

namespace {

std::string payload_string(const Message& m, const char* key) {
    auto it = m.payload.find(key);
    return it != m.payload.end() && it->is_string() ? it->get<std::string>() : std::string("unknown");
}

}  // namespace

JoinResult RemoteLink::join(const TeamJoin& join, double requested_dt) {
    disconnect();
    team_ = join.team;
    connection_ = connector_();
    nlohmann::json payload = team_join_to_json(join);
    payload["dt"] = requested_dt;
    connection_->send_message({MessageKind::join, 0, team_, std::move(payload)});

    const Message reply = receive();
    if (reply.kind == MessageKind::join_deny) {
        disconnect();
        throw EnvironmentError(payload_string(reply, "code"), payload_string(reply, "message"));
    }
    if (reply.kind == MessageKind::error) {
        disconnect();
        throw ConfigError(payload_string(reply, "code"), payload_string(reply, "message"));
    }
    if (reply.kind != MessageKind::join_accept) {
        disconnect();
        throw ProtocolError("unexpected_message", "expected JOIN_ACCEPT, got " +
                                                      std::string(to_string(reply.kind)));
    }
    const double dt = reply.payload.at("dt").get<double>();

    const Message first = receive();
    switch (first.kind) {
        case MessageKind::central_state:
            if (first.step_index != 0) break;
            return {dt, team_view_from_json(first.payload, 0)};
        case MessageKind::error:
            disconnect();
            throw ConfigError(payload_string(first, "code"), payload_string(first, "message"));
        case MessageKind::episode_end:
            disconnect();
            throw EnvironmentError(payload_string(first, "reason"), "episode ended before it started");
        default: break;
    }
    disconnect();
    throw ProtocolError("unexpected_message", "expected CENTRAL_STATE for step 0");
}

TeamView RemoteLink::report(const TeamReport& report) {
    if (!connection_) throw EnvironmentError("not_joined", "call reset before step");
    try {
        connection_->send_message(
            {MessageKind::state_report, report.step_index, team_, team_report_to_json(report)});
    } catch (const TransportError&) {
        // The server may already have ended the episode and closed; its
        // last messages are still queued and say why.
    }
    const Message m = receive();
    switch (m.kind) {
        case MessageKind::central_state: {
            if (m.step_index != report.step_index) {
                disconnect();
                throw ProtocolError("desync", "central state for step " + std::to_string(m.step_index) +
                                                  " answered report " + std::to_string(report.step_index));
            }
            TeamView view = team_view_from_json(m.payload, m.step_index);
            if (view.episode_end) disconnect();
            return view;
        }
        case MessageKind::error:
            disconnect();
            throw ProtocolError(payload_string(m, "code"),
                                payload_string(m, "message") + " (step " + std::to_string(m.step_index) + ")");
        case MessageKind::episode_end:
            disconnect();
            throw EnvironmentError(payload_string(m, "reason"),
                                   "episode ended by the server at step " + std::to_string(m.step_index));
        default:
            disconnect();
            throw ProtocolError("unexpected_message",
                                "unexpected " + std::string(to_string(m.kind)) + " from the server");
    }
}

}  // namespace aerogym
