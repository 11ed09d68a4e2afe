#include <aerogym/plot.hpp>

#include <aerogym/controllers.hpp>
#include <aerogym/team_config.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>

namespace aerogym {

namespace {

struct Channels {
    std::string control;
    std::optional<StateField> tracked;
};

Channels channels_for(const TaskSpec& task) {
    const auto kind = controller_for_task(task);
    if (!kind) return {"elevator", std::nullopt};
    switch (kind->type) {
        case ControllerType::altitude_hold: return {"elevator", StateField::altitude};
        case ControllerType::pitch_hold: return {"elevator", StateField::pitch};
        case ControllerType::roll_hold: return {"aileron", StateField::roll};
        case ControllerType::heading_hold: return {"aileron", StateField::yaw};
        case ControllerType::airspeed_hold: return {"throttle", StateField::airspeed};
        case ControllerType::level_flight: return {"aileron", std::nullopt};
    }
    return {"elevator", std::nullopt};
}

double channel_value(const ControlInputs& c, const std::string& channel) {
    if (channel == "aileron") return c.aileron();
    if (channel == "rudder") return c.rudder();
    if (channel == "throttle") return c.throttle();
    return c.elevator();
}

std::string number(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

std::string fixed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

EpisodeSignals extract_signals(const TrajectoryRecord& record) {
    const auto& h = record.header;
    const TaskSpec task = make_task_by_name(h.task, h.task_params);
    const Channels ch = channels_for(task);
    EpisodeSignals s;
    s.label = h.team + "/" + h.callsign;
    s.task = h.task;
    s.control_channel = ch.control;
    s.has_target = task.target.has_value() && ch.tracked.has_value();
    if (s.has_target) s.tracked_field = std::string(to_string(*ch.tracked));
    const std::uint64_t seed = aircraft_seed(h.seed, h.team, h.callsign);
    for (const auto& row : record.steps) {
        s.step.push_back(row.step_index);
        s.time.push_back(row.state.sim_time);
        s.control.push_back(channel_value(row.action, ch.control));
        s.reward.push_back(row.reward);
        if (s.has_target) {
            s.tracked.push_back(extract_field(row.state, *ch.tracked));
            s.target.push_back(task.target->value_at(row.state.sim_time, seed));
        }
    }
    return s;
}

int signal_columns(const std::vector<EpisodeSignals>& episodes) {
    const bool any = std::any_of(episodes.begin(), episodes.end(), [](const auto& e) { return e.has_target; });
    return any ? 3 : 2;
}

std::string signals_csv(const std::vector<EpisodeSignals>& episodes) {
    const bool targets = signal_columns(episodes) == 3;
    std::ostringstream out;
    out << "episode,label,task,step,time,control_channel,control";
    if (targets) out << ",tracked_field,tracked,target";
    out << ",reward\n";
    for (std::size_t e = 0; e < episodes.size(); ++e) {
        const auto& s = episodes[e];
        for (std::size_t i = 0; i < s.step.size(); ++i) {
            out << e << ',' << csv_field(s.label) << ',' << csv_field(s.task) << ',' << s.step[i] << ','
                << number(s.time[i]) << ',' << s.control_channel << ',' << number(s.control[i]);
            if (targets) {
                if (s.has_target) {
                    out << ',' << s.tracked_field << ',' << number(s.tracked[i]) << ',' << number(s.target[i]);
                } else {
                    out << ",,,";
                }
            }
            out << ',' << number(s.reward[i]) << '\n';
        }
    }
    return out.str();
}

namespace {

constexpr double kCellW = 320.0;
constexpr double kCellH = 170.0;
constexpr double kPadL = 48.0;
constexpr double kPadR = 12.0;
constexpr double kPadT = 24.0;
constexpr double kPadB = 22.0;
constexpr double kHeader = 28.0;

struct Series {
    const std::vector<double>* values;
    const char* stroke;
    bool dashed;
};

void chart(std::ostringstream& out, double x0, double y0, const std::string& title, const std::vector<double>& time,
           const std::vector<Series>& series) {
    const double w = kCellW - kPadL - kPadR;
    const double h = kCellH - kPadT - kPadB;
    const double left = x0 + kPadL;
    const double top = y0 + kPadT;
    out << "<text class=\"title\" x=\"" << fixed2(left) << "\" y=\"" << fixed2(y0 + 16) << "\">"
        << xml_escape(title) << "</text>\n";
    out << "<rect class=\"axes\" x=\"" << fixed2(left) << "\" y=\"" << fixed2(top) << "\" width=\"" << fixed2(w)
        << "\" height=\"" << fixed2(h) << "\"/>\n";
    if (time.empty()) return;

    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& s : series) {
        for (double v : *s.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!(hi > lo)) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double t0 = time.front();
    const double t1 = time.back() > t0 ? time.back() : t0 + 1.0;
    const auto px = [&](double t) { return left + (t - t0) / (t1 - t0) * w; };
    const auto py = [&](double v) { return top + (hi - v) / (hi - lo) * h; };

    for (const auto& s : series) {
        out << "<polyline fill=\"none\" stroke=\"" << s.stroke << "\"";
        if (s.dashed) out << " stroke-dasharray=\"5,3\"";
        out << " points=\"";
        for (std::size_t i = 0; i < time.size(); ++i) {
            if (i) out << ' ';
            out << fixed2(px(time[i])) << ',' << fixed2(py((*s.values)[i]));
        }
        out << "\"/>\n";
    }
    out << "<text class=\"tick\" x=\"" << fixed2(left - 4) << "\" y=\"" << fixed2(top + 8)
        << "\" text-anchor=\"end\">" << fixed2(hi) << "</text>\n";
    out << "<text class=\"tick\" x=\"" << fixed2(left - 4) << "\" y=\"" << fixed2(top + h)
        << "\" text-anchor=\"end\">" << fixed2(lo) << "</text>\n";
    out << "<text class=\"tick\" x=\"" << fixed2(left) << "\" y=\"" << fixed2(top + h + 14) << "\">"
        << fixed2(t0) << " s</text>\n";
    out << "<text class=\"tick\" x=\"" << fixed2(left + w) << "\" y=\"" << fixed2(top + h + 14)
        << "\" text-anchor=\"end\">" << fixed2(t1) << " s</text>\n";
}

}  // namespace

std::string signals_svg(const std::vector<EpisodeSignals>& episodes) {
    const int cols = signal_columns(episodes);
    const auto rows = episodes.size();
    const double note = cols == 2 ? 18.0 : 0.0;
    const double width = kCellW * cols;
    const double height = kHeader + note + kCellH * static_cast<double>(rows);
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed2(width) << "\" height=\""
        << fixed2(height) << "\" viewBox=\"0 0 " << fixed2(width) << ' ' << fixed2(height) << "\">\n";
    out << "<style>text{font-family:sans-serif;font-size:11px}.title{font-weight:bold}"
           ".tick{font-size:9px;fill:#555}.axes{fill:none;stroke:#999}</style>\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    const char* heads[] = {"control", cols == 3 ? "target" : "reward", "reward"};
    for (int c = 0; c < cols; ++c) {
        out << "<text class=\"title\" x=\"" << fixed2(kCellW * c + kCellW / 2) << "\" y=\"18\" text-anchor=\"middle\">"
            << heads[c] << "</text>\n";
    }
    if (note > 0) {
        out << "<text class=\"note\" x=\"8\" y=\"" << fixed2(kHeader + 10)
            << "\">note: no task in this figure declares a target signal</text>\n";
    }
    for (std::size_t r = 0; r < rows; ++r) {
        const auto& s = episodes[r];
        const double y0 = kHeader + note + kCellH * static_cast<double>(r);
        out << "<g class=\"episode\" data-episode=\"" << r << "\">\n";
        chart(out, 0, y0, s.label + " " + s.control_channel, s.time, {{&s.control, "#1f77b4", false}});
        int c = 1;
        if (cols == 3) {
            if (s.has_target) {
                chart(out, kCellW, y0, s.tracked_field + " vs target", s.time,
                      {{&s.tracked, "#1f77b4", false}, {&s.target, "#d62728", true}});
            } else {
                chart(out, kCellW, y0, "no target", {}, {});
            }
            c = 2;
        }
        chart(out, kCellW * c, y0, "reward", s.time, {{&s.reward, "#2ca02c", false}});
        out << "</g>\n";
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace aerogym
