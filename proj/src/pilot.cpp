#include <aerogym/pilot.hpp>

#include <aerogym/error.hpp>
#include <aerogym/team_file.hpp>

namespace aerogym {

TeamPilot::TeamPilot(const TeamRuntime& runtime) {
    for (std::size_t i = 0; i < runtime.size(); ++i) {
        const RosterEntry& entry = runtime.config().roster[i];
        const std::string mode = entry.controller.empty() ? std::string(controller_mode::automatic)
                                                          : entry.controller;
        const TrimResult& trim = runtime.initial_trim(i);
        Slot slot;
        slot.hold = trim.controls;
        if (mode == controller_mode::automatic) {
            slot.kind = controller_for_task(entry.task);
            if (slot.kind) {
                slot.memory = init_controller(*slot.kind, runtime.params(i), trim, runtime.aircraft_seed(i));
            }
        } else if (mode == controller_mode::manual) {
            slot.manual = true;
            slot.hold = ControlInputs::clamped(0.0, 0.0, 0.0, trim.controls.throttle());
        } else if (mode != controller_mode::trim) {
            throw ConfigError("unknown_controller", "unknown controller '" + mode + "' for " +
                                                        entry.aircraft.callsign);
        }
        slots_.push_back(std::move(slot));
    }
}

std::vector<double> TeamPilot::actions(const TeamRuntime& runtime) {
    std::vector<double> out;
    out.reserve(kActionsPerAircraft * slots_.size());
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        Slot& slot = slots_[i];
        ControlInputs c = slot.hold;
        if (slot.kind && !runtime.frozen(i)) {
            ControlOutput o = control(*slot.kind, runtime.states()[i], runtime.dt(), slot.memory);
            slot.memory = std::move(o.memory);
            c = o.controls;
        }
        const auto a = c.as_array();
        out.insert(out.end(), a.begin(), a.end());
    }
    return out;
}

std::vector<std::size_t> TeamPilot::manual_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        if (slots_[i].manual) out.push_back(i);
    }
    return out;
}

void TeamPilot::set_manual_controls(std::size_t i, const ControlInputs& controls) {
    if (slots_.at(i).manual) slots_[i].hold = controls;
}

}  // namespace aerogym
