#pragma once

// Drives every aircraft of a team from its roster "controller" field:
// the task's own controller, a trim hold, or externally supplied manual
// controls. Produces the stacked action vector Environment::step expects.

#include <aerogym/controllers.hpp>
#include <aerogym/environment.hpp>

#include <optional>
#include <vector>

namespace aerogym {

class TeamPilot {
public:
    /// Throws ConfigError("unknown_controller") for an unrecognised mode.
    explicit TeamPilot(const TeamRuntime& runtime);

    /// Actions for the runtime's current states; advances controller memory.
    std::vector<double> actions(const TeamRuntime& runtime);

    bool manual(std::size_t i) const { return slots_[i].manual; }
    std::vector<std::size_t> manual_indices() const;
    /// Held until replaced. Before the first call a manual aircraft flies
    /// with centred surfaces and its trim throttle.
    void set_manual_controls(std::size_t i, const ControlInputs& controls);

private:
    struct Slot {
        std::optional<ControllerKind> kind;
        ControllerMemory memory;
        ControlInputs hold;  // trim, or the latest manual controls
        bool manual = false;
    };
    std::vector<Slot> slots_;
};

}  // namespace aerogym
