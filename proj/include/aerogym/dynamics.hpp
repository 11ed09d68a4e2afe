#pragma once

// Simplified rigid-body 6-DOF fixed-wing model.
//
// Frames: flat-earth NED (north, east, down) and body axes (x forward,
// y right wing, z down). Euler angles are ZYX (yaw, pitch, roll). Control
// sign convention: positive aileron rolls right, positive elevator pitches
// the nose up, positive rudder yaws the nose right.

#include <aerogym/error.hpp>

#include <Eigen/Core>

#include <array>
#include <map>
#include <memory>
#include <string>
#include <utility>

namespace aerogym {

using Vec3 = Eigen::Vector3d;

inline constexpr double kGravity = 9.80665;        // m/s^2
inline constexpr double kAirspeedFloor = 1.0;      // m/s, model validity floor
inline constexpr double kDefaultDt = 0.1;          // s
inline constexpr double kMinDt = 0.0;              // exclusive
inline constexpr double kMaxDt = 0.5;              // inclusive

struct AircraftState {
    Vec3 position_ned = Vec3::Zero();   // m
    Vec3 attitude = Vec3::Zero();       // roll, pitch, yaw [rad]
    Vec3 body_velocity = Vec3::Zero();  // u, v, w [m/s]
    Vec3 body_rates = Vec3::Zero();     // p, q, r [rad/s]
    double sim_time = 0.0;              // s

    double roll() const { return attitude.x(); }
    double pitch() const { return attitude.y(); }
    double yaw() const { return attitude.z(); }
    double airspeed() const { return body_velocity.norm(); }
    double altitude() const { return -position_ned.z(); }

    bool all_finite() const;

    friend bool operator==(const AircraftState&, const AircraftState&) = default;
};

/// Time derivative of everything in AircraftState except sim_time.
struct StateDerivative {
    Vec3 position_rate = Vec3::Zero();  // NED velocity
    Vec3 attitude_rate = Vec3::Zero();  // Euler angle rates
    Vec3 velocity_rate = Vec3::Zero();  // body-frame acceleration
    Vec3 rates_rate = Vec3::Zero();     // angular acceleration

    /// The 12 components in state order.
    std::array<double, 12> components() const;
};

/// Normalized surface/throttle commands. Construction clamps into range and
/// remembers whether it had to.
class ControlInputs {
public:
    ControlInputs() = default;

    /// Throws ModelDomainError on non-finite input.
    static ControlInputs clamped(double aileron, double elevator, double rudder, double throttle);

    double aileron() const { return aileron_; }
    double elevator() const { return elevator_; }
    double rudder() const { return rudder_; }
    double throttle() const { return throttle_; }
    bool was_clamped() const { return clamped_; }

    std::array<double, 4> as_array() const { return {aileron_, elevator_, rudder_, throttle_}; }

    /// Value equality; the clamped flag is metadata and does not participate.
    friend bool operator==(const ControlInputs& a, const ControlInputs& b) {
        return a.as_array() == b.as_array();
    }

private:
    double aileron_ = 0.0;
    double elevator_ = 0.0;
    double rudder_ = 0.0;
    double throttle_ = 0.0;
    bool clamped_ = false;
};

/// Linear aerodynamic coefficient set. Control derivatives are per unit of
/// normalized command, rate derivatives use the usual b/2V and c/2V scaling.
struct AeroCoefficients {
    double CL0 = 0.0;
    double CL_alpha = 0.0;
    double CD0 = 0.0;
    double k_induced = 0.0;
    double Cm0 = 0.0;
    double Cm_alpha = 0.0;
    double Cm_q = 0.0;
    double Cm_de = 0.0;
    double Cl_beta = 0.0;
    double Cl_p = 0.0;
    double Cl_da = 0.0;
    double Cn_beta = 0.0;
    double Cn_r = 0.0;
    double Cn_dr = 0.0;
    double CY_beta = 0.0;
};

using GainTable = std::map<std::string, double>;

struct AircraftParams {
    std::string model_name;
    double mass = 0.0;        // kg
    double wing_area = 0.0;   // m^2
    double wing_span = 0.0;   // m
    double chord = 0.0;       // m
    Vec3 inertia_diag = Vec3::Zero();  // Ixx, Iyy, Izz [kg m^2]
    AeroCoefficients aero;
    double max_thrust = 0.0;  // N

    // Trim feasibility window: [1.2 * stall_speed, 0.95 * max_level_speed].
    double stall_speed = 0.0;      // m/s
    double max_level_speed = 0.0;  // m/s

    // Controller gains keyed by controller kind name.
    std::map<std::string, GainTable> controller_gains;

    double min_trim_airspeed() const { return 1.2 * stall_speed; }
    double max_trim_airspeed() const { return 0.95 * max_level_speed; }

    /// Throws PresetError naming the first violated invariant.
    void validate() const;
};

/// ISA density [kg/m^3] at geometric altitude [m].
double air_density(double altitude);

/// NED velocity of the body (body_velocity rotated by the attitude).
Vec3 ned_velocity(const AircraftState& state);

/// Altitude rate [m/s], positive climbing.
inline double climb_rate(const AircraftState& state) { return -ned_velocity(state).z(); }

/// Wraps an angle into (-pi, pi]; values already in range are unchanged.
double wrap_angle(double angle);

/// Wraps roll/yaw into (-pi, pi] and folds pitch into [-pi/2, pi/2].
/// Angles already in range are returned bit-unchanged.
Vec3 normalize_attitude(const Vec3& attitude);

/// Rigid-body equations of motion.
/// Throws ModelDomainError on non-finite input and StallError below the
/// airspeed floor.
StateDerivative derivatives(const AircraftState& state, const ControlInputs& controls,
                            const AircraftParams& params);

/// One classical RK4 step of length dt (0 < dt <= 0.5).
/// Throws DivergenceError if the result is not finite.
AircraftState step(const AircraftState& state, const ControlInputs& controls,
                   const AircraftParams& params, double dt);

struct TrimResult {
    AircraftState state;
    ControlInputs controls;
    int iterations = 0;
};

/// Wings-level, constant-altitude trim by damped Newton over
/// (pitch, elevator, throttle). The horizontal position rates are the
/// cruise velocity; every other derivative component is driven below 1e-6.
/// Throws InfeasibleTrimError naming the violated bound.
TrimResult trim(const AircraftParams& params, double target_airspeed, double target_altitude,
                double yaw = 0.0);

/// Pluggable dynamics backend. The built-in implementation wraps the free
/// functions above; a higher-fidelity model can be substituted here.
class DynamicsModel {
public:
    virtual ~DynamicsModel() = default;
    virtual const AircraftParams& params() const = 0;
    virtual StateDerivative derivatives(const AircraftState& state,
                                        const ControlInputs& controls) const = 0;
    virtual AircraftState step(const AircraftState& state, const ControlInputs& controls,
                               double dt) const = 0;
    virtual TrimResult trim(double airspeed, double altitude, double yaw) const = 0;
};

class RigidBodyModel final : public DynamicsModel {
public:
    explicit RigidBodyModel(AircraftParams params);

    const AircraftParams& params() const override { return params_; }
    StateDerivative derivatives(const AircraftState& state,
                                const ControlInputs& controls) const override;
    AircraftState step(const AircraftState& state, const ControlInputs& controls,
                       double dt) const override;
    TrimResult trim(double airspeed, double altitude, double yaw) const override;

private:
    AircraftParams params_;
};

}  // namespace aerogym
