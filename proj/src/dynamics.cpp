#include <aerogym/dynamics.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace aerogym {

namespace {

constexpr double kPi = std::numbers::pi;

bool finite3(const Vec3& v) { return v.allFinite(); }

double wrap_pi(double angle) {
    if (angle > -kPi && angle <= kPi) {
        return angle;
    }
    double wrapped = std::remainder(angle, 2.0 * kPi);
    if (wrapped <= -kPi) {
        wrapped += 2.0 * kPi;
    }
    return wrapped;
}

// Body-to-NED rotation for ZYX Euler angles.
Eigen::Matrix3d body_to_ned(const Vec3& attitude) {
    const double cphi = std::cos(attitude.x()), sphi = std::sin(attitude.x());
    const double cth = std::cos(attitude.y()), sth = std::sin(attitude.y());
    const double cpsi = std::cos(attitude.z()), spsi = std::sin(attitude.z());
    Eigen::Matrix3d r;
    r << cth * cpsi, sphi * sth * cpsi - cphi * spsi, cphi * sth * cpsi + sphi * spsi,
        cth * spsi, sphi * sth * spsi + cphi * cpsi, cphi * sth * spsi - sphi * cpsi,
        -sth, sphi * cth, cphi * cth;
    return r;
}

struct RawControls {
    double aileron, elevator, rudder, throttle;
};

StateDerivative derivatives_raw(const AircraftState& s, const RawControls& c,
                                const AircraftParams& p) {
    if (!s.all_finite() || !std::isfinite(c.aileron) || !std::isfinite(c.elevator) ||
        !std::isfinite(c.rudder) || !std::isfinite(c.throttle)) {
        throw ModelDomainError("non-finite state or control input");
    }
    const double airspeed = s.airspeed();
    if (!(airspeed > kAirspeedFloor)) {
        std::ostringstream msg;
        msg << "airspeed " << airspeed << " m/s below model validity floor";
        throw StallError(msg.str());
    }

    const double u = s.body_velocity.x(), v = s.body_velocity.y(), w = s.body_velocity.z();
    const double p_rate = s.body_rates.x(), q_rate = s.body_rates.y(), r_rate = s.body_rates.z();
    const double phi = s.attitude.x(), theta = s.attitude.y();

    const double alpha = std::atan2(w, u);
    const double beta = std::asin(std::clamp(v / airspeed, -1.0, 1.0));
    const double qbar = 0.5 * air_density(s.altitude()) * airspeed * airspeed;
    const double qs = qbar * p.wing_area;
    const auto& a = p.aero;

    const double cl = a.CL0 + a.CL_alpha * alpha;
    const double cd = a.CD0 + a.k_induced * cl * cl;
    const double lift = qs * cl;
    const double drag = qs * cd;
    const double side = qs * a.CY_beta * beta;
    const double thrust = c.throttle * p.max_thrust;

    const double ca = std::cos(alpha), sa = std::sin(alpha);
    const double fx = -drag * ca + lift * sa;
    const double fz = -drag * sa - lift * ca;

    const double half_span_over_v = p.wing_span / (2.0 * airspeed);
    const double half_chord_over_v = p.chord / (2.0 * airspeed);
    const double roll_moment =
        qs * p.wing_span * (a.Cl_beta * beta + a.Cl_p * p_rate * half_span_over_v + a.Cl_da * c.aileron);
    const double pitch_moment =
        qs * p.chord *
        (a.Cm0 + a.Cm_alpha * alpha + a.Cm_q * q_rate * half_chord_over_v + a.Cm_de * c.elevator);
    const double yaw_moment =
        qs * p.wing_span * (a.Cn_beta * beta + a.Cn_r * r_rate * half_span_over_v + a.Cn_dr * c.rudder);

    const double sphi = std::sin(phi), cphi = std::cos(phi);
    const double sth = std::sin(theta), cth = std::cos(theta);
    const double m = p.mass;

    StateDerivative d;
    d.position_rate = body_to_ned(s.attitude) * s.body_velocity;
    d.attitude_rate = Vec3(p_rate + (q_rate * sphi + r_rate * cphi) * std::tan(theta),
                           q_rate * cphi - r_rate * sphi,
                           (q_rate * sphi + r_rate * cphi) / cth);
    d.velocity_rate = Vec3((fx + thrust) / m - kGravity * sth + r_rate * v - q_rate * w,
                           side / m + kGravity * sphi * cth + p_rate * w - r_rate * u,
                           fz / m + kGravity * cphi * cth + q_rate * u - p_rate * v);
    const Vec3& inertia = p.inertia_diag;
    d.rates_rate = Vec3((roll_moment + (inertia.y() - inertia.z()) * q_rate * r_rate) / inertia.x(),
                        (pitch_moment + (inertia.z() - inertia.x()) * p_rate * r_rate) / inertia.y(),
                        (yaw_moment + (inertia.x() - inertia.y()) * p_rate * q_rate) / inertia.z());

    for (double x : d.components()) {
        if (!std::isfinite(x)) {
            throw ModelDomainError("non-finite state derivative (Euler singularity or overflow)");
        }
    }
    return d;
}

AircraftState advance(const AircraftState& s, const StateDerivative& d, double h) {
    AircraftState out = s;
    out.position_ned = s.position_ned + h * d.position_rate;
    out.attitude = s.attitude + h * d.attitude_rate;
    out.body_velocity = s.body_velocity + h * d.velocity_rate;
    out.body_rates = s.body_rates + h * d.rates_rate;
    return out;
}

}  // namespace

bool AircraftState::all_finite() const {
    return finite3(position_ned) && finite3(attitude) && finite3(body_velocity) &&
           finite3(body_rates) && std::isfinite(sim_time);
}

std::array<double, 12> StateDerivative::components() const {
    return {position_rate.x(), position_rate.y(), position_rate.z(),
            attitude_rate.x(), attitude_rate.y(), attitude_rate.z(),
            velocity_rate.x(), velocity_rate.y(), velocity_rate.z(),
            rates_rate.x(),    rates_rate.y(),    rates_rate.z()};
}

ControlInputs ControlInputs::clamped(double aileron, double elevator, double rudder,
                                     double throttle) {
    if (!std::isfinite(aileron) || !std::isfinite(elevator) || !std::isfinite(rudder) ||
        !std::isfinite(throttle)) {
        throw ModelDomainError("non-finite control input");
    }
    ControlInputs c;
    c.aileron_ = std::clamp(aileron, -1.0, 1.0);
    c.elevator_ = std::clamp(elevator, -1.0, 1.0);
    c.rudder_ = std::clamp(rudder, -1.0, 1.0);
    c.throttle_ = std::clamp(throttle, 0.0, 1.0);
    c.clamped_ = c.aileron_ != aileron || c.elevator_ != elevator || c.rudder_ != rudder ||
                 c.throttle_ != throttle;
    return c;
}

void AircraftParams::validate() const {
    auto fail = [&](const std::string& what) {
        throw PresetError("preset '" + model_name + "': " + what);
    };
    if (model_name.empty()) fail("model_name must be non-empty");
    if (!(mass > 0.0)) fail("mass must be positive");
    if (!(wing_area > 0.0)) fail("wing_area must be positive");
    if (!(wing_span > 0.0)) fail("wing_span must be positive");
    if (!(chord > 0.0)) fail("chord must be positive");
    if (!(inertia_diag.array() > 0.0).all()) fail("inertia_diag must be positive");
    if (!(max_thrust > 0.0)) fail("max_thrust must be positive");
    if (!(aero.CD0 >= 0.0)) fail("CD0 must be non-negative");
    if (!(aero.CL_alpha > 0.0)) fail("CL_alpha must be positive");
    if (!(stall_speed > kAirspeedFloor)) fail("stall_speed must exceed the airspeed floor");
    if (!(min_trim_airspeed() < max_trim_airspeed())) fail("empty trim airspeed window");
}

double air_density(double altitude) {
    constexpr double rho0 = 1.225;
    constexpr double lapse = 2.25577e-5;
    constexpr double exponent = 4.25588;
    constexpr double tropopause = 11000.0;
    if (altitude <= tropopause) {
        return rho0 * std::pow(1.0 - lapse * altitude, exponent);
    }
    const double rho11 = rho0 * std::pow(1.0 - lapse * tropopause, exponent);
    return rho11 * std::exp(-(altitude - tropopause) / 6341.62);
}

double wrap_angle(double angle) { return wrap_pi(angle); }

Vec3 ned_velocity(const AircraftState& state) {
    return body_to_ned(state.attitude) * state.body_velocity;
}

Vec3 normalize_attitude(const Vec3& attitude) {
    double roll = attitude.x();
    double pitch = wrap_pi(attitude.y());
    double yaw = attitude.z();
    if (pitch > kPi / 2.0) {
        pitch = kPi - pitch;
        roll += kPi;
        yaw += kPi;
    } else if (pitch < -kPi / 2.0) {
        pitch = -kPi - pitch;
        roll += kPi;
        yaw += kPi;
    }
    return Vec3(wrap_pi(roll), pitch, wrap_pi(yaw));
}

StateDerivative derivatives(const AircraftState& state, const ControlInputs& controls,
                            const AircraftParams& params) {
    return derivatives_raw(state,
                           {controls.aileron(), controls.elevator(), controls.rudder(),
                            controls.throttle()},
                           params);
}

AircraftState step(const AircraftState& state, const ControlInputs& controls,
                   const AircraftParams& params, double dt) {
    if (!(dt > kMinDt && dt <= kMaxDt)) {
        throw ModelDomainError("dt must lie in (0, 0.5] s");
    }
    const StateDerivative k1 = derivatives(state, controls, params);
    const StateDerivative k2 = derivatives(advance(state, k1, dt / 2.0), controls, params);
    const StateDerivative k3 = derivatives(advance(state, k2, dt / 2.0), controls, params);
    const StateDerivative k4 = derivatives(advance(state, k3, dt), controls, params);

    StateDerivative blended;
    blended.position_rate = k1.position_rate + 2.0 * k2.position_rate + 2.0 * k3.position_rate + k4.position_rate;
    blended.attitude_rate = k1.attitude_rate + 2.0 * k2.attitude_rate + 2.0 * k3.attitude_rate + k4.attitude_rate;
    blended.velocity_rate = k1.velocity_rate + 2.0 * k2.velocity_rate + 2.0 * k3.velocity_rate + k4.velocity_rate;
    blended.rates_rate = k1.rates_rate + 2.0 * k2.rates_rate + 2.0 * k3.rates_rate + k4.rates_rate;

    AircraftState next = advance(state, blended, dt / 6.0);
    next.attitude = normalize_attitude(next.attitude);
    next.sim_time = state.sim_time + dt;
    if (!next.all_finite()) {
        throw DivergenceError("integration produced non-finite state at t=" +
                              std::to_string(next.sim_time));
    }
    return next;
}

TrimResult trim(const AircraftParams& params, double target_airspeed, double target_altitude,
                double yaw) {
    params.validate();
    if (!std::isfinite(target_airspeed) || !std::isfinite(target_altitude) || !std::isfinite(yaw)) {
        throw InfeasibleTrimError("non-finite trim target");
    }
    if (target_airspeed < params.min_trim_airspeed()) {
        std::ostringstream msg;
        msg << "airspeed " << target_airspeed << " m/s below minimum trim airspeed "
            << params.min_trim_airspeed() << " m/s (1.2 x stall speed) for " << params.model_name;
        throw InfeasibleTrimError(msg.str());
    }
    if (target_airspeed > params.max_trim_airspeed()) {
        std::ostringstream msg;
        msg << "airspeed " << target_airspeed << " m/s above maximum trim airspeed "
            << params.max_trim_airspeed() << " m/s (0.95 x max level speed) for "
            << params.model_name;
        throw InfeasibleTrimError(msg.str());
    }

    const double airspeed = target_airspeed;
    auto make_state = [&](double pitch) {
        AircraftState s;
        s.position_ned = Vec3(0.0, 0.0, -target_altitude);
        s.attitude = Vec3(0.0, pitch, yaw);
        s.body_velocity = Vec3(airspeed * std::cos(pitch), 0.0, airspeed * std::sin(pitch));
        return s;
    };
    auto residual = [&](const Eigen::Vector3d& x) {
        const StateDerivative d =
            derivatives_raw(make_state(x(0)), {0.0, x(1), 0.0, x(2)}, params);
        return Eigen::Vector3d(d.velocity_rate.x(), d.velocity_rate.z(), d.rates_rate.y());
    };

    // Initial guess from the lift/moment/drag balance ignoring thrust tilt.
    const auto& a = params.aero;
    const double qs = 0.5 * air_density(target_altitude) * airspeed * airspeed * params.wing_area;
    const double cl_needed = params.mass * kGravity / qs;
    const double alpha0 = (cl_needed - a.CL0) / a.CL_alpha;
    Eigen::Vector3d x(alpha0, -(a.Cm0 + a.Cm_alpha * alpha0) / a.Cm_de,
                      qs * (a.CD0 + a.k_induced * cl_needed * cl_needed) / params.max_thrust);

    constexpr int kMaxIterations = 200;
    constexpr double kTolerance = 1e-10;
    Eigen::Vector3d r = residual(x);
    int iteration = 0;
    for (; iteration < kMaxIterations && r.cwiseAbs().maxCoeff() > kTolerance; ++iteration) {
        Eigen::Matrix3d jac;
        for (int j = 0; j < 3; ++j) {
            const double h = 1e-6 * std::max(1.0, std::abs(x(j)));
            Eigen::Vector3d xp = x, xm = x;
            xp(j) += h;
            xm(j) -= h;
            jac.col(j) = (residual(xp) - residual(xm)) / (2.0 * h);
        }
        const Eigen::Vector3d delta = jac.fullPivLu().solve(-r);
        double lambda = 1.0;
        Eigen::Vector3d candidate = x + delta;
        Eigen::Vector3d rc = residual(candidate);
        while (rc.norm() >= r.norm() && lambda > 1e-4) {
            lambda *= 0.5;
            candidate = x + lambda * delta;
            rc = residual(candidate);
        }
        x = candidate;
        r = rc;
    }
    if (r.cwiseAbs().maxCoeff() > kTolerance) {
        throw InfeasibleTrimError("trim did not converge in 200 iterations for " +
                                  params.model_name);
    }

    const double pitch = x(0), elevator = x(1), throttle = x(2);
    auto bound_error = [&](const std::string& what) {
        std::ostringstream msg;
        msg << what << " at airspeed " << target_airspeed << " m/s, altitude " << target_altitude
            << " m for " << params.model_name;
        throw InfeasibleTrimError(msg.str());
    };
    if (throttle > 1.0) bound_error("trim throttle above 1");
    if (throttle < 0.0) bound_error("trim throttle below 0");
    if (elevator > 1.0) bound_error("trim elevator above 1");
    if (elevator < -1.0) bound_error("trim elevator below -1");
    if (std::abs(pitch) >= kPi / 4.0) bound_error("trim pitch outside +-45 deg");

    return {make_state(pitch), ControlInputs::clamped(0.0, elevator, 0.0, throttle), iteration};
}

RigidBodyModel::RigidBodyModel(AircraftParams params) : params_(std::move(params)) {
    params_.validate();
}

StateDerivative RigidBodyModel::derivatives(const AircraftState& state,
                                            const ControlInputs& controls) const {
    return aerogym::derivatives(state, controls, params_);
}

AircraftState RigidBodyModel::step(const AircraftState& state, const ControlInputs& controls,
                                   double dt) const {
    return aerogym::step(state, controls, params_, dt);
}

TrimResult RigidBodyModel::trim(double airspeed, double altitude, double yaw) const {
    return aerogym::trim(params_, airspeed, altitude, yaw);
}

}  // namespace aerogym
