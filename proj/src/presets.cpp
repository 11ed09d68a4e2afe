#include <aerogym/presets.hpp>

#include "presets_embedded.hpp"

#include <algorithm>
#include <fstream>

namespace aerogym {

namespace {

// File key <-> struct member. Keys follow the coefficient names used in
// flight-mechanics tables.
struct CoefficientKey {
    const char* key;
    double AeroCoefficients::*member;
};

constexpr CoefficientKey kCoefficientKeys[] = {
    {"CL0", &AeroCoefficients::CL0},         {"CLalpha", &AeroCoefficients::CL_alpha},
    {"CD0", &AeroCoefficients::CD0},         {"k", &AeroCoefficients::k_induced},
    {"Cm0", &AeroCoefficients::Cm0},         {"Cmalpha", &AeroCoefficients::Cm_alpha},
    {"Cmq", &AeroCoefficients::Cm_q},        {"Cm_de", &AeroCoefficients::Cm_de},
    {"Clbeta", &AeroCoefficients::Cl_beta},  {"Clp", &AeroCoefficients::Cl_p},
    {"Cl_da", &AeroCoefficients::Cl_da},     {"Cnbeta", &AeroCoefficients::Cn_beta},
    {"Cnr", &AeroCoefficients::Cn_r},        {"Cn_dr", &AeroCoefficients::Cn_dr},
    {"CYbeta", &AeroCoefficients::CY_beta},
};

double number(const nlohmann::json& doc, const char* key) {
    if (!doc.contains(key) || !doc.at(key).is_number()) {
        throw PresetError(std::string("missing or non-numeric field '") + key + "'");
    }
    return doc.at(key).get<double>();
}

}  // namespace

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    for (const auto& entry : embedded::kPresets) {
        names.emplace_back(entry.name);
    }
    std::sort(names.begin(), names.end());
    return names;
}

AircraftParams load_preset(std::string_view name) {
    for (const auto& entry : embedded::kPresets) {
        if (entry.name == name) {
            return preset_from_json(nlohmann::json::parse(entry.document));
        }
    }
    throw PresetError("unknown aircraft preset '" + std::string(name) + "'");
}

AircraftParams load_preset_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw PresetError("cannot open preset file " + path.string());
    }
    try {
        return preset_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw PresetError(path.string() + ": " + e.what());
    }
}

AircraftParams preset_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) {
        throw PresetError("preset document must be an object");
    }
    if (!doc.contains("schema_version") || doc.at("schema_version") != kPresetSchemaVersion) {
        throw PresetError("unsupported preset schema_version");
    }
    AircraftParams p;
    if (!doc.contains("model_name") || !doc.at("model_name").is_string()) {
        throw PresetError("missing model_name");
    }
    p.model_name = doc.at("model_name").get<std::string>();
    p.mass = number(doc, "mass");
    p.wing_area = number(doc, "wing_area");
    p.wing_span = number(doc, "wing_span");
    p.chord = number(doc, "chord");
    const auto& inertia = doc.at("inertia_diag");
    if (!inertia.is_array() || inertia.size() != 3) {
        throw PresetError("inertia_diag must be a 3-element array");
    }
    p.inertia_diag = Vec3(inertia[0].get<double>(), inertia[1].get<double>(), inertia[2].get<double>());
    const auto& aero = doc.at("aero_coefficients");
    for (const auto& [key, member] : kCoefficientKeys) {
        p.aero.*member = number(aero, key);
    }
    p.max_thrust = number(doc, "max_thrust");
    p.stall_speed = number(doc, "stall_speed");
    p.max_level_speed = number(doc, "max_level_speed");
    if (doc.contains("controllers")) {
        for (const auto& [kind, gains] : doc.at("controllers").items()) {
            GainTable table;
            for (const auto& [gain, value] : gains.items()) {
                table[gain] = value.get<double>();
            }
            p.controller_gains[kind] = std::move(table);
        }
    }
    p.validate();
    return p;
}

nlohmann::json preset_to_json(const AircraftParams& p) {
    nlohmann::json aero = nlohmann::json::object();
    for (const auto& [key, member] : kCoefficientKeys) {
        aero[key] = p.aero.*member;
    }
    nlohmann::json controllers = nlohmann::json::object();
    for (const auto& [kind, table] : p.controller_gains) {
        controllers[kind] = table;
    }
    return {
        {"schema_version", kPresetSchemaVersion},
        {"model_name", p.model_name},
        {"mass", p.mass},
        {"wing_area", p.wing_area},
        {"wing_span", p.wing_span},
        {"chord", p.chord},
        {"inertia_diag", {p.inertia_diag.x(), p.inertia_diag.y(), p.inertia_diag.z()}},
        {"aero_coefficients", aero},
        {"max_thrust", p.max_thrust},
        {"stall_speed", p.stall_speed},
        {"max_level_speed", p.max_level_speed},
        {"controllers", controllers},
    };
}

}  // namespace aerogym
