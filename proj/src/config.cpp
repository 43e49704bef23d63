#include "afcmem/config.hpp"

#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace afcmem::config {

using nlohmann::json;

std::filesystem::path config_root() {
    if (const char* env = std::getenv("AFCMEM_CONFIG_ROOT"); env && *env) {
        return std::filesystem::path(env);
    }
    return std::filesystem::path("config");
}

json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::runtime_error("parse error in " + path.string() + ": " + e.what());
    }
    return j;
}

namespace {

Eigen::Matrix3d matrix3(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 3) throw std::runtime_error(what + ": expected 3x3 array");
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r) {
        if (!j[r].is_array() || j[r].size() != 3) {
            throw std::runtime_error(what + ": expected 3x3 array");
        }
        for (int c = 0; c < 3; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

spectra::SpinSystem parse_system(const json& j, const std::string& name) {
    spectra::SpinSystem s;
    s.spin = j.at("spin").get<double>();
    s.label = spectra::state_label_from_string(j.at("label").get<std::string>());
    s.zeeman_mhz_per_t = matrix3(j.at("zeeman_mhz_per_t"), name + ".zeeman_mhz_per_t");
    s.quadrupole_mhz = matrix3(j.at("quadrupole_mhz"), name + ".quadrupole_mhz");
    s.validate();
    return s;
}

spectra::MagneticField parse_field(const json& j) {
    Eigen::Vector3d dir;
    const auto& d = j.at("direction");
    for (int i = 0; i < 3; ++i) dir(i) = d.at(i).get<double>();
    spectra::MagneticField f;
    f.magnitude_t = j.at("magnitude_t").get<double>();
    f.direction = dir.normalized();
    f.validate();
    return f;
}

comb::CombSpec parse_comb(const json& j) {
    comb::CombSpec c;
    c.periodicity_khz = j.at("periodicity_khz").get<double>();
    c.tooth_fwhm_khz = j.at("tooth_fwhm_khz").get<double>();
    c.bandwidth_khz = j.at("bandwidth_khz").get<double>();
    c.peak_od = j.at("peak_od").get<double>();
    c.background_od = j.value("background_od", 0.0);
    c.tooth_shape = comb::tooth_shape_from_string(j.value("tooth_shape", "gaussian"));
    c.validate();
    return c;
}

pulses::PulseShape parse_pulse(const json& j) {
    pulses::PulseShape p;
    p.family = pulses::pulse_family_from_string(j.at("family").get<std::string>());
    p.fwhm_us = j.at("fwhm_us").get<double>();
    p.peak_rabi_khz = j.at("peak_rabi_khz").get<double>();
    p.chirp_lo_khz = j.value("chirp_lo_khz", 0.0);
    p.chirp_hi_khz = j.value("chirp_hi_khz", 0.0);
    p.truncation = j.value("truncation", 3.0);
    p.carrier_phase_rad = j.value("carrier_phase_rad", 0.0);
    p.validate();
    return p;
}

pulses::InhomogeneousLine parse_line(const json& j) {
    pulses::InhomogeneousLine l;
    l.shape = pulses::line_shape_from_string(j.value("shape", "gaussian"));
    l.fwhm_khz = j.at("fwhm_khz").get<double>();
    l.rabi_spread = j.value("rabi_spread", 0.0);
    l.validate();
    return l;
}

dd::NoiseModel parse_noise(const json& j) {
    dd::NoiseModel n;
    n.kind = dd::noise_kind_from_string(j.at("kind").get<std::string>());
    n.amplitude_rad_per_s = j.at("amplitude_rad_per_s").get<double>();
    n.correlation_time_s = j.value("correlation_time_s", 1.0);
    n.exponent = j.value("exponent", 1.0);
    n.cutoff_lo_rad_per_s = j.value("cutoff_lo_rad_per_s", 1e-3);
    n.cutoff_hi_rad_per_s = j.value("cutoff_hi_rad_per_s", 1e5);
    n.rng_seed = j.value("rng_seed", std::uint64_t{1});
    n.validate();
    return n;
}

experiment::HeatingPreset parse_heating(const json& j) {
    experiment::HeatingPreset h;
    h.t_pi_us = j.at("t_pi_us").get<double>();
    h.tooth_broadening_khz_per_duty = j.at("tooth_broadening_khz_per_duty").get<double>();
    return h;
}

experiment::PumpPreset parse_pump(const json& j) {
    experiment::PumpPreset p;
    auto parse_lines = [](const json& arr) {
        std::vector<experiment::PumpLine> lines;
        for (const auto& e : arr) {
            // 1-based level labels in config, matching the printed diagrams
            lines.push_back({e.at(0).get<int>() - 1, e.at(1).get<int>() - 1});
        }
        return lines;
    };
    p.class_cleaning = parse_lines(j.at("class_cleaning"));
    p.spin_polarization = parse_lines(j.at("spin_polarization"));
    p.cycles = j.value("cycles", 40);
    p.pump_efficiency = j.value("pump_efficiency", 0.9);
    p.max_offset_mhz = j.value("max_offset_mhz", 400.0);
    if (j.contains("branching")) {
        const auto& b = j.at("branching");
        for (int g = 0; g < 6; ++g) {
            for (int e = 0; e < 6; ++e) p.branching(g, e) = b.at(g).at(e).get<double>();
        }
    }
    return p;
}

experiment::InterferenceConfig parse_interference(const json& j) {
    experiment::InterferenceConfig c;
    c.incoherent_background = j.value("incoherent_background", 0.0);
    c.coherence_factor = j.value("coherence_factor", 1.0);
    c.intensity_noise = j.value("intensity_noise", 0.0);
    c.seed = j.value("seed", std::uint64_t{1});
    return c;
}

StoragePreset parse_storage(const json& j) {
    StoragePreset s;
    s.comb = j.at("comb").get<std::string>();
    s.control = j.at("control").get<std::string>();
    s.input = j.at("input").get<std::string>();
    s.line = j.at("line").get<std::string>();
    s.noise = j.at("noise").get<std::string>();
    s.heating = j.at("heating").get<std::string>();
    s.coverage_pulses = j.value("coverage_pulses", 0.0);
    s.coverage_model = j.value("coverage_model", std::string("coherent_survivor")) ==
                               "randomized_floor"
                           ? pulses::CoverageModel::randomized_floor
                           : pulses::CoverageModel::coherent_survivor;
    s.atoms_per_tooth = j.value("atoms_per_tooth", 40);
    s.horizon_us = j.value("horizon_us", 30.0);
    s.detector_noise_floor = j.value("detector_noise_floor", 1e-9);
    return s;
}

TransportPreset parse_transport(const json& j) {
    TransportPreset t;
    t.memory.eta_ref = j.at("eta_ref").get<double>();
    t.memory.t_ref_s = j.at("t_ref_s").get<double>();
    t.memory.lifetime_s = j.at("lifetime_s").get<double>();
    t.channel.length_km = j.at("length_km").get<double>();
    t.channel.loss_db_per_km = j.at("loss_db_per_km").get<double>();
    t.speed_km_per_h = j.at("speed_km_per_h").get<double>();
    t.quoted_eta_at_one_hour = j.value("quoted_eta_at_one_hour", 5e-5);
    return t;
}

ControlPreset parse_control(const json& j) {
    ControlPreset c;
    c.pulse = parse_pulse(j.at("pulse"));
    c.transfer_scale = j.value("transfer_scale", 1.0);
    return c;
}

template <typename T, typename F>
void parse_map(const json& root, const char* key, std::map<std::string, T>& out, F&& parse) {
    if (!root.contains(key)) return;
    for (const auto& [name, value] : root.at(key).items()) {
        try {
            out.emplace(name, parse(value));
        } catch (const std::exception& e) {
            throw std::runtime_error(std::string(key) + "/" + name + ": " + e.what());
        }
    }
}

}  // namespace

Config load(const std::filesystem::path& root) {
    Config cfg;

    const json tensors = load_json_file(root / "tensors.json");
    cfg.frame = tensors.value("frame", "[D1, D2, b]");
    for (const auto& [name, j] : tensors.at("systems").items()) {
        cfg.systems.emplace(name, parse_system(j, name));
    }
    parse_map(tensors, "fields", cfg.fields, [](const json& j) { return parse_field(j); });

    const json presets = load_json_file(root / "presets.json");
    parse_map(presets, "combs", cfg.combs, [](const json& j) { return parse_comb(j); });
    parse_map(presets, "pulses", cfg.pulse_shapes, [](const json& j) { return parse_pulse(j); });
    parse_map(presets, "controls", cfg.controls, [](const json& j) { return parse_control(j); });
    parse_map(presets, "lines", cfg.lines, [](const json& j) { return parse_line(j); });
    parse_map(presets, "noises", cfg.noises, [](const json& j) { return parse_noise(j); });
    parse_map(presets, "heatings", cfg.heatings, [](const json& j) { return parse_heating(j); });
    parse_map(presets, "pumps", cfg.pumps, [](const json& j) { return parse_pump(j); });
    parse_map(presets, "interference", cfg.interference,
              [](const json& j) { return parse_interference(j); });
    parse_map(presets, "storages", cfg.storages, [](const json& j) { return parse_storage(j); });
    parse_map(presets, "transports", cfg.transports,
              [](const json& j) { return parse_transport(j); });
    return cfg;
}

const spectra::SpinSystem& system_preset(const Config& c, const std::string& name) {
    return Config::named(c.systems, name, "systems");
}

experiment::StorageConfig Config::storage_config(const StoragePreset& preset) const {
    experiment::StorageConfig sc;
    sc.input_pulse = named(pulse_shapes, preset.input, "pulses");
    const ControlPreset& control = named(controls, preset.control, "controls");
    sc.control_transfer_scale = control.transfer_scale;
    sc.coverage_pulses = preset.coverage_pulses;
    sc.coverage_model = preset.coverage_model;
    sc.heating = named(heatings, preset.heating, "heatings");
    sc.atoms_per_tooth = preset.atoms_per_tooth;
    sc.horizon_us = preset.horizon_us;
    sc.detector_noise_floor = preset.detector_noise_floor;
    return sc;
}

std::string dump_resolved(const std::filesystem::path& root) {
    json merged;
    merged["config_root"] = root.string();
    merged["tensors"] = load_json_file(root / "tensors.json");
    merged["presets"] = load_json_file(root / "presets.json");
    merged["constants"] = load_json_file(root / "paper_constants.json");
    return merged.dump(2) + "\n";
}

}  // namespace afcmem::config
