// config.hpp — configuration loading: spin-Hamiltonian tensor sets, named
// presets for every pipeline stage, and the reference-constant registry.
#pragma once

#include "afcmem/comb.hpp"
#include "afcmem/dd.hpp"
#include "afcmem/experiment.hpp"
#include "afcmem/pulses.hpp"
#include "afcmem/spectra.hpp"

#include "json.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace afcmem::config {

// Config root resolution: $AFCMEM_CONFIG_ROOT when set, else ./config.
std::filesystem::path config_root();

struct ControlPreset {
    pulses::PulseShape pulse;
    double transfer_scale = 1.0;  // polarization-geometry loss factor
};

struct StoragePreset {
    std::string comb;
    std::string control;
    std::string input;
    std::string line;
    std::string noise;
    std::string heating;
    double coverage_pulses = 0.0;
    pulses::CoverageModel coverage_model = pulses::CoverageModel::coherent_survivor;
    int atoms_per_tooth = 40;
    double horizon_us = 30.0;
    double detector_noise_floor = 1e-9;
};

struct TransportPreset {
    experiment::MemorySpec memory;
    experiment::ChannelSpec channel;
    double speed_km_per_h = 300.0;
    double quoted_eta_at_one_hour = 5e-5;
};

struct Config {
    std::string frame;  // tensor frame annotation, e.g. "[D1, D2, b]"
    std::map<std::string, spectra::SpinSystem> systems;
    std::map<std::string, spectra::MagneticField> fields;
    std::map<std::string, comb::CombSpec> combs;
    std::map<std::string, pulses::PulseShape> pulse_shapes;
    std::map<std::string, ControlPreset> controls;
    std::map<std::string, pulses::InhomogeneousLine> lines;
    std::map<std::string, dd::NoiseModel> noises;
    std::map<std::string, experiment::HeatingPreset> heatings;
    std::map<std::string, experiment::PumpPreset> pumps;
    std::map<std::string, experiment::InterferenceConfig> interference;
    std::map<std::string, StoragePreset> storages;
    std::map<std::string, TransportPreset> transports;

    // Throws std::out_of_range naming the missing preset and category.
    template <typename T>
    static const T& named(const std::map<std::string, T>& m, const std::string& name,
                          const char* category);

    experiment::StorageConfig storage_config(const StoragePreset& preset) const;
};

const spectra::SpinSystem& system_preset(const Config& c, const std::string& name);

Config load(const std::filesystem::path& root = config_root());

nlohmann::json load_json_file(const std::filesystem::path& path);

// Serialized resolved configuration, embedded in every scenario result.
std::string dump_resolved(const std::filesystem::path& root = config_root());

template <typename T>
const T& Config::named(const std::map<std::string, T>& m, const std::string& name,
                       const char* category) {
    const auto it = m.find(name);
    if (it == m.end()) {
        throw std::out_of_range(std::string("preset not found: ") + category + "/" + name);
    }
    return it->second;
}

}  // namespace afcmem::config
