#pragma once

#include <filesystem>

#include "cavchar/xps.hpp"

namespace cavchar::config {

// Toolkit defaults, overridable through the CAVCHAR_CONFIG environment
// variable (path to a JSON document; partial overrides allowed).
struct Config {
    double g_factor_ohm = 66.2;           // Q * R_s reference constant
    double niobium_density_kg_m3 = 8570.0;
    double photon_systematic_factor = 2.0;  // declared systematic on absolute n_bar
    xps::XpsReferences xps;

    static Config defaults() { return {}; }
    static Config from_file(const std::filesystem::path& path);
    // defaults() merged with CAVCHAR_CONFIG when the variable is set.
    static Config load();
};

} // namespace cavchar::config
