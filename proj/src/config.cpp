#include "cavchar/config.hpp"

#include <cstdlib>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cavchar/errors.hpp"

namespace cavchar::config {

Config Config::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config '" + path.string() + "'");
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }

    Config cfg;
    cfg.g_factor_ohm = j.value("g_factor_ohm", cfg.g_factor_ohm);
    cfg.niobium_density_kg_m3 = j.value("niobium_density_kg_m3", cfg.niobium_density_kg_m3);
    cfg.photon_systematic_factor =
        j.value("photon_systematic_factor", cfg.photon_systematic_factor);
    if (j.contains("xps_references")) {
        for (const auto& [name, value] : j.at("xps_references").items())
            cfg.xps.position_5_2_ev[xps::species_from_string(name)] = value.get<double>();
    }
    cfg.xps.position_halfwindow_ev =
        j.value("xps_position_halfwindow_ev", cfg.xps.position_halfwindow_ev);
    cfg.xps.width_min_ev = j.value("xps_width_min_ev", cfg.xps.width_min_ev);
    cfg.xps.width_max_ev = j.value("xps_width_max_ev", cfg.xps.width_max_ev);

    require_domain(cfg.g_factor_ohm > 0 && cfg.niobium_density_kg_m3 > 0,
                   "config: G and density must be > 0");
    return cfg;
}

Config Config::load() {
    if (const char* path = std::getenv("CAVCHAR_CONFIG"); path != nullptr && *path != '\0')
        return from_file(path);
    return defaults();
}

} // namespace cavchar::config
