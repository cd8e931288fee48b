#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cavchar/campaign.hpp"
#include "cavchar/loss_models.hpp"

namespace cavchar::report {

struct ReportRow {
    std::string cavity_id;
    std::string treatment;
    std::optional<int> cooldown;
    double f_r_hz = 0.0;
    double q_int_base = 0.0;
    double r_s_base_ohm = 0.0;   // recomputed, G / Q
    double tau_int_s = 0.0;      // recomputed, Q / (2 pi f_r)
    std::optional<double> q_int_1p2k;
    std::optional<double> r_s_1p2k_ohm;
    std::optional<double> f_tls_loss;
    std::optional<double> q_res;
};

struct Report {
    double g_ohms = 0.0;
    std::vector<ReportRow> rows;
};

// One row per cooldown with a fitted base Q; every derived column is
// recomputed from primitives through the loss-model conversions.
Report build_report(const campaign::CampaignRecord& record, const loss::GeometricFactor& g);

std::string render_text(const Report& report);
std::string render_csv(const Report& report);
nlohmann::ordered_json render_json(const Report& report);

} // namespace cavchar::report
