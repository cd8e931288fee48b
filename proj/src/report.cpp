#include "cavchar/report.hpp"

#include <cstdio>
#include <sstream>

#include "cavchar/io.hpp"

namespace cavchar::report {

Report build_report(const campaign::CampaignRecord& record, const loss::GeometricFactor& g) {
    record.validate();
    g.validate();

    Report report;
    report.g_ohms = g.ohms;
    for (const auto& cd : record.cooldowns) {
        if (!cd.q_int_base) continue;
        ReportRow row;
        row.cavity_id = record.cavity_id;
        row.treatment = cd.treatment_label;
        row.cooldown = cd.index;
        row.f_r_hz = cd.f_r_hz.value_or(record.geometry.nominal_f_r_hz);
        row.q_int_base = cd.q_int_base->value;
        row.r_s_base_ohm = loss::q_to_surface_resistance(row.q_int_base, g);
        row.tau_int_s = loss::q_to_tau(row.q_int_base, row.f_r_hz);
        if (cd.q_int_1p2k) {
            row.q_int_1p2k = cd.q_int_1p2k->value;
            row.r_s_1p2k_ohm = loss::q_to_surface_resistance(cd.q_int_1p2k->value, g);
        }
        if (cd.tls_power) {
            row.f_tls_loss = cd.tls_power->f_tls_loss;
            row.q_res = cd.tls_power->q_res;
        }
        report.rows.push_back(std::move(row));
    }
    require_domain(!report.rows.empty(),
                   "build_report: record has no cooldown with a fitted base Q");
    return report;
}

namespace {

std::string fixed(double v, int prec) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

std::string sci(double v, int prec) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*e", prec, v);
    return buf;
}

} // namespace

std::string render_text(const Report& report) {
    std::ostringstream out;
    out << "G = " << fixed(report.g_ohms, 2) << " ohm (Q * R_s), derived columns recomputed\n";
    out << "cavity  cooldown  Q_int(base)  R_s[nOhm]  tau_int[ms]  Q_int(1.2K)  R_s(1.2K)[nOhm]"
           "  F*delta0_TLS  Q_res        treatment\n";
    for (const auto& row : report.rows) {
        out << row.cavity_id;
        for (std::size_t i = row.cavity_id.size(); i < 8; ++i) out << ' ';
        const std::string cd = row.cooldown ? std::to_string(*row.cooldown) : "-";
        out << cd;
        for (std::size_t i = cd.size(); i < 10; ++i) out << ' ';
        const auto col = [&out](const std::string& s, std::size_t width) {
            out << s;
            for (std::size_t i = s.size(); i < width; ++i) out << ' ';
        };
        col(sci(row.q_int_base, 3), 13);
        col(fixed(row.r_s_base_ohm * 1e9, 1), 11);
        col(fixed(row.tau_int_s * 1e3, 2), 13);
        col(row.q_int_1p2k ? sci(*row.q_int_1p2k, 3) : "-", 13);
        col(row.r_s_1p2k_ohm ? fixed(*row.r_s_1p2k_ohm * 1e9, 1) : "-", 17);
        col(row.f_tls_loss ? sci(*row.f_tls_loss, 3) : "-", 14);
        col(row.q_res ? sci(*row.q_res, 3) : "-", 13);
        out << row.treatment << '\n';
    }
    return out.str();
}

std::string render_csv(const Report& report) {
    std::ostringstream out;
    out << "cavity_id,cooldown,treatment,f_r_hz,q_int_base,r_s_base_ohm,tau_int_s,"
           "q_int_1p2k,r_s_1p2k_ohm,f_tls_loss,q_res\n";
    for (const auto& row : report.rows) {
        out << row.cavity_id << ',' << (row.cooldown ? std::to_string(*row.cooldown) : "") << ','
            << row.treatment << ',' << io::format_double(row.f_r_hz) << ','
            << io::format_double(row.q_int_base) << ',' << io::format_double(row.r_s_base_ohm)
            << ',' << io::format_double(row.tau_int_s) << ','
            << (row.q_int_1p2k ? io::format_double(*row.q_int_1p2k) : "") << ','
            << (row.r_s_1p2k_ohm ? io::format_double(*row.r_s_1p2k_ohm) : "") << ','
            << (row.f_tls_loss ? io::format_double(*row.f_tls_loss) : "") << ','
            << (row.q_res ? io::format_double(*row.q_res) : "") << '\n';
    }
    return out.str();
}

nlohmann::ordered_json render_json(const Report& report) {
    nlohmann::ordered_json j;
    j["g_ohms"] = report.g_ohms;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& row : report.rows) {
        nlohmann::ordered_json rj;
        rj["cavity_id"] = row.cavity_id;
        if (row.cooldown) rj["cooldown"] = *row.cooldown;
        rj["treatment"] = row.treatment;
        rj["f_r_hz"] = row.f_r_hz;
        rj["q_int_base"] = row.q_int_base;
        rj["r_s_base_ohm"] = row.r_s_base_ohm;
        rj["tau_int_s"] = row.tau_int_s;
        if (row.q_int_1p2k) rj["q_int_1p2k"] = *row.q_int_1p2k;
        if (row.r_s_1p2k_ohm) rj["r_s_1p2k_ohm"] = *row.r_s_1p2k_ohm;
        if (row.f_tls_loss) rj["f_tls_loss"] = *row.f_tls_loss;
        if (row.q_res) rj["q_res"] = *row.q_res;
        j["rows"].push_back(rj);
    }
    return j;
}

} // namespace cavchar::report
