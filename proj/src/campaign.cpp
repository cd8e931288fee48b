#include "cavchar/campaign.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

namespace cavchar::campaign {

namespace {

using ordered_json = nlohmann::ordered_json;

void put_optional(ordered_json& j, const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
}

std::optional<double> opt_num(const ordered_json& j, const char* key) {
    if (!j.contains(key)) return std::nullopt;
    return j.at(key).get<double>();
}

} // namespace

void CavityGeometry::validate() const {
    require_domain(stub_height_m > 0 && r_out_m > 0 && r_in_m > 0 && surface_area_m2 > 0 &&
                       density_kg_m3 > 0 && nominal_f_r_hz > 0,
                   "CavityGeometry: all fields must be > 0");
    require_domain(r_in_m < r_out_m, "CavityGeometry: r_in must be < r_out");
}

TreatmentKind treatment_kind_from_string(const std::string& name) {
    if (name == "bulk-BCP") return TreatmentKind::BulkBcp;
    if (name == "high-T-bake") return TreatmentKind::HighTBake;
    if (name == "BCP-flush") return TreatmentKind::BcpFlush;
    if (name == "wBCP-flush") return TreatmentKind::WBcpFlush;
    if (name == "mid-T-anneal") return TreatmentKind::MidTAnneal;
    if (name == "air-exposure") return TreatmentKind::AirExposure;
    if (name == "none") return TreatmentKind::None;
    throw ParseError("unknown treatment kind '" + name + "'");
}

std::string to_string(TreatmentKind kind) {
    switch (kind) {
        case TreatmentKind::BulkBcp: return "bulk-BCP";
        case TreatmentKind::HighTBake: return "high-T-bake";
        case TreatmentKind::BcpFlush: return "BCP-flush";
        case TreatmentKind::WBcpFlush: return "wBCP-flush";
        case TreatmentKind::MidTAnneal: return "mid-T-anneal";
        case TreatmentKind::AirExposure: return "air-exposure";
        case TreatmentKind::None: return "none";
    }
    return "?";
}

void TreatmentRecord::validate() const {
    if (kind == TreatmentKind::HighTBake || kind == TreatmentKind::MidTAnneal) {
        require_domain(temperature_c.has_value() && duration_h.has_value(),
                       "TreatmentRecord: " + to_string(kind) +
                           " requires temperature_c and duration_h");
    }
    if (removal_um) require_domain(*removal_um >= 0, "TreatmentRecord: removal must be >= 0");
    if (weight_loss_g)
        require_domain(*weight_loss_g >= 0, "TreatmentRecord: weight loss must be >= 0");
}

void CampaignRecord::validate() const {
    require_domain(!cavity_id.empty(), "CampaignRecord: cavity_id is empty");
    geometry.validate();
    for (const auto& t : treatments) t.validate();

    int last_index = std::numeric_limits<int>::min();
    for (const auto& cd : cooldowns) {
        require_domain(cd.index > last_index,
                       "CampaignRecord: cooldown indices must be strictly increasing");
        last_index = cd.index;

        std::set<std::string> ids;
        for (const auto& tr : cd.traces) {
            require_domain(!tr.id.empty(), "CampaignRecord: trace with empty id");
            require_domain(ids.insert(tr.id).second, "CampaignRecord: duplicate trace id " + tr.id);
        }
        const auto check_ref = [&](const std::string& trace_id, const char* what) {
            require_domain(ids.count(trace_id) == 1,
                           std::string("CampaignRecord: ") + what + " references unknown trace '" +
                               trace_id + "' in cooldown " + std::to_string(cd.index));
        };
        if (cd.q_int_base) check_ref(cd.q_int_base->trace_id, "q_int_base");
        if (cd.q_int_1p2k) check_ref(cd.q_int_1p2k->trace_id, "q_int_1p2k");
        if (cd.resonance) check_ref(cd.resonance->trace_id, "resonance fit");
        if (cd.tls_power) check_ref(cd.tls_power->trace_id, "tls_power fit");
        if (cd.lifetime) check_ref(cd.lifetime->trace_id, "lifetime fit");
    }
}

namespace {

ordered_json to_json(const CampaignRecord& r) {
    ordered_json j;
    j["schema_version"] = r.schema_version;
    j["cavity_id"] = r.cavity_id;
    {
        ordered_json g;
        g["stub_height_m"] = r.geometry.stub_height_m;
        g["r_out_m"] = r.geometry.r_out_m;
        g["r_in_m"] = r.geometry.r_in_m;
        g["surface_area_m2"] = r.geometry.surface_area_m2;
        g["density_kg_m3"] = r.geometry.density_kg_m3;
        g["nominal_f_r_hz"] = r.geometry.nominal_f_r_hz;
        j["geometry"] = g;
    }
    j["treatments"] = ordered_json::array();
    for (const auto& t : r.treatments) {
        ordered_json tj;
        tj["step_id"] = t.step_id;
        tj["kind"] = to_string(t.kind);
        put_optional(tj, "temperature_c", t.temperature_c);
        put_optional(tj, "duration_h", t.duration_h);
        put_optional(tj, "removal_um", t.removal_um);
        put_optional(tj, "weight_loss_g", t.weight_loss_g);
        if (!t.mixture_ratio.empty()) tj["mixture_ratio"] = t.mixture_ratio;
        if (!t.timestamp.empty()) tj["timestamp"] = t.timestamp;
        if (!t.note.empty()) tj["note"] = t.note;
        j["treatments"].push_back(tj);
    }
    j["cooldowns"] = ordered_json::array();
    for (const auto& cd : r.cooldowns) {
        ordered_json cj;
        cj["index"] = cd.index;
        cj["base_temperature_k"] = cd.base_temperature_k;
        cj["treatment_label"] = cd.treatment_label;
        cj["traces"] = ordered_json::array();
        for (const auto& tr : cd.traces) {
            ordered_json trj;
            trj["id"] = tr.id;
            trj["kind"] = tr.kind;
            trj["path"] = tr.path;
            cj["traces"].push_back(trj);
        }
        put_optional(cj, "f_r_hz", cd.f_r_hz);
        if (cd.q_int_base) {
            cj["q_int_base"] = {{"value", cd.q_int_base->value},
                                {"trace_id", cd.q_int_base->trace_id}};
        }
        if (cd.q_int_1p2k) {
            cj["q_int_1p2k"] = {{"value", cd.q_int_1p2k->value},
                                {"trace_id", cd.q_int_1p2k->trace_id}};
        }
        if (cd.resonance) {
            cj["resonance"] = {{"f_r_hz", cd.resonance->f_r_hz},
                               {"q_int", cd.resonance->q_int},
                               {"q_ext_mag", cd.resonance->q_ext_mag},
                               {"coupling_phase_rad", cd.resonance->coupling_phase},
                               {"trace_id", cd.resonance->trace_id}};
        }
        if (cd.tls_power) {
            ordered_json tls;
            tls["f_tls_loss"] = cd.tls_power->f_tls_loss;
            tls["q_res"] = cd.tls_power->q_res;
            put_optional(tls, "n_c", cd.tls_power->n_c);
            put_optional(tls, "beta", cd.tls_power->beta);
            put_optional(tls, "f_tls_loss_sigma", cd.tls_power->f_tls_loss_sigma);
            put_optional(tls, "q_res_sigma", cd.tls_power->q_res_sigma);
            tls["trace_id"] = cd.tls_power->trace_id;
            cj["tls_power"] = tls;
        }
        if (cd.lifetime) {
            cj["lifetime"] = {{"tau_tot_s", cd.lifetime->tau_tot_s},
                              {"q_ext", cd.lifetime->q_ext},
                              {"trace_id", cd.lifetime->trace_id}};
        }
        j["cooldowns"].push_back(cj);
    }
    return j;
}

CampaignRecord from_json(const ordered_json& j) {
    CampaignRecord r;
    r.schema_version = j.value("schema_version", 1);
    if (r.schema_version != 1)
        throw ParseError("campaign document: unsupported schema_version " +
                         std::to_string(r.schema_version));
    r.cavity_id = j.value("cavity_id", std::string{});
    const auto& g = j.at("geometry");
    r.geometry.stub_height_m = g.at("stub_height_m").get<double>();
    r.geometry.r_out_m = g.at("r_out_m").get<double>();
    r.geometry.r_in_m = g.at("r_in_m").get<double>();
    r.geometry.surface_area_m2 = g.at("surface_area_m2").get<double>();
    r.geometry.density_kg_m3 = g.at("density_kg_m3").get<double>();
    r.geometry.nominal_f_r_hz = g.at("nominal_f_r_hz").get<double>();

    for (const auto& tj : j.value("treatments", ordered_json::array())) {
        TreatmentRecord t;
        t.step_id = tj.value("step_id", std::string{});
        t.kind = treatment_kind_from_string(tj.at("kind").get<std::string>());
        t.temperature_c = opt_num(tj, "temperature_c");
        t.duration_h = opt_num(tj, "duration_h");
        t.removal_um = opt_num(tj, "removal_um");
        t.weight_loss_g = opt_num(tj, "weight_loss_g");
        t.mixture_ratio = tj.value("mixture_ratio", std::string{});
        t.timestamp = tj.value("timestamp", std::string{});
        t.note = tj.value("note", std::string{});
        r.treatments.push_back(std::move(t));
    }
    for (const auto& cj : j.value("cooldowns", ordered_json::array())) {
        CooldownRecord cd;
        cd.index = cj.at("index").get<int>();
        cd.base_temperature_k = cj.value("base_temperature_k", 0.0);
        cd.treatment_label = cj.value("treatment_label", std::string{});
        for (const auto& trj : cj.value("traces", ordered_json::array()))
            cd.traces.push_back({trj.at("id").get<std::string>(),
                                 trj.value("kind", std::string{}),
                                 trj.value("path", std::string{})});
        cd.f_r_hz = opt_num(cj, "f_r_hz");
        if (cj.contains("q_int_base"))
            cd.q_int_base = FittedValue{cj.at("q_int_base").at("value").get<double>(),
                                        cj.at("q_int_base").at("trace_id").get<std::string>()};
        if (cj.contains("q_int_1p2k"))
            cd.q_int_1p2k = FittedValue{cj.at("q_int_1p2k").at("value").get<double>(),
                                        cj.at("q_int_1p2k").at("trace_id").get<std::string>()};
        if (cj.contains("resonance")) {
            const auto& rj = cj.at("resonance");
            cd.resonance = FittedResonance{rj.at("f_r_hz").get<double>(),
                                           rj.at("q_int").get<double>(),
                                           rj.at("q_ext_mag").get<double>(),
                                           rj.value("coupling_phase_rad", 0.0),
                                           rj.at("trace_id").get<std::string>()};
        }
        if (cj.contains("tls_power")) {
            const auto& tj = cj.at("tls_power");
            FittedTls tls;
            tls.f_tls_loss = tj.at("f_tls_loss").get<double>();
            tls.q_res = tj.at("q_res").get<double>();
            tls.n_c = opt_num(tj, "n_c");
            tls.beta = opt_num(tj, "beta");
            tls.f_tls_loss_sigma = opt_num(tj, "f_tls_loss_sigma");
            tls.q_res_sigma = opt_num(tj, "q_res_sigma");
            tls.trace_id = tj.at("trace_id").get<std::string>();
            cd.tls_power = tls;
        }
        if (cj.contains("lifetime"))
            cd.lifetime = FittedLifetime{cj.at("lifetime").at("tau_tot_s").get<double>(),
                                         cj.at("lifetime").at("q_ext").get<double>(),
                                         cj.at("lifetime").at("trace_id").get<std::string>()};
        r.cooldowns.push_back(std::move(cd));
    }
    return r;
}

} // namespace

std::string campaign_to_string(const CampaignRecord& record) {
    record.validate();
    return to_json(record).dump(2) + "\n";
}

CampaignRecord load_campaign(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path.string() + "'");
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    CampaignRecord r;
    try {
        r = from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    try {
        r.validate();
    } catch (const DomainError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return r;
}

void save_campaign(const std::filesystem::path& path, const CampaignRecord& record) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write '" + path.string() + "'");
    out << campaign_to_string(record);
}

double removal_depth_m(double weight_loss_kg, double surface_area_m2, double density_kg_m3) {
    require_domain(weight_loss_kg > 0, "removal_depth: weight loss must be > 0");
    require_domain(surface_area_m2 > 0 && density_kg_m3 > 0,
                   "removal_depth: area and density must be > 0");
    return weight_loss_kg / (density_kg_m3 * surface_area_m2);
}

double removal_depth_m(double weight_loss_kg, const CavityGeometry& geometry) {
    geometry.validate();
    return removal_depth_m(weight_loss_kg, geometry.surface_area_m2, geometry.density_kg_m3);
}

} // namespace cavchar::campaign
