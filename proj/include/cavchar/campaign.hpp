#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cavchar/errors.hpp"

// Treatment/cooldown bookkeeping and campaign persistence.  Documents are
// versioned JSON with stable key order and explicit units in key names;
// derived quantities (R_s, tau) are never stored, always recomputed.
namespace cavchar::campaign {

struct CavityGeometry {
    double stub_height_m = 0.0;
    double r_out_m = 0.0;
    double r_in_m = 0.0;
    double surface_area_m2 = 0.0;
    double density_kg_m3 = 8570.0;
    double nominal_f_r_hz = 0.0;

    void validate() const;
};

enum class TreatmentKind { BulkBcp, HighTBake, BcpFlush, WBcpFlush, MidTAnneal, AirExposure, None };

TreatmentKind treatment_kind_from_string(const std::string& name);
std::string to_string(TreatmentKind kind);

struct TreatmentRecord {
    std::string step_id;
    TreatmentKind kind = TreatmentKind::None;
    std::optional<double> temperature_c;
    std::optional<double> duration_h;
    std::optional<double> removal_um;
    std::optional<double> weight_loss_g;
    std::string mixture_ratio;  // e.g. "1:1:1"
    std::string timestamp;      // ISO date, free text
    std::string note;

    void validate() const;  // anneals/bakes require temperature and duration
};

struct TraceRef {
    std::string id;
    std::string kind;  // s11 | ringdown | qn-points | qt-points | ft-points | xps
    std::string path;
};

// Fitted primitives, each tied to the trace it came from.  Derived columns
// (R_s, tau) are never stored here.
struct FittedValue {
    double value = 0.0;
    std::string trace_id;
};

struct FittedResonance {
    double f_r_hz = 0.0;
    double q_int = 0.0;
    double q_ext_mag = 0.0;
    double coupling_phase = 0.0;
    std::string trace_id;
};

struct FittedTls {
    double f_tls_loss = 0.0;
    double q_res = 0.0;
    std::optional<double> n_c;
    std::optional<double> beta;
    std::optional<double> f_tls_loss_sigma;
    std::optional<double> q_res_sigma;
    std::string trace_id;
};

struct FittedLifetime {
    double tau_tot_s = 0.0;
    double q_ext = 0.0;
    std::string trace_id;
};

struct CooldownRecord {
    int index = 0;
    double base_temperature_k = 0.0;
    std::string treatment_label;
    std::vector<TraceRef> traces;
    std::optional<double> f_r_hz;
    std::optional<FittedValue> q_int_base;
    std::optional<FittedValue> q_int_1p2k;
    std::optional<FittedResonance> resonance;
    std::optional<FittedTls> tls_power;
    std::optional<FittedLifetime> lifetime;
};

struct CampaignRecord {
    int schema_version = 1;
    std::string cavity_id;
    CavityGeometry geometry;
    std::vector<TreatmentRecord> treatments;
    std::vector<CooldownRecord> cooldowns;

    // Cooldown indices strictly increasing; every fitted value references a
    // trace declared in its cooldown.
    void validate() const;
};

CampaignRecord load_campaign(const std::filesystem::path& path);
void save_campaign(const std::filesystem::path& path, const CampaignRecord& record);
std::string campaign_to_string(const CampaignRecord& record);

// Uniform-etch removal depth from weight loss: dt = dw / (rho * S).
double removal_depth_m(double weight_loss_kg, double surface_area_m2, double density_kg_m3);
double removal_depth_m(double weight_loss_kg, const CavityGeometry& geometry);

} // namespace cavchar::campaign
