#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cavchar/campaign.hpp"
#include "cavchar/config.hpp"
#include "cavchar/io.hpp"
#include "cavchar/report.hpp"
#include "cavchar/svg.hpp"
#include "cavchar/synth.hpp"

using namespace cavchar;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / "cavchar-tests";
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

campaign::CampaignRecord small_record() {
    campaign::CampaignRecord r;
    r.cavity_id = "B2";
    r.geometry = {0.012, 0.0054, 0.002, 107.98e-4, 8570.0, 5.5e9};
    campaign::TreatmentRecord bcp;
    bcp.step_id = "1";
    bcp.kind = campaign::TreatmentKind::BulkBcp;
    bcp.weight_loss_g = 8.98;
    bcp.mixture_ratio = "1:1:1";
    r.treatments.push_back(bcp);
    campaign::TreatmentRecord anneal;
    anneal.step_id = "2";
    anneal.kind = campaign::TreatmentKind::MidTAnneal;
    anneal.temperature_c = 600.0;
    anneal.duration_h = 3.0;
    r.treatments.push_back(anneal);

    campaign::CooldownRecord cd;
    cd.index = 1;
    cd.base_temperature_k = 0.018;
    cd.treatment_label = "BCP + HT + BCP-f + 600C-3h";
    cd.traces.push_back({"s11-1", "s11", "traces/cd1.s1p"});
    cd.f_r_hz = 5.5e9;
    cd.q_int_base = campaign::FittedValue{3030e6, "s11-1"};
    cd.q_int_1p2k = campaign::FittedValue{3190e6, "s11-1"};
    campaign::FittedTls tls;
    tls.f_tls_loss = 2.10e-10;
    tls.q_res = 7.41e9;
    tls.n_c = 1.9e6;
    tls.beta = 0.33;
    tls.trace_id = "s11-1";
    cd.tls_power = tls;
    r.cooldowns.push_back(cd);
    return r;
}

} // namespace

TEST_CASE("touchstone option-line formats") {
    SUBCASE("GHz RI") {
        const auto path = temp_dir() / "ri.s1p";
        write_file(path, "# GHz S RI R 50\n5.5 0.7 0.0\n");
        const auto trace = io::parse_touchstone(path);
        REQUIRE(trace.frequencies.size() == 1);
        CHECK(trace.frequencies(0) == 5.5e9);
        CHECK(trace.s11(0).real() == 0.7);
        CHECK(trace.s11(0).imag() == 0.0);
    }
    SUBCASE("Hz DB with 90-degree phase") {
        const auto path = temp_dir() / "db.s1p";
        write_file(path, "# Hz S DB R 50\n5.5e9 -3.0103 90\n");
        const auto trace = io::parse_touchstone(path);
        CHECK(std::abs(trace.s11(0).real()) < 1e-12);
        CHECK(trace.s11(0).imag() == doctest::Approx(0.7071).epsilon(1e-4));
    }
    SUBCASE("defaults are GHz MA") {
        const auto path = temp_dir() / "defaults.s1p";
        write_file(path, "1.0 0.5 180\n");
        const auto trace = io::parse_touchstone(path);
        CHECK(trace.frequencies(0) == 1.0e9);
        CHECK(trace.s11(0).real() == doctest::Approx(-0.5).epsilon(1e-12));
    }
    SUBCASE("explicit plus signs parse") {
        const auto path = temp_dir() / "plus.s1p";
        write_file(path, "# Hz S RI R 50\n+5.5e9 +0.7 -0.1\n");
        const auto trace = io::parse_touchstone(path);
        CHECK(trace.frequencies(0) == 5.5e9);
        CHECK(trace.s11(0).real() == 0.7);
    }
}

TEST_CASE("touchstone rejects malformed inputs") {
    const auto two_port = temp_dir() / "two.s2p";
    write_file(two_port, "# GHz S RI R 50\n1.0 0 0 0 0 0 0 0 0\n");
    CHECK_THROWS_AS(io::parse_touchstone(two_port), ParseError);

    const auto nine_cols = temp_dir() / "nine.s1p";
    write_file(nine_cols, "# GHz S RI R 50\n1.0 0 0 0 0 0 0 0 0\n");
    CHECK_THROWS_AS(io::parse_touchstone(nine_cols), ParseError);

    const auto bad_option = temp_dir() / "badopt.s1p";
    write_file(bad_option, "# GHz S XY R 50\n1.0 0 0\n");
    CHECK_THROWS_AS(io::parse_touchstone(bad_option), ParseError);

    const auto non_monotone = temp_dir() / "nonmono.s1p";
    write_file(non_monotone, "# Hz S RI R 50\n2.0 0 0\n1.0 0 0\n");
    CHECK_THROWS_AS(io::parse_touchstone(non_monotone), ParseError);
}

TEST_CASE("touchstone write/parse round trip across formats") {
    resonance::FrequencyTrace trace;
    const int n = 64;
    trace.frequencies = Eigen::ArrayXd::LinSpaced(n, 5.4e9, 5.6e9);
    trace.s11.resize(n);
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < n; ++i) trace.s11(i) = std::complex<double>(u(rng), u(rng));
    trace.temperature_k = 0.012;

    for (auto format : {io::TouchstoneFormat::RI, io::TouchstoneFormat::MA,
                        io::TouchstoneFormat::DB}) {
        const auto path = temp_dir() / "roundtrip.s1p";
        io::write_touchstone(path, trace, format, io::FrequencyUnit::Hz);
        const auto back = io::parse_touchstone(path);
        REQUIRE(back.frequencies.size() == n);
        CHECK(back.temperature_k.has_value());
        for (int i = 0; i < n; ++i) {
            CHECK(back.frequencies(i) == doctest::Approx(trace.frequencies(i)).epsilon(1e-14));
            CHECK(std::abs(back.s11(i) - trace.s11(i)) <= 1e-12 * std::abs(trace.s11(i)));
        }
    }
}

TEST_CASE("csv schema contracts") {
    SUBCASE("qn-points with metadata") {
        const auto path = temp_dir() / "qn.csv";
        write_file(path,
                   "# schema = qn-points\n# f_r_hz = 5.5e9\n# temperature_k = 0.01\n"
                   "n_bar,q_int\n1e2,2.6e9\n1e6,2.9e9\n");
        const auto parsed = io::parse_csv_trace(path);
        CHECK(parsed.schema == io::CsvSchema::QnPoints);
        CHECK(parsed.metadata.at("f_r_hz") == 5.5e9);
        const auto& xy = std::get<models::XYData>(parsed.data);
        REQUIRE(xy.x.size() == 2);
        CHECK(xy.x(1) == 1e6);
        CHECK(xy.y(0) == 2.6e9);
    }
    SUBCASE("non-numeric cells name row and column") {
        const auto path = temp_dir() / "bad.csv";
        write_file(path, "temperature_k,q_int\n0.1,2e9\n0.2,oops\n");
        try {
            io::parse_csv_trace(path);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            const std::string what = e.what();
            CHECK(what.find("row 3") != std::string::npos);
            CHECK(what.find("column 2") != std::string::npos);
            CHECK(what.find("q_int") != std::string::npos);
        }
    }
    SUBCASE("descending time axis is rejected") {
        const auto path = temp_dir() / "desc.csv";
        std::string body = "time_s,amplitude\n";
        for (int i = 0; i < 12; ++i)
            body += io::format_double(1.0 - 0.05 * i) + "," + io::format_double(1.0) + "\n";
        write_file(path, body);
        CHECK_THROWS_AS(io::parse_csv_trace(path), ParseError);
    }
    SUBCASE("unknown headers are rejected") {
        const auto path = temp_dir() / "unknown.csv";
        write_file(path, "foo,bar\n1,2\n");
        CHECK_THROWS_AS(io::parse_csv_trace(path), ParseError);
    }
    SUBCASE("schema expectation mismatch") {
        const auto path = temp_dir() / "qt.csv";
        write_file(path, "temperature_k,q_int\n0.1,2e9\n0.2,3e9\n");
        CHECK_THROWS_AS(io::parse_csv_trace(path, io::CsvSchema::QnPoints), ParseError);
    }
    SUBCASE("sigma column round trip") {
        const auto path = temp_dir() / "sigma.csv";
        models::XYData data;
        data.x = Eigen::ArrayXd::LinSpaced(5, 0.1, 1.0);
        data.y = Eigen::ArrayXd::Constant(5, 2e9);
        data.sigma = Eigen::ArrayXd::Constant(5, 1e7);
        io::write_csv_xy(path, io::CsvSchema::QtPoints, data, {{"f_r_hz", 5.5e9}});
        const auto parsed = io::parse_csv_trace(path, io::CsvSchema::QtPoints);
        const auto& xy = std::get<models::XYData>(parsed.data);
        CHECK(xy.sigma.size() == 5);
        CHECK(xy.sigma(3) == 1e7);
    }
}

TEST_CASE("synthetic generation is deterministic and exact at zero noise") {
    nlohmann::ordered_json spec;
    spec["model"] = "tls_power";
    spec["seed"] = 7;
    spec["noise"] = {{"sigma_rel", 0.01}};
    spec["truth"] = {{"f_tls_loss", 1.82e-10}, {"n_c", 2.0e6}, {"beta", 0.34},
                     {"q_res", 4.77e9}};
    spec["context"] = {{"f_r_hz", 5.5e9}, {"temperature_k", 0.01}};
    spec["axis"] = {{"kind", "log"}, {"min", 1.0}, {"max", 1e8}, {"count", 30}};

    const auto out1 = synth::generate_synthetic(spec, temp_dir() / "synth1");
    const auto out2 = synth::generate_synthetic(spec, temp_dir() / "synth2");
    CHECK(read_file(out1.data_path) == read_file(out2.data_path));
    CHECK(read_file(out1.truth_path) == read_file(out2.truth_path));
    CHECK(!read_file(out1.data_path).empty());

    // Zero noise lands every point exactly on the model curve.
    const loss::TlsPowerParams<double> truth{1.82e-10, 2.0e6, 0.34, 4.77e9};
    const auto clean = synth::tls_power_points(truth, 5.5e9, 0.01, {1.0, 1e8, 30, true}, 0.0, 7);
    for (Eigen::Index i = 0; i < clean.x.size(); ++i) {
        const double model = 1.0 / loss::eval_tls_power(truth, {5.5e9, 0.01, clean.x(i)});
        CHECK(std::abs(clean.y(i) - model) <= 1e-12 * model);
    }

    // Point noise depends only on (seed, index): a denser grid keeps the
    // shared prefix values only if indices match, so equal grids match.
    const auto again = synth::tls_power_points(truth, 5.5e9, 0.01, {1.0, 1e8, 30, true}, 0.01, 7);
    const auto again2 = synth::tls_power_points(truth, 5.5e9, 0.01, {1.0, 1e8, 30, true}, 0.01, 7);
    for (Eigen::Index i = 0; i < again.x.size(); ++i) CHECK(again.y(i) == again2.y(i));
}

TEST_CASE("synth specs with unknown models are rejected") {
    nlohmann::ordered_json spec;
    spec["model"] = "not-a-model";
    spec["axis"] = {{"min", 0.0}, {"max", 1.0}, {"count", 10}};
    CHECK_THROWS_AS(synth::generate_synthetic(spec, temp_dir() / "bad"), ParseError);
    nlohmann::ordered_json no_model;
    CHECK_THROWS_AS(synth::generate_synthetic(no_model, temp_dir() / "bad"), ParseError);
}

TEST_CASE("synthetic s11 dips to the expected on-resonance magnitude") {
    nlohmann::ordered_json spec;
    spec["model"] = "s11";
    spec["seed"] = 3;
    spec["noise"] = {{"snr_db", 46.0}};
    spec["truth"] = {{"f_r_hz", 5.5e9}, {"q_int", 3.0e9}, {"q_ext", 17e9}};
    spec["axis"] = {{"span_linewidths", 40.0}, {"count", 801}};
    const auto out = synth::generate_synthetic(spec, temp_dir() / "synth-s11");
    const auto trace = io::parse_touchstone(out.data_path);
    CHECK(trace.s11.abs().minCoeff() == doctest::Approx(0.7).epsilon(0.03));
}

TEST_CASE("campaign documents persist byte-identically") {
    auto record = small_record();
    campaign::FittedResonance res;
    res.f_r_hz = 5.5e9;
    res.q_int = 3.03e9;
    res.q_ext_mag = 1.7e10;
    res.coupling_phase = 0.04;
    res.trace_id = "s11-1";
    record.cooldowns[0].resonance = res;
    campaign::FittedLifetime lt;
    lt.tau_tot_s = 0.110;
    lt.q_ext = 1.7e10;
    lt.trace_id = "s11-1";
    record.cooldowns[0].lifetime = lt;

    const auto path = temp_dir() / "b2.json";
    campaign::save_campaign(path, record);
    const std::string first = read_file(path);

    const auto loaded = campaign::load_campaign(path);
    campaign::save_campaign(path, loaded);
    CHECK(read_file(path) == first);

    CHECK(loaded.cavity_id == "B2");
    REQUIRE(loaded.cooldowns.size() == 1);
    CHECK(loaded.cooldowns[0].q_int_base->value == 3030e6);
    CHECK(loaded.treatments[1].temperature_c == 600.0);
    CHECK(loaded.cooldowns[0].resonance->q_ext_mag == 1.7e10);
    CHECK(loaded.cooldowns[0].tls_power->n_c == 1.9e6);
    CHECK(loaded.cooldowns[0].lifetime->tau_tot_s == 0.110);
}

TEST_CASE("campaign validation catches inconsistent records") {
    auto record = small_record();
    record.cooldowns.push_back(record.cooldowns[0]);  // duplicate index 1
    CHECK_THROWS_AS(record.validate(), DomainError);

    record = small_record();
    record.cooldowns[0].tls_power->trace_id = "missing";
    CHECK_THROWS_AS(record.validate(), DomainError);

    record = small_record();
    record.geometry.r_in_m = record.geometry.r_out_m;  // r_in must be smaller
    CHECK_THROWS_AS(record.validate(), DomainError);

    auto anneal_missing = small_record();
    anneal_missing.treatments[1].temperature_c.reset();
    CHECK_THROWS_AS(anneal_missing.validate(), DomainError);
}

TEST_CASE("removal depth reproduces the weight-loss table") {
    // (weight loss g, area cm^2) -> expected um, frozen from exact arithmetic.
    const struct { double dw, area, expect_um, published_um; } cases[] = {
        {9.54, 110.591, 100.65788, 101.0},
        {9.46, 110.591, 99.813786, 100.0},
        {8.90, 107.98, 96.175812, 96.0},
        {8.98, 107.98, 97.040314, 97.0},
        {0.41, 110.591, 4.3259675, 4.3},
        {0.39, 107.98, 4.2144457, 4.2},
    };
    for (const auto& c : cases) {
        const double um = campaign::removal_depth_m(c.dw * 1e-3, c.area * 1e-4, 8570.0) * 1e6;
        CHECK(um == doctest::Approx(c.expect_um).epsilon(1e-6));
        CHECK(std::abs(um - c.published_um) < 0.5);
    }
    CHECK_THROWS_AS(campaign::removal_depth_m(-1.0, 1.0, 8570.0), DomainError);
    CHECK_THROWS_AS(campaign::removal_depth_m(1.0, 0.0, 8570.0), DomainError);
}

TEST_CASE("report recomputes derived columns from primitives") {
    const auto record = small_record();
    const auto report = report::build_report(record, {66.2});
    REQUIRE(report.rows.size() == 1);
    const auto& row = report.rows[0];
    CHECK(row.q_int_base * row.r_s_base_ohm == doctest::Approx(66.2).epsilon(1e-15));
    CHECK(row.tau_int_s ==
          doctest::Approx(row.q_int_base / (2.0 * EIGEN_PI * row.f_r_hz)).epsilon(1e-15));
    CHECK(*row.q_int_1p2k * *row.r_s_1p2k_ohm == doctest::Approx(66.2).epsilon(1e-15));
    CHECK(row.f_tls_loss == 2.10e-10);

    const std::string text = report::render_text(report);
    CHECK(text.find("B2") != std::string::npos);
    const std::string csv = report::render_csv(report);
    CHECK(csv.find("q_int_base") != std::string::npos);
    CHECK(report::render_json(report).at("rows").size() == 1);

    // Cooldowns without a TLS fit emit rows with those columns absent.
    campaign::CampaignRecord no_tls = record;
    no_tls.cooldowns[0].tls_power.reset();
    const auto partial = report::build_report(no_tls, {66.2});
    CHECK(!partial.rows[0].f_tls_loss.has_value());
    CHECK(report::render_text(partial).find("-") != std::string::npos);
    const std::string partial_csv = report::render_csv(partial);
    CHECK(partial_csv.find(",,") != std::string::npos);

    campaign::CampaignRecord empty = record;
    empty.cooldowns[0].q_int_base.reset();
    CHECK_THROWS_AS(report::build_report(empty, {66.2}), DomainError);
}

TEST_CASE("config defaults and overrides") {
    const auto defaults = config::Config::defaults();
    CHECK(defaults.g_factor_ohm == 66.2);
    CHECK(defaults.niobium_density_kg_m3 == 8570.0);
    CHECK(defaults.xps.position_5_2_ev.at(xps::NbSpecies::NbMetal) == 202.2);

    const auto path = temp_dir() / "config.json";
    write_file(path, R"({"g_factor_ohm": 65.9, "xps_references": {"NbO": 203.9}})");
    const auto cfg = config::Config::from_file(path);
    CHECK(cfg.g_factor_ohm == 65.9);
    CHECK(cfg.xps.position_5_2_ev.at(xps::NbSpecies::NbO) == 203.9);
    CHECK(cfg.xps.position_5_2_ev.at(xps::NbSpecies::Nb2O5) == 207.5);

    setenv("CAVCHAR_CONFIG", path.string().c_str(), 1);
    CHECK(config::Config::load().g_factor_ohm == 65.9);
    unsetenv("CAVCHAR_CONFIG");
    CHECK(config::Config::load().g_factor_ohm == 66.2);
}

TEST_CASE("svg rendering is deterministic and well-formed") {
    svg::PlotSpec spec;
    spec.title = "Q vs photon number";
    spec.x_label = "n_bar";
    spec.y_label = "Q_int";
    spec.log_x = true;
    spec.log_y = true;
    svg::Series s;
    s.x = Eigen::ArrayXd::LinSpaced(20, 0, 19).unaryExpr([](double v) { return std::pow(10.0, v / 3.0); });
    s.y = s.x.unaryExpr([](double v) { return 2.5e9 * (1.0 + 0.1 * std::log10(v + 1.0)); });
    s.scatter = true;
    s.label = "data";
    spec.series.push_back(s);

    const std::string once = svg::render_svg(spec);
    CHECK(once.rfind("<svg", 0) == 0);
    CHECK(once.find("circle") != std::string::npos);
    CHECK(once.find("1e") != std::string::npos);  // log ticks
    CHECK(svg::render_svg(spec) == once);

    svg::PlotSpec empty;
    CHECK_THROWS_AS(svg::render_svg(empty), DomainError);
}
