#include "cavchar/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace cavchar::io {

namespace {

constexpr double kPi = EIGEN_PI;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

double parse_number(const std::string& token, const std::string& where) {
    std::string t = trim(token);
    if (t.size() > 1 && t[0] == '+') t.erase(0, 1);  // from_chars rejects a leading '+'
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc{} || ptr != t.data() + t.size())
        throw ParseError(where + ": not a number '" + token + "'");
    return value;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

// "key = value" metadata payload, or nullopt.
std::optional<std::pair<std::string, double>> parse_metadata(const std::string& body) {
    const auto eq = body.find('=');
    if (eq == std::string::npos) return std::nullopt;
    const std::string key = trim(body.substr(0, eq));
    const std::string val = trim(body.substr(eq + 1));
    if (key.empty() || val.empty()) return std::nullopt;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(val.data(), val.data() + val.size(), value);
    if (ec != std::errc{} || ptr != val.data() + val.size()) return std::nullopt;
    return std::make_pair(key, value);
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path.string() + "'");
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);  // keep LF line endings everywhere
    if (!out) throw ParseError("cannot write '" + path.string() + "'");
    return out;
}

} // namespace

std::string format_double(double value) {
    char buf[40];
    // Shortest representation that parses back exactly.
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, value);
        double back = 0.0;
        std::from_chars(buf, buf + std::strlen(buf), back);
        if (back == value) return buf;
    }
    return buf;
}

resonance::FrequencyTrace parse_touchstone(const std::filesystem::path& path) {
    const std::string ext = lower(path.extension().string());
    if (ext.size() == 4 && ext[0] == '.' && ext[1] == 's' && ext[3] == 'p' && ext[2] != '1')
        throw ParseError(path.string() + ": wrong port count (only single-port .s1p supported)");

    std::ifstream in = open_input(path);

    double unit_scale = 1e9;  // GHz default
    TouchstoneFormat format = TouchstoneFormat::MA;
    bool have_option = false;
    std::map<std::string, double> metadata;

    std::vector<double> freq;
    std::vector<std::complex<double>> s11;

    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string where = path.string() + ":" + std::to_string(lineno);
        std::string line = raw;
        if (const auto bang = line.find('!'); bang != std::string::npos) {
            if (const auto kv = parse_metadata(line.substr(bang + 1)))
                metadata[kv->first] = kv->second;
            line = line.substr(0, bang);
        }
        line = trim(line);
        if (line.empty()) continue;

        if (line[0] == '#') {
            if (have_option) throw ParseError(where + ": multiple option lines");
            have_option = true;
            bool expect_resistance = false;
            for (const std::string& tok_raw : split_ws(line.substr(1))) {
                const std::string tok = lower(tok_raw);
                if (expect_resistance) {
                    parse_number(tok, where);  // value is recorded but unused
                    expect_resistance = false;
                } else if (tok == "hz") unit_scale = 1.0;
                else if (tok == "khz") unit_scale = 1e3;
                else if (tok == "mhz") unit_scale = 1e6;
                else if (tok == "ghz") unit_scale = 1e9;
                else if (tok == "s") { /* S-parameters */ }
                else if (tok == "y" || tok == "z" || tok == "g" || tok == "h")
                    throw ParseError(where + ": only S-parameter files are supported");
                else if (tok == "ri") format = TouchstoneFormat::RI;
                else if (tok == "ma") format = TouchstoneFormat::MA;
                else if (tok == "db") format = TouchstoneFormat::DB;
                else if (tok == "r") expect_resistance = true;
                else throw ParseError(where + ": malformed option line token '" + tok_raw + "'");
            }
            if (expect_resistance)
                throw ParseError(where + ": option line ends after 'R' without a resistance");
            continue;
        }

        const std::vector<std::string> cols = split_ws(line);
        if (cols.size() != 3) {
            if (cols.size() == 9 || cols.size() == 5)
                throw ParseError(where + ": wrong port count (expected 3 columns for 1-port)");
            throw ParseError(where + ": expected 3 columns, found " +
                             std::to_string(cols.size()));
        }
        const double f = parse_number(cols[0], where + ", column 1") * unit_scale;
        const double a = parse_number(cols[1], where + ", column 2");
        const double b = parse_number(cols[2], where + ", column 3");

        std::complex<double> v;
        switch (format) {
            case TouchstoneFormat::RI: v = {a, b}; break;
            case TouchstoneFormat::MA: v = std::polar(a, b * kPi / 180.0); break;
            case TouchstoneFormat::DB: v = std::polar(std::pow(10.0, a / 20.0), b * kPi / 180.0); break;
        }
        if (!freq.empty() && f <= freq.back())
            throw ParseError(where + ": non-monotone frequency axis");
        freq.push_back(f);
        s11.push_back(v);
    }

    if (freq.empty()) throw ParseError(path.string() + ": no data rows");

    resonance::FrequencyTrace trace;
    trace.frequencies = Eigen::Map<Eigen::ArrayXd>(freq.data(), static_cast<Eigen::Index>(freq.size()));
    trace.s11 = Eigen::Map<Eigen::ArrayXcd>(s11.data(), static_cast<Eigen::Index>(s11.size()));
    if (const auto it = metadata.find("drive_power_w"); it != metadata.end())
        trace.drive_power_w = it->second;
    if (const auto it = metadata.find("temperature_k"); it != metadata.end())
        trace.temperature_k = it->second;
    return trace;
}

void write_touchstone(const std::filesystem::path& path, const resonance::FrequencyTrace& trace,
                      TouchstoneFormat format, FrequencyUnit unit) {
    std::ofstream out = open_output(path);
    double scale = 1.0;
    const char* unit_name = "Hz";
    switch (unit) {
        case FrequencyUnit::Hz: break;
        case FrequencyUnit::kHz: scale = 1e3; unit_name = "kHz"; break;
        case FrequencyUnit::MHz: scale = 1e6; unit_name = "MHz"; break;
        case FrequencyUnit::GHz: scale = 1e9; unit_name = "GHz"; break;
    }
    const char* fmt_name = format == TouchstoneFormat::RI ? "RI"
                           : format == TouchstoneFormat::MA ? "MA" : "DB";

    out << "! single-port reflection trace\n";
    if (trace.drive_power_w) out << "! drive_power_w = " << format_double(*trace.drive_power_w) << "\n";
    if (trace.temperature_k) out << "! temperature_k = " << format_double(*trace.temperature_k) << "\n";
    out << "# " << unit_name << " S " << fmt_name << " R 50\n";
    for (Eigen::Index i = 0; i < trace.frequencies.size(); ++i) {
        const std::complex<double> v = trace.s11(i);
        double a = 0.0, b = 0.0;
        switch (format) {
            case TouchstoneFormat::RI: a = v.real(); b = v.imag(); break;
            case TouchstoneFormat::MA:
                a = std::abs(v);
                b = std::arg(v) * 180.0 / kPi;
                break;
            case TouchstoneFormat::DB:
                a = 20.0 * std::log10(std::max(std::abs(v), 1e-300));
                b = std::arg(v) * 180.0 / kPi;
                break;
        }
        out << format_double(trace.frequencies(i) / scale) << ' ' << format_double(a) << ' '
            << format_double(b) << '\n';
    }
}

CsvSchema schema_from_string(const std::string& name) {
    if (name == "freq-complex") return CsvSchema::FreqComplex;
    if (name == "freq-magphase") return CsvSchema::FreqMagPhase;
    if (name == "time-amplitude") return CsvSchema::TimeAmplitude;
    if (name == "qn-points") return CsvSchema::QnPoints;
    if (name == "qt-points") return CsvSchema::QtPoints;
    if (name == "ft-points") return CsvSchema::FtPoints;
    if (name == "xps") return CsvSchema::Xps;
    throw ParseError("unknown csv schema '" + name + "'");
}

std::string to_string(CsvSchema schema) {
    switch (schema) {
        case CsvSchema::FreqComplex: return "freq-complex";
        case CsvSchema::FreqMagPhase: return "freq-magphase";
        case CsvSchema::TimeAmplitude: return "time-amplitude";
        case CsvSchema::QnPoints: return "qn-points";
        case CsvSchema::QtPoints: return "qt-points";
        case CsvSchema::FtPoints: return "ft-points";
        case CsvSchema::Xps: return "xps";
    }
    return "?";
}

namespace {

struct HeaderContract {
    CsvSchema schema;
    std::vector<std::string> columns;
    bool third_optional;
};

const std::vector<HeaderContract>& header_contracts() {
    static const std::vector<HeaderContract> contracts = {
        {CsvSchema::FreqComplex, {"frequency_hz", "s11_re", "s11_im"}, false},
        {CsvSchema::FreqMagPhase, {"frequency_hz", "s11_mag", "s11_phase_rad"}, false},
        {CsvSchema::TimeAmplitude, {"time_s", "amplitude"}, false},
        {CsvSchema::TimeAmplitude, {"time_s", "power_w"}, false},
        {CsvSchema::QnPoints, {"n_bar", "q_int", "q_int_sigma"}, true},
        {CsvSchema::QtPoints, {"temperature_k", "q_int", "q_int_sigma"}, true},
        {CsvSchema::FtPoints, {"temperature_k", "dff", "dff_sigma"}, true},
        {CsvSchema::Xps, {"binding_energy_ev", "counts"}, false},
    };
    return contracts;
}

} // namespace

ParsedCsv parse_csv_trace(const std::filesystem::path& path, std::optional<CsvSchema> expected) {
    std::ifstream in = open_input(path);

    std::map<std::string, double> metadata;
    std::optional<std::string> declared_schema;
    std::vector<std::string> header;
    std::vector<std::array<double, 3>> rows;
    std::size_t ncols = 0;

    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string where = path.string() + ":row " + std::to_string(lineno);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        if (line[0] == '#') {
            const std::string body = trim(line.substr(1));
            const auto eq = body.find('=');
            if (eq != std::string::npos) {
                const std::string key = trim(body.substr(0, eq));
                const std::string val = trim(body.substr(eq + 1));
                if (key == "schema") declared_schema = val;
                else if (const auto kv = parse_metadata(body)) metadata[kv->first] = kv->second;
            }
            continue;
        }
        if (header.empty()) {
            for (const std::string& c : split(line, ',')) header.push_back(trim(c));
            ncols = header.size();
            if (ncols < 2 || ncols > 3)
                throw ParseError(where + ": expected 2 or 3 header columns, found " +
                                 std::to_string(ncols));
            continue;
        }
        const std::vector<std::string> cols = split(line, ',');
        if (cols.size() != ncols)
            throw ParseError(where + ": expected " + std::to_string(ncols) +
                             " columns, found " + std::to_string(cols.size()));
        std::array<double, 3> vals{0.0, 0.0, 0.0};
        for (std::size_t c = 0; c < cols.size(); ++c)
            vals[c] = parse_number(cols[c], where + ", column " + std::to_string(c + 1) + " (" +
                                                header[c] + ")");
        rows.push_back(vals);
    }

    if (header.empty()) throw ParseError(path.string() + ": missing header row");
    if (rows.empty()) throw ParseError(path.string() + ": no data rows");

    // Match the header against the schema contracts.
    const HeaderContract* match = nullptr;
    for (const auto& contract : header_contracts()) {
        const std::size_t required = contract.third_optional ? 2 : contract.columns.size();
        if (ncols != required && !(contract.third_optional && ncols == 3)) continue;
        bool ok = true;
        for (std::size_t c = 0; c < ncols; ++c)
            if (header[c] != contract.columns[c]) { ok = false; break; }
        if (ok) { match = &contract; break; }
    }
    if (match == nullptr) {
        std::string h;
        for (std::size_t c = 0; c < header.size(); ++c) h += (c ? "," : "") + header[c];
        throw ParseError(path.string() + ": header '" + h + "' matches no schema contract");
    }

    ParsedCsv out;
    out.schema = match->schema;
    out.metadata = metadata;
    if (declared_schema && schema_from_string(*declared_schema) != out.schema)
        throw ParseError(path.string() + ": declared schema '" + *declared_schema +
                         "' does not match header (" + to_string(out.schema) + ")");
    if (expected && *expected != out.schema)
        throw ParseError(path.string() + ": expected schema " + to_string(*expected) +
                         ", found " + to_string(out.schema));

    const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
    Eigen::ArrayXd c0(m), c1(m), c2(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        c0(i) = rows[static_cast<std::size_t>(i)][0];
        c1(i) = rows[static_cast<std::size_t>(i)][1];
        c2(i) = rows[static_cast<std::size_t>(i)][2];
    }

    try {
        switch (out.schema) {
            case CsvSchema::FreqComplex:
            case CsvSchema::FreqMagPhase: {
                resonance::FrequencyTrace trace;
                trace.frequencies = c0;
                trace.s11.resize(m);
                for (Eigen::Index i = 0; i < m; ++i)
                    trace.s11(i) = out.schema == CsvSchema::FreqComplex
                                       ? std::complex<double>(c1(i), c2(i))
                                       : std::polar(c1(i), c2(i));
                if (const auto it = metadata.find("drive_power_w"); it != metadata.end())
                    trace.drive_power_w = it->second;
                if (const auto it = metadata.find("temperature_k"); it != metadata.end())
                    trace.temperature_k = it->second;
                trace.validate(2);
                out.data = std::move(trace);
                break;
            }
            case CsvSchema::TimeAmplitude: {
                ringdown::TimeTrace trace;
                trace.times = c0;
                trace.values = c1;
                trace.kind = header[1] == "power_w" ? ringdown::TimeTrace::Kind::Power
                                                    : ringdown::TimeTrace::Kind::Amplitude;
                if (const auto it = metadata.find("chain_gain_db"); it != metadata.end())
                    trace.chain_gain_db = it->second;
                trace.validate();
                out.data = std::move(trace);
                break;
            }
            case CsvSchema::QnPoints:
            case CsvSchema::QtPoints:
            case CsvSchema::FtPoints: {
                models::XYData data;
                data.x = c0;
                data.y = c1;
                if (ncols == 3) data.sigma = c2;
                out.data = std::move(data);
                break;
            }
            case CsvSchema::Xps: {
                xps::Spectrum spectrum;
                spectrum.binding_energy_ev = c0;
                spectrum.counts = c1;
                spectrum.validate(4);
                out.data = std::move(spectrum);
                break;
            }
        }
    } catch (const DomainError& err) {
        throw ParseError(path.string() + ": " + err.what());
    }
    return out;
}

namespace {

void write_preamble(std::ofstream& out, CsvSchema schema,
                    const std::map<std::string, double>& metadata) {
    out << "# schema = " << to_string(schema) << "\n";
    for (const auto& [key, value] : metadata)
        out << "# " << key << " = " << format_double(value) << "\n";
}

} // namespace

void write_csv_xy(const std::filesystem::path& path, CsvSchema schema, const models::XYData& data,
                  const std::map<std::string, double>& metadata) {
    const HeaderContract* contract = nullptr;
    for (const auto& c : header_contracts())
        if (c.schema == schema && c.third_optional) contract = &c;
    if (contract == nullptr) throw ParseError("write_csv_xy: schema is not a point schema");

    std::ofstream out = open_output(path);
    write_preamble(out, schema, metadata);
    const bool with_sigma = data.sigma.size() > 0;
    out << contract->columns[0] << ',' << contract->columns[1];
    if (with_sigma) out << ',' << contract->columns[2];
    out << '\n';
    for (Eigen::Index i = 0; i < data.x.size(); ++i) {
        out << format_double(data.x(i)) << ',' << format_double(data.y(i));
        if (with_sigma) out << ',' << format_double(data.sigma(i));
        out << '\n';
    }
}

void write_csv_time_trace(const std::filesystem::path& path, const ringdown::TimeTrace& trace,
                          const std::map<std::string, double>& metadata) {
    std::ofstream out = open_output(path);
    auto meta = metadata;
    if (trace.chain_gain_db) meta["chain_gain_db"] = *trace.chain_gain_db;
    write_preamble(out, CsvSchema::TimeAmplitude, meta);
    out << "time_s," << (trace.kind == ringdown::TimeTrace::Kind::Power ? "power_w" : "amplitude")
        << '\n';
    for (Eigen::Index i = 0; i < trace.times.size(); ++i)
        out << format_double(trace.times(i)) << ',' << format_double(trace.values(i)) << '\n';
}

void write_csv_freq_trace(const std::filesystem::path& path,
                          const resonance::FrequencyTrace& trace, bool magphase,
                          const std::map<std::string, double>& metadata) {
    std::ofstream out = open_output(path);
    auto meta = metadata;
    if (trace.drive_power_w) meta["drive_power_w"] = *trace.drive_power_w;
    if (trace.temperature_k) meta["temperature_k"] = *trace.temperature_k;
    write_preamble(out, magphase ? CsvSchema::FreqMagPhase : CsvSchema::FreqComplex, meta);
    out << (magphase ? "frequency_hz,s11_mag,s11_phase_rad" : "frequency_hz,s11_re,s11_im")
        << '\n';
    for (Eigen::Index i = 0; i < trace.frequencies.size(); ++i) {
        const std::complex<double> v = trace.s11(i);
        const double a = magphase ? std::abs(v) : v.real();
        const double b = magphase ? std::arg(v) : v.imag();
        out << format_double(trace.frequencies(i)) << ',' << format_double(a) << ','
            << format_double(b) << '\n';
    }
}

void write_csv_spectrum(const std::filesystem::path& path, const xps::Spectrum& spectrum,
                        const std::map<std::string, double>& metadata) {
    std::ofstream out = open_output(path);
    write_preamble(out, CsvSchema::Xps, metadata);
    out << "binding_energy_ev,counts\n";
    for (Eigen::Index i = 0; i < spectrum.binding_energy_ev.size(); ++i)
        out << format_double(spectrum.binding_energy_ev(i)) << ','
            << format_double(spectrum.counts(i)) << '\n';
}

} // namespace cavchar::io
