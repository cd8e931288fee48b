#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>

#include "cavchar/models.hpp"
#include "cavchar/resonance.hpp"
#include "cavchar/ringdown.hpp"
#include "cavchar/xps.hpp"

namespace cavchar::io {

enum class TouchstoneFormat { RI, MA, DB };
enum class FrequencyUnit { Hz, kHz, MHz, GHz };

// Touchstone v1, single port.  Metadata travels in "! key = value" comments.
resonance::FrequencyTrace parse_touchstone(const std::filesystem::path& path);
void write_touchstone(const std::filesystem::path& path, const resonance::FrequencyTrace& trace,
                      TouchstoneFormat format = TouchstoneFormat::RI,
                      FrequencyUnit unit = FrequencyUnit::Hz);

enum class CsvSchema { FreqComplex, FreqMagPhase, TimeAmplitude, QnPoints, QtPoints, FtPoints, Xps };

CsvSchema schema_from_string(const std::string& name);
std::string to_string(CsvSchema schema);

using CsvPayload =
    std::variant<resonance::FrequencyTrace, ringdown::TimeTrace, models::XYData, xps::Spectrum>;

struct ParsedCsv {
    CsvSchema schema;
    std::map<std::string, double> metadata;  // "# key = value" lines
    CsvPayload data;
};

// Header row determines the schema; a "# schema = ..." line and `expected`
// must agree with it when present.
ParsedCsv parse_csv_trace(const std::filesystem::path& path,
                          std::optional<CsvSchema> expected = std::nullopt);

void write_csv_xy(const std::filesystem::path& path, CsvSchema schema, const models::XYData& data,
                  const std::map<std::string, double>& metadata = {});
void write_csv_time_trace(const std::filesystem::path& path, const ringdown::TimeTrace& trace,
                          const std::map<std::string, double>& metadata = {});
void write_csv_freq_trace(const std::filesystem::path& path,
                          const resonance::FrequencyTrace& trace, bool magphase = false,
                          const std::map<std::string, double>& metadata = {});
void write_csv_spectrum(const std::filesystem::path& path, const xps::Spectrum& spectrum,
                        const std::map<std::string, double>& metadata = {});

// Shortest text rendering that exactly round-trips a double.
std::string format_double(double value);

} // namespace cavchar::io
