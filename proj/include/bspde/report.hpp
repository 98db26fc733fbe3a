#pragma once

#include <filesystem>
#include <iosfwd>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace bspde {

enum class CheckStatus { Pass, Fail, Monitor, Skipped };

std::string_view to_string(CheckStatus s);

/// One check: value against [lower, upper]. Monitor records carry no
/// assertion; Skipped records have an undefined value.
struct CheckRecord {
    std::string check;
    double value = 0.0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    CheckStatus status = CheckStatus::Monitor;
    std::string provenance;

    std::string threshold_text() const;
};

class ExperimentReport {
public:
    explicit ExperimentReport(std::string experiment) : experiment_(std::move(experiment)) {}

    const std::string& experiment() const noexcept { return experiment_; }

    void param(const std::string& key, const std::string& value);
    void param(const std::string& key, double value);
    void param(const std::string& key, long long value);

    /// Asserts value <= upper.
    CheckRecord& at_most(const std::string& check, double value, double upper, const std::string& provenance);
    /// Asserts value >= lower.
    CheckRecord& at_least(const std::string& check, double value, double lower, const std::string& provenance);
    /// Asserts lower <= value <= upper.
    CheckRecord& within(const std::string& check, double value, double lower, double upper,
                        const std::string& provenance);
    /// Asserts a boolean property (value 1 or 0).
    CheckRecord& holds(const std::string& check, bool ok, const std::string& provenance);
    CheckRecord& monitor(const std::string& check, double value, const std::string& provenance);
    CheckRecord& skipped(const std::string& check, const std::string& provenance);

    void merge(const ExperimentReport& other, const std::string& prefix = "");

    const std::vector<CheckRecord>& records() const noexcept { return records_; }
    const std::vector<std::pair<std::string, std::string>>& params() const noexcept { return params_; }

    bool passed() const noexcept;
    std::size_t failures() const noexcept;

    double runtime_seconds = 0.0;

    /// experiment,check,value,threshold,status,provenance
    void write_csv(std::ostream& os) const;
    /// key,value
    void write_params_csv(std::ostream& os) const;
    /// Writes <dir>/<experiment>.csv and <dir>/<experiment>_params.csv.
    void write_files(const std::filesystem::path& dir) const;
    /// Human-readable summary, including runtime.
    void print_summary(std::ostream& os) const;

private:
    std::string experiment_;
    std::vector<std::pair<std::string, std::string>> params_;
    std::vector<CheckRecord> records_;
};

std::string format_double(double v);

}  // namespace bspde
