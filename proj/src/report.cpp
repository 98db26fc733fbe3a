#include "bspde/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

namespace bspde {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string_view to_string(CheckStatus s) {
    switch (s) {
        case CheckStatus::Pass: return "pass";
        case CheckStatus::Fail: return "fail";
        case CheckStatus::Monitor: return "monitor";
        case CheckStatus::Skipped: return "skipped";
    }
    return "?";
}

std::string CheckRecord::threshold_text() const {
    const bool lo = std::isfinite(lower);
    const bool hi = std::isfinite(upper);
    if (lo && hi) return "[" + format_double(lower) + ";" + format_double(upper) + "]";
    if (hi) return "<=" + format_double(upper);
    if (lo) return ">=" + format_double(lower);
    return "";
}

void ExperimentReport::param(const std::string& key, const std::string& value) { params_.emplace_back(key, value); }
void ExperimentReport::param(const std::string& key, double value) { params_.emplace_back(key, format_double(value)); }
void ExperimentReport::param(const std::string& key, long long value) {
    params_.emplace_back(key, std::to_string(value));
}

CheckRecord& ExperimentReport::within(const std::string& check, double value, double lower, double upper,
                                      const std::string& provenance) {
    CheckRecord r{check, value, lower, upper, CheckStatus::Fail, provenance};
    if (value >= lower && value <= upper) r.status = CheckStatus::Pass;
    records_.push_back(r);
    return records_.back();
}

CheckRecord& ExperimentReport::at_most(const std::string& check, double value, double upper,
                                       const std::string& provenance) {
    return within(check, value, -std::numeric_limits<double>::infinity(), upper, provenance);
}

CheckRecord& ExperimentReport::at_least(const std::string& check, double value, double lower,
                                        const std::string& provenance) {
    return within(check, value, lower, std::numeric_limits<double>::infinity(), provenance);
}

CheckRecord& ExperimentReport::holds(const std::string& check, bool ok, const std::string& provenance) {
    return within(check, ok ? 1.0 : 0.0, 1.0, 1.0, provenance);
}

CheckRecord& ExperimentReport::monitor(const std::string& check, double value, const std::string& provenance) {
    records_.push_back(CheckRecord{check, value, -std::numeric_limits<double>::infinity(),
                                   std::numeric_limits<double>::infinity(), CheckStatus::Monitor, provenance});
    return records_.back();
}

CheckRecord& ExperimentReport::skipped(const std::string& check, const std::string& provenance) {
    records_.push_back(CheckRecord{check, std::numeric_limits<double>::quiet_NaN(),
                                   -std::numeric_limits<double>::infinity(),
                                   std::numeric_limits<double>::infinity(), CheckStatus::Skipped, provenance});
    return records_.back();
}

void ExperimentReport::merge(const ExperimentReport& other, const std::string& prefix) {
    for (const auto& [k, v] : other.params_) params_.emplace_back(prefix + k, v);
    for (CheckRecord r : other.records_) {
        r.check = prefix + r.check;
        records_.push_back(std::move(r));
    }
    runtime_seconds += other.runtime_seconds;
}

bool ExperimentReport::passed() const noexcept { return failures() == 0; }

std::size_t ExperimentReport::failures() const noexcept {
    std::size_t n = 0;
    for (const auto& r : records_) n += r.status == CheckStatus::Fail;
    return n;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

void ExperimentReport::write_csv(std::ostream& os) const {
    os << "experiment,check,value,threshold,status,provenance\n";
    for (const auto& r : records_) {
        os << csv_field(experiment_) << ',' << csv_field(r.check) << ',' << format_double(r.value) << ','
           << csv_field(r.threshold_text()) << ',' << to_string(r.status) << ',' << csv_field(r.provenance) << '\n';
    }
}

void ExperimentReport::write_params_csv(std::ostream& os) const {
    os << "key,value\n";
    for (const auto& [k, v] : params_) os << csv_field(k) << ',' << csv_field(v) << '\n';
}

void ExperimentReport::write_files(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir / (experiment_ + ".csv"), std::ios::binary);
        write_csv(f);
    }
    std::ofstream f(dir / (experiment_ + "_params.csv"), std::ios::binary);
    write_params_csv(f);
}

void ExperimentReport::print_summary(std::ostream& os) const {
    std::size_t pass = 0, fail = 0, mon = 0, skip = 0;
    for (const auto& r : records_) {
        switch (r.status) {
            case CheckStatus::Pass: ++pass; break;
            case CheckStatus::Fail: ++fail; break;
            case CheckStatus::Monitor: ++mon; break;
            case CheckStatus::Skipped: ++skip; break;
        }
    }
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s: %zu pass, %zu fail, %zu monitor, %zu skipped (%.2f s)\n",
                  experiment_.c_str(), pass, fail, mon, skip, runtime_seconds);
    os << buf;
    for (const auto& r : records_) {
        if (r.status != CheckStatus::Fail) continue;
        os << "  FAIL " << r.check << " = " << format_double(r.value) << " (threshold " << r.threshold_text()
           << ")\n";
    }
}

}  // namespace bspde
