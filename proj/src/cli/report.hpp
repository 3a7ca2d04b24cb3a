#pragma once

#include "fbsde/audit.hpp"

#include <chrono>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

namespace fbsde::cli {

/// Comma-separated file with a header row, LF endings, 17-digit numbers.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& file, const std::vector<std::string>& header);
    CsvWriter& add(double v);
    CsvWriter& add(const std::string& v);
    CsvWriter& add(long long v);
    void end_row();
    void close();

private:
    std::filesystem::path file_;
    std::string buffer_;
    std::size_t columns_ = 0;
    std::size_t filled_ = 0;
};

/// Plain-text run summary built section by section, in insertion order.
class Summary {
public:
    void section(const std::string& title);
    void line(const std::string& key, const std::string& value);
    void line(const std::string& key, double value);
    void text(const std::string& raw);
    void write(const std::filesystem::path& file) const;

private:
    std::string body_;
};

/// Wall-clock per stage, written separately so summaries stay diffable.
class StageTimer {
public:
    void start(std::string stage);
    void stop();
    void write(const std::filesystem::path& file) const;

private:
    std::vector<std::pair<std::string, double>> stages_;
    std::string current_;
    std::chrono::steady_clock::time_point began_;
};

std::string pass_fail(bool ok);
std::string format_short(double v);  // 10 significant digits
void write_audit(Summary& s, const AuditReport& report);
void write_audit_csv(const std::filesystem::path& file, const AuditReport& report);

}  // namespace fbsde::cli
