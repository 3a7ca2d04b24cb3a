#include "report.hpp"

#include "fbsde/cli.hpp"
#include "section.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace fbsde::cli {
namespace {

void write_file(const std::filesystem::path& file, const std::string& content) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) fail("cannot write output file '" + file.string() + "'");
    out << content;
    if (!out) fail("failed writing output file '" + file.string() + "'");
}

std::string quote(const std::string& v) {
    if (v.find_first_of(",\"\n") == std::string::npos) return v;
    std::string q = "\"";
    for (char c : v) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

std::string with_format(const char* fmt, double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, fmt, v);
    // snprintf honours LC_NUMERIC; force '.' as the decimal mark.
    for (char* c = buf; *c; ++c)
        if (*c == ',') *c = '.';
    return buf;
}

}  // namespace

std::string format_number(double v) { return with_format("%.17g", v); }
std::string format_short(double v) { return with_format("%.10g", v); }
std::string pass_fail(bool ok) { return ok ? "pass" : "fail"; }

CsvWriter::CsvWriter(const std::filesystem::path& file, const std::vector<std::string>& header)
    : file_(file), columns_(header.size()) {
    for (std::size_t i = 0; i < header.size(); ++i) buffer_ += (i ? "," : "") + quote(header[i]);
    buffer_ += '\n';
}

CsvWriter& CsvWriter::add(double v) { return add(format_number(v)); }
CsvWriter& CsvWriter::add(long long v) { return add(std::to_string(v)); }

CsvWriter& CsvWriter::add(const std::string& v) {
    if (filled_ > 0) buffer_ += ',';
    buffer_ += quote(v);
    ++filled_;
    return *this;
}

void CsvWriter::end_row() {
    if (filled_ != columns_)
        throw Error("cli", "CSV row for '" + file_.filename().string() + "' has " + std::to_string(filled_) +
                               " fields, header has " + std::to_string(columns_));
    buffer_ += '\n';
    filled_ = 0;
}

void CsvWriter::close() { write_file(file_, buffer_); }

void Summary::section(const std::string& title) {
    if (!body_.empty()) body_ += '\n';
    body_ += "[" + title + "]\n";
}

void Summary::line(const std::string& key, const std::string& value) { body_ += key + ": " + value + "\n"; }
void Summary::line(const std::string& key, double value) { line(key, format_short(value)); }
void Summary::text(const std::string& raw) { body_ += raw; }
void Summary::write(const std::filesystem::path& file) const { write_file(file, body_); }

void StageTimer::start(std::string stage) {
    current_ = std::move(stage);
    began_ = std::chrono::steady_clock::now();
}

void StageTimer::stop() {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - began_).count();
    stages_.emplace_back(current_, secs);
}

void StageTimer::write(const std::filesystem::path& file) const {
    std::string body;
    double total = 0.0;
    for (const auto& [stage, secs] : stages_) {
        body += stage + ": " + with_format("%.3f", secs) + " s\n";
        total += secs;
    }
    body += "total: " + with_format("%.3f", total) + " s\n";
    write_file(file, body);
}

void write_audit(Summary& s, const AuditReport& report) {
    const auto& p = report.profile;
    s.line("forward", to_string(p.forward) + " (" + to_string(p.forward_tag) + ")");
    s.line("backward", to_string(p.backward) + " (" + to_string(p.backward_tag) + ")");
    s.line("uniqueness", to_string(p.uniqueness) + " (" + to_string(p.uniqueness_tag) + ")");
    s.line("constants", "C=" + format_short(p.constants.C) + " r=" + format_short(p.constants.r) +
                            " epsilon=" + format_short(p.constants.epsilon) +
                            " kappa=" + format_short(p.constants.kappa));
    s.line("tightest_epsilon", report.tightest_epsilon);
    s.line("drift_modulus", report.drift_modulus);
    s.line("evaluations", std::to_string(report.evaluations));
    for (const auto& e : report.entries) {
        std::string row = "  " + e.condition + " | " + e.check + " | " + to_string(e.tag);
        if (!e.detail.empty()) row += " | " + e.detail;
        if (e.witness) row += " | witness " + *e.witness;
        s.text(row + "\n");
    }
}

void write_audit_csv(const std::filesystem::path& file, const AuditReport& report) {
    CsvWriter csv(file, {"condition", "check", "tag", "detail", "witness"});
    for (const auto& e : report.entries) {
        csv.add(e.condition).add(e.check).add(to_string(e.tag)).add(e.detail).add(e.witness.value_or(""));
        csv.end_row();
    }
    csv.close();
}

}  // namespace fbsde::cli
