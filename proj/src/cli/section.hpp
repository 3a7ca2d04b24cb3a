#pragma once

#include "fbsde/error.hpp"

#include <json.hpp>

#include <cstdint>
#include <set>
#include <string>

namespace fbsde::cli {

using nlohmann::json;

[[noreturn]] inline void fail(const std::string& message) { throw InvalidArgument("cli", message); }

/// Reads one JSON object, remembering which keys were consumed so that
/// anything left over can be reported as unknown.
class Section {
public:
    Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) fail("config section '" + (path_.empty() ? std::string("root") : path_) + "' must be an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return node_.contains(key) && !node_.at(key).is_null();
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return node_.at(key);
    }

    double number(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_number()) fail("config field '" + field(key) + "' must be a number");
        return v.get<double>();
    }

    double positive(const std::string& key) {
        const double v = number(key);
        if (!(v > 0.0)) fail("config field '" + field(key) + "' must be positive");
        return v;
    }

    std::uint64_t count(const std::string& key, bool allow_zero = false) {
        const json& v = raw(key);
        if (!v.is_number_unsigned())
            fail("config field '" + field(key) + "' must be a non-negative integer");
        const auto n = v.get<std::uint64_t>();
        if (!allow_zero && n == 0) fail("config field '" + field(key) + "' must be positive");
        return n;
    }

    std::string text(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_string()) fail("config field '" + field(key) + "' must be a string");
        return v.get<std::string>();
    }

    Section child(const std::string& key) { return Section(raw(key), field(key)); }

    void finish() const {
        for (auto it = node_.begin(); it != node_.end(); ++it)
            if (!seen_.count(it.key())) fail("unknown config key '" + field(it.key()) + "'");
    }

private:
    const json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace fbsde::cli
