#include "dlmac/config.hpp"

#include "dlmac/errors.hpp"
#include "text_io.hpp"

#include <fstream>
#include <sstream>

namespace dlmac {

std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> out;
    for (auto part : detail::split(text, ',')) {
        const auto t = detail::trim(part);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

Config Config::parse(std::string_view text, std::string_view origin) {
    Config cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view t = line;
        if (const auto hash = t.find('#'); hash != std::string_view::npos) t = t.substr(0, hash);
        t = detail::trim(t);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": expected 'key = value'");
        const auto key = detail::trim(t.substr(0, eq));
        const auto value = detail::trim(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": empty key");
        cfg.values_[std::string(key)] = std::string(value);
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    Config cfg = parse(ss.str(), path.string());
    cfg.base_dir_ = path.parent_path();
    return cfg;
}

bool Config::has(std::string_view key) const { return find(key) != nullptr; }

void Config::set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }

const std::string* Config::find(std::string_view key) const {
    const auto it = values_.find(key);
    return it == values_.end() ? nullptr : &it->second;
}

void Config::reject_unknown(const std::string& key) { throw ConfigError("unknown config key '" + key + "'"); }

std::string Config::get_string(std::string_view key, std::string_view fallback) const {
    const auto* v = find(key);
    return v ? *v : std::string(fallback);
}

double Config::get_double(std::string_view key, double fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    try {
        return detail::parse_number(*v, 0);
    } catch (const Error&) {
        throw ConfigError("config key '" + std::string(key) + "' expects a number, got '" + *v + "'");
    }
}

long long Config::get_int(std::string_view key, long long fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    try {
        return detail::parse_integer(*v, 0);
    } catch (const Error&) {
        throw ConfigError("config key '" + std::string(key) + "' expects an integer, got '" + *v + "'");
    }
}

std::size_t Config::get_size(std::string_view key, std::size_t fallback) const {
    const long long v = get_int(key, static_cast<long long>(fallback));
    if (v < 0) throw ConfigError("config key '" + std::string(key) + "' must be non-negative");
    return static_cast<std::size_t>(v);
}

bool Config::get_bool(std::string_view key, bool fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
    if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
    throw ConfigError("config key '" + std::string(key) + "' expects a boolean, got '" + *v + "'");
}

std::optional<double> Config::get_optional_double(std::string_view key) const {
    if (!has(key)) return std::nullopt;
    return get_double(key, 0.0);
}

std::vector<int> Config::get_int_list(std::string_view key, std::vector<int> fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    std::vector<int> out;
    for (const auto& item : split_list(*v)) {
        try {
            out.push_back(static_cast<int>(detail::parse_integer(item, 0)));
        } catch (const Error&) {
            throw ConfigError("config key '" + std::string(key) + "' expects integers, got '" + item + "'");
        }
    }
    return out;
}

std::vector<std::size_t> Config::get_size_list(std::string_view key, std::vector<std::size_t> fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    std::vector<std::size_t> out;
    for (int x : get_int_list(key, {})) {
        if (x < 0) throw ConfigError("config key '" + std::string(key) + "' must list non-negative integers");
        out.push_back(static_cast<std::size_t>(x));
    }
    return out;
}

std::vector<std::string> Config::get_string_list(std::string_view key) const {
    const auto* v = find(key);
    return v ? split_list(*v) : std::vector<std::string>{};
}

std::filesystem::path Config::get_path(std::string_view key) const {
    const auto* v = find(key);
    if (!v || v->empty()) return {};
    std::filesystem::path p(*v);
    if (p.is_relative() && !base_dir_.empty()) p = base_dir_ / p;
    return p;
}

} // namespace dlmac
