#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dlmac {

/// Flat `key = value` text. Keys use dotted sections (`traffic.lambda`),
/// `#` starts a comment, blank lines are ignored. Later keys override
/// earlier ones.
class Config {
public:
    Config() = default;

    static Config parse(std::string_view text, std::string_view origin = "<config>");
    static Config load(const std::filesystem::path& path);

    /// Directory relative paths are resolved against (the file's directory).
    const std::filesystem::path& base_dir() const noexcept { return base_dir_; }
    void set_base_dir(std::filesystem::path dir) { base_dir_ = std::move(dir); }

    bool has(std::string_view key) const;
    void set(std::string key, std::string value);
    const std::map<std::string, std::string, std::less<>>& entries() const noexcept { return values_; }

    std::string get_string(std::string_view key, std::string_view fallback) const;
    double get_double(std::string_view key, double fallback) const;
    long long get_int(std::string_view key, long long fallback) const;
    std::size_t get_size(std::string_view key, std::size_t fallback) const;
    bool get_bool(std::string_view key, bool fallback) const;
    std::optional<double> get_optional_double(std::string_view key) const;
    std::vector<int> get_int_list(std::string_view key, std::vector<int> fallback) const;
    std::vector<std::size_t> get_size_list(std::string_view key, std::vector<std::size_t> fallback) const;
    std::vector<std::string> get_string_list(std::string_view key) const;
    /// Path value resolved against base_dir(); empty when absent.
    std::filesystem::path get_path(std::string_view key) const;

    /// Throws ConfigError naming the first key not accepted by `is_known`.
    template <class Pred>
    void check_known(Pred is_known) const {
        for (const auto& [k, v] : values_)
            if (!is_known(k)) reject_unknown(k);
    }

private:
    [[noreturn]] static void reject_unknown(const std::string& key);
    const std::string* find(std::string_view key) const;

    std::map<std::string, std::string, std::less<>> values_;
    std::filesystem::path base_dir_;
};

std::vector<std::string> split_list(std::string_view text);

} // namespace dlmac
