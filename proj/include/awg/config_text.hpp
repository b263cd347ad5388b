#pragma once

// "key = value" text files shared by topology and scenario configs.
// '#' starts a comment; keys are unique.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace awg::cfg {

std::string trim(std::string_view s);

double parse_double(const std::string& v, const std::string& key);
std::uint64_t parse_u64(const std::string& v, const std::string& key);
/// Comma-separated list; empty string gives an empty list.
std::vector<std::string> split_list(const std::string& v);
std::vector<double> parse_doubles(const std::string& v, const std::string& key);
std::vector<std::uint64_t> parse_u64s(const std::string& v, const std::string& key);

/// "board.3.fanout_delay_ps" with prefix "board." -> (3, "fanout_delay_ps").
bool split_indexed(const std::string& key, std::string_view prefix, std::size_t& index, std::string& field);

/// Shortest text that reads back to the same double.
std::string fmt_double(double v);

std::string read_file(const std::string& path);

class KeyValues {
public:
    /// `what` names the file kind in error messages. Throws ConfigError.
    KeyValues(std::string_view text, std::string what);

    /// Removes and returns the value of `key`.
    std::optional<std::string> take(const std::string& key);
    std::string require(const std::string& key);

    /// Keys not yet taken, in sorted order.
    const std::map<std::string, std::string>& rest() const { return kv_; }
    /// Throws ConfigError naming the first untaken key, if any.
    void expect_consumed() const;

private:
    std::string what_;
    std::map<std::string, std::string> kv_;
};

} // namespace awg::cfg
