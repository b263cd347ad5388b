#include "awg/config_text.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "awg/error.hpp"

namespace awg::cfg {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& v, const std::string& key)
{
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size() && std::isfinite(d))
            return d;
    } catch (const std::exception&) {
    }
    throw Error(Errc::ConfigError, "bad number for " + key + ": '" + v + "'");
}

std::uint64_t parse_u64(const std::string& v, const std::string& key)
{
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw Error(Errc::ConfigError, "bad integer for " + key + ": '" + v + "'");
    return out;
}

std::vector<std::string> split_list(const std::string& v)
{
    std::vector<std::string> out;
    if (trim(v).empty())
        return out;
    std::size_t pos = 0;
    while (true) {
        const auto comma = v.find(',', pos);
        out.push_back(trim(std::string_view(v).substr(pos, comma == std::string::npos ? std::string::npos : comma - pos)));
        if (comma == std::string::npos)
            break;
        pos = comma + 1;
    }
    return out;
}

std::vector<double> parse_doubles(const std::string& v, const std::string& key)
{
    std::vector<double> out;
    for (const auto& s : split_list(v))
        out.push_back(parse_double(s, key));
    return out;
}

std::vector<std::uint64_t> parse_u64s(const std::string& v, const std::string& key)
{
    std::vector<std::uint64_t> out;
    for (const auto& s : split_list(v))
        out.push_back(parse_u64(s, key));
    return out;
}

bool split_indexed(const std::string& key, std::string_view prefix, std::size_t& index, std::string& field)
{
    if (key.rfind(prefix, 0) != 0)
        return false;
    const auto dot = key.find('.', prefix.size());
    if (dot == std::string::npos)
        throw Error(Errc::ConfigError, "malformed key " + key);
    index = parse_u64(key.substr(prefix.size(), dot - prefix.size()), key);
    field = key.substr(dot + 1);
    return true;
}

std::string fmt_double(double v)
{
    char buf[32];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ec == std::errc{} ? p : buf);
}

std::string read_file(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw Error(Errc::ConfigError, "cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

KeyValues::KeyValues(std::string_view text, std::string what) : what_(std::move(what))
{
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.resize(hash);
        const auto t = trim(line);
        if (t.empty())
            continue;
        const auto eq = t.find('=');
        const std::string where = what_ + " line " + std::to_string(lineno);
        if (eq == std::string::npos)
            throw Error(Errc::ConfigError, where + ": expected key = value");
        const auto key = trim(std::string_view(t).substr(0, eq));
        const auto val = trim(std::string_view(t).substr(eq + 1));
        if (key.empty())
            throw Error(Errc::ConfigError, where + ": empty key");
        if (!kv_.emplace(key, val).second)
            throw Error(Errc::ConfigError, where + ": duplicate key " + key);
    }
}

std::optional<std::string> KeyValues::take(const std::string& key)
{
    auto it = kv_.find(key);
    if (it == kv_.end())
        return std::nullopt;
    auto v = it->second;
    kv_.erase(it);
    return v;
}

std::string KeyValues::require(const std::string& key)
{
    auto v = take(key);
    if (!v)
        throw Error(Errc::ConfigError, what_ + " needs '" + key + "'");
    return *v;
}

void KeyValues::expect_consumed() const
{
    if (!kv_.empty())
        throw Error(Errc::ConfigError, what_ + ": unknown key " + kv_.begin()->first);
}

} // namespace awg::cfg
