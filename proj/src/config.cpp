#include "cuerank/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cuerank/error.hpp"

namespace cuerank {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

IniFile IniFile::parse_string(std::string_view text, const std::string& origin) {
    IniFile ini;
    std::string current;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view raw = text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                raise(ErrorCode::parse,
                      origin + ":" + std::to_string(line_no) + ": unterminated section header");
            current = trim(std::string_view(line).substr(1, line.size() - 2));
            if (current.empty())
                raise(ErrorCode::parse,
                      origin + ":" + std::to_string(line_no) + ": empty section name");
            if (!ini.sections_.count(current)) {
                ini.sections_[current] = {};
                ini.section_order_.push_back(current);
            }
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            raise(ErrorCode::parse,
                  origin + ":" + std::to_string(line_no) + ": expected key = value");
        std::string key = trim(std::string_view(line).substr(0, eq));
        std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty())
            raise(ErrorCode::parse, origin + ":" + std::to_string(line_no) + ": empty key");
        if (current.empty())
            raise(ErrorCode::parse,
                  origin + ":" + std::to_string(line_no) + ": key outside any section");
        ini.sections_[current].emplace_back(std::move(key), std::move(value));
    }
    return ini;
}

IniFile IniFile::parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) raise(ErrorCode::io, "cannot open config file: " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_string(buf.str(), path);
}

bool IniFile::has_section(const std::string& name) const { return sections_.count(name) > 0; }

std::optional<std::string> IniFile::get(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    if (it == sections_.end()) return std::nullopt;
    std::optional<std::string> found;
    for (const auto& [k, v] : it->second)
        if (k == key) found = v; // last one wins
    return found;
}

std::string IniFile::get_or(const std::string& section, const std::string& key,
                            const std::string& fallback) const {
    auto v = get(section, key);
    return v ? *v : fallback;
}

std::vector<std::pair<std::string, std::string>> IniFile::items(const std::string& section) const {
    auto it = sections_.find(section);
    return it == sections_.end() ? std::vector<std::pair<std::string, std::string>>{} : it->second;
}

std::vector<std::string> split_list(std::string_view value) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= value.size()) {
        std::size_t comma = value.find(',', start);
        std::string item = trim(value.substr(start, comma - start));
        if (!item.empty()) out.push_back(std::move(item));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

double parse_double_or_fail(const std::string& value, const std::string& what) {
    double out = 0.0;
    auto res = std::from_chars(value.data(), value.data() + value.size(), out);
    if (res.ec != std::errc{} || res.ptr != value.data() + value.size() || !std::isfinite(out))
        raise(ErrorCode::config, what + ": bad number '" + value + "'");
    return out;
}

long long parse_int_or_fail(const std::string& value, const std::string& what) {
    long long out = 0;
    auto res = std::from_chars(value.data(), value.data() + value.size(), out);
    if (res.ec != std::errc{} || res.ptr != value.data() + value.size())
        raise(ErrorCode::config, what + ": bad integer '" + value + "'");
    return out;
}

bool parse_bool_or_fail(const std::string& value, const std::string& what) {
    if (value == "on" || value == "true" || value == "1" || value == "yes") return true;
    if (value == "off" || value == "false" || value == "0" || value == "no") return false;
    raise(ErrorCode::config, what + ": bad boolean '" + value + "'");
}

} // namespace cuerank
