#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cuerank {

// Minimal sectioned key-value config: [section] headers, key = value lines,
// '#'/';' comments, later keys override earlier ones within a section.
class IniFile {
public:
    static IniFile parse_file(const std::string& path);
    static IniFile parse_string(std::string_view text, const std::string& origin = "<string>");

    bool has_section(const std::string& name) const;
    std::optional<std::string> get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const;
    // Key/value pairs of one section in file order (empty when absent).
    std::vector<std::pair<std::string, std::string>> items(const std::string& section) const;
    const std::vector<std::string>& section_order() const { return section_order_; }

private:
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections_;
    std::vector<std::string> section_order_;
};

// "a, b , c" -> {"a", "b", "c"}; empty items dropped.
std::vector<std::string> split_list(std::string_view value);

std::string trim(std::string_view s);

double parse_double_or_fail(const std::string& value, const std::string& what);
long long parse_int_or_fail(const std::string& value, const std::string& what);
bool parse_bool_or_fail(const std::string& value, const std::string& what);

} // namespace cuerank
