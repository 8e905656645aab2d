#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ctxnet/error.hpp"

namespace ctxnet {

/// Flat "key = value" text. Dotted keys act as sections, '#' starts a
/// comment, blank lines are ignored. Keys are kept sorted so that
/// to_text() is canonical.
class KeyValues {
public:
    static KeyValues parse(std::istream& in) {
        KeyValues kv;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const auto body = trim(line);
            if (body.empty()) continue;
            const auto eq = body.find('=');
            require(eq != std::string_view::npos, "config",
                    "line " + std::to_string(line_no) + ": expected 'key = value'");
            const auto key = trim(body.substr(0, eq));
            require(!key.empty(), "config", "line " + std::to_string(line_no) + ": empty key");
            kv.values_[std::string(key)] = std::string(trim(body.substr(eq + 1)));
        }
        return kv;
    }

    static KeyValues parse(const std::string& text) {
        std::istringstream in(text);
        return parse(in);
    }

    static KeyValues load(const std::string& path) {
        std::ifstream in(path);
        require(static_cast<bool>(in), "io", "cannot open config " + path);
        return parse(in);
    }

    std::string to_text() const {
        std::string out;
        for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
        return out;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
    void erase(const std::string& key) { values_.erase(key); }
    const std::map<std::string, std::string>& entries() const { return values_; }

    void merge(const KeyValues& other) {
        for (const auto& [k, v] : other.values_) values_[k] = v;
    }

    const std::string& get(const std::string& key) const {
        auto it = values_.find(key);
        require(it != values_.end(), "config", "missing key '" + key + "'");
        return it->second;
    }

    std::string get_or(const std::string& key, const std::string& fallback) const {
        return has(key) ? get(key) : fallback;
    }

    template <typename U>
    U get_as(const std::string& key) const {
        return convert<U>(key, get(key));
    }

    template <typename U>
    U get_as_or(const std::string& key, U fallback) const {
        return has(key) ? get_as<U>(key) : fallback;
    }

    /// Comma- or space-separated list.
    template <typename U>
    std::vector<U> get_list(const std::string& key) const {
        std::vector<U> out;
        std::string item;
        for (char c : get(key) + ",") {
            if (c == ',' || c == ' ' || c == '\t') {
                if (!item.empty()) out.push_back(convert<U>(key, item));
                item.clear();
            } else {
                item += c;
            }
        }
        return out;
    }

    template <typename U>
    std::vector<U> get_list_or(const std::string& key, std::vector<U> fallback) const {
        return has(key) ? get_list<U>(key) : fallback;
    }

    bool operator==(const KeyValues& o) const { return values_ == o.values_; }

private:
    static std::string_view trim(std::string_view s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
        return s;
    }

    template <typename U>
    static U convert(const std::string& key, const std::string& text) {
        if constexpr (std::is_same_v<U, std::string>) {
            return text;
        } else if constexpr (std::is_same_v<U, bool>) {
            if (text == "true" || text == "1" || text == "on" || text == "yes") return true;
            if (text == "false" || text == "0" || text == "off" || text == "no") return false;
            fail("config", "key '" + key + "': expected a boolean, got '" + text + "'");
        } else {
            U v{};
            auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
            require(ec == std::errc() && ptr == text.data() + text.size(), "config",
                    "key '" + key + "': cannot parse '" + text + "'");
            return v;
        }
    }

    std::map<std::string, std::string> values_;
};

/// Shortest decimal that round-trips.
inline std::string format_real(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

template <typename U>
std::string join_list(const std::vector<U>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ',';
        if constexpr (std::is_floating_point_v<U>) out += format_real(xs[i]);
        else out += std::to_string(xs[i]);
    }
    return out;
}

}  // namespace ctxnet
