#pragma once

#include <cctype>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "deltatrain/errors.hpp"
#include "deltatrain/ssl_engine.hpp"
#include "deltatrain/util.hpp"

namespace deltatrain {

// Flat TOML-style "key = value" files: integers, floats, booleans, quoted
// strings, and integer arrays; '#' starts a comment. Unknown keys are errors.

namespace detail {

struct ConfigValue {
    enum class Kind { integer, real, boolean, string, int_array } kind = Kind::integer;
    std::int64_t i = 0;
    double d = 0.0;
    bool b = false;
    std::string s;
    std::vector<int> arr;
    int line = 0;
};

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline ConfigValue parse_value(const std::string& raw, int line) {
    ConfigValue v;
    v.line = line;
    const std::string s = trim(raw);
    if (s.empty()) throw ConfigError("line " + std::to_string(line) + ": missing value");
    if (s.front() == '"') {
        if (s.size() < 2 || s.back() != '"')
            throw ConfigError("line " + std::to_string(line) + ": unterminated string");
        v.kind = ConfigValue::Kind::string;
        v.s = s.substr(1, s.size() - 2);
        return v;
    }
    if (s == "true" || s == "false") {
        v.kind = ConfigValue::Kind::boolean;
        v.b = s == "true";
        return v;
    }
    if (s.front() == '[') {
        if (s.back() != ']')
            throw ConfigError("line " + std::to_string(line) + ": unterminated array");
        v.kind = ConfigValue::Kind::int_array;
        std::string body = s.substr(1, s.size() - 2);
        std::string item;
        auto flush = [&] {
            const std::string t = trim(item);
            item.clear();
            if (t.empty()) return;
            long x = 0;
            if (!parse_int(t, x))
                throw ConfigError("line " + std::to_string(line) + ": array element '" + t +
                                  "' is not an integer");
            v.arr.push_back(static_cast<int>(x));
        };
        for (char c : body) {
            if (c == ',') flush();
            else item += c;
        }
        flush();
        return v;
    }
    long as_int = 0;
    if (parse_int(s, as_int)) {
        v.kind = ConfigValue::Kind::integer;
        v.i = as_int;
        return v;
    }
    try {
        std::size_t pos = 0;
        v.d = std::stod(s, &pos);
        if (pos == s.size()) {
            v.kind = ConfigValue::Kind::real;
            return v;
        }
    } catch (...) {
    }
    throw ConfigError("line " + std::to_string(line) + ": cannot parse value '" + s + "'");
}

} // namespace detail

inline std::map<std::string, detail::ConfigValue> parse_config_text(const std::string& text) {
    std::map<std::string, detail::ConfigValue> out;
    int line_no = 0;
    std::string line;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        // strip comments outside of strings
        bool in_string = false;
        std::string clean;
        for (char c : line) {
            if (c == '"') in_string = !in_string;
            if (c == '#' && !in_string) break;
            clean += c;
        }
        clean = detail::trim(clean);
        if (clean.empty()) continue;
        if (clean.front() == '[')
            throw ConfigError("line " + std::to_string(line_no) +
                              ": config uses flat keys; sections are not supported");
        const std::size_t eq = clean.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = detail::trim(clean.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        if (out.count(key))
            throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        out.emplace(key, detail::parse_value(clean.substr(eq + 1), line_no));
    }
    return out;
}

// Applies a parsed config onto defaults. Every SslConfig and TextCnnConfig
// field is overridable; unknown keys are errors.
inline void apply_config(const std::map<std::string, detail::ConfigValue>& kv, SslConfig& cfg) {
    using detail::ConfigValue;
    auto as_int = [](const ConfigValue& v, const std::string& key) -> std::int64_t {
        if (v.kind != ConfigValue::Kind::integer)
            throw ConfigError("key '" + key + "': expected an integer");
        return v.i;
    };
    auto as_real = [](const ConfigValue& v, const std::string& key) -> double {
        if (v.kind == ConfigValue::Kind::integer) return static_cast<double>(v.i);
        if (v.kind != ConfigValue::Kind::real)
            throw ConfigError("key '" + key + "': expected a number");
        return v.d;
    };
    auto as_bool = [](const ConfigValue& v, const std::string& key) -> bool {
        if (v.kind != ConfigValue::Kind::boolean)
            throw ConfigError("key '" + key + "': expected true or false");
        return v.b;
    };

    for (const auto& [key, v] : kv) {
        if (key == "framework") {
            if (v.kind != ConfigValue::Kind::string)
                throw ConfigError("key 'framework': expected a string");
            cfg.framework = parse_framework(v.s);
        } else if (key == "max_meta_epochs") cfg.max_meta_epochs = static_cast<int>(as_int(v, key));
        else if (key == "meta_patience") cfg.meta_patience = static_cast<int>(as_int(v, key));
        else if (key == "selftrain_threshold") cfg.selftrain_threshold = as_real(v, key);
        else if (key == "flood_after_stop") cfg.flood_after_stop = as_bool(v, key);
        else if (key == "n_emb_members") cfg.n_emb_members = static_cast<int>(as_int(v, key));
        else if (key == "n_rand_members") cfg.n_rand_members = static_cast<int>(as_int(v, key));
        else if (key == "run_seed") cfg.run_seed = as_int(v, key);
        else if (key == "seed_stride") cfg.seed_stride = as_int(v, key);
        else if (key == "threads") cfg.threads = static_cast<int>(as_int(v, key));
        else if (key == "min_freq") cfg.min_freq = static_cast<int>(as_int(v, key));
        else if (key == "max_len") cfg.classifier.max_len = static_cast<int>(as_int(v, key));
        else if (key == "embed_dim") cfg.classifier.embed_dim = static_cast<int>(as_int(v, key));
        else if (key == "kernel_sizes") {
            if (v.kind != ConfigValue::Kind::int_array)
                throw ConfigError("key 'kernel_sizes': expected an integer array");
            cfg.classifier.kernel_sizes = v.arr;
        } else if (key == "channels_block1") cfg.classifier.channels_block1 = static_cast<int>(as_int(v, key));
        else if (key == "channels_block2") cfg.classifier.channels_block2 = static_cast<int>(as_int(v, key));
        else if (key == "learning_rate") cfg.classifier.learning_rate = as_real(v, key);
        else if (key == "adam_beta1") cfg.classifier.adam_beta1 = as_real(v, key);
        else if (key == "adam_beta2") cfg.classifier.adam_beta2 = as_real(v, key);
        else if (key == "adam_epsilon") cfg.classifier.adam_epsilon = as_real(v, key);
        else if (key == "batch_size") cfg.classifier.batch_size = static_cast<int>(as_int(v, key));
        else if (key == "max_epochs") cfg.classifier.max_epochs = static_cast<int>(as_int(v, key));
        else if (key == "patience_epochs") cfg.classifier.patience_epochs = static_cast<int>(as_int(v, key));
        else if (key == "finetune_embeddings") cfg.classifier.finetune_embeddings = as_bool(v, key);
        else throw ConfigError("unknown config key '" + key + "'");
    }
}

inline SslConfig load_config_file(const std::string& path) {
    SslConfig cfg;
    try {
        apply_config(parse_config_text(read_file(path)), cfg);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return cfg;
}

} // namespace deltatrain
