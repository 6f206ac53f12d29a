#include "sqg/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace sqg {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse_string(const std::string& text, const std::string& origin) {
    Config c;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw config_error(origin + ":" + std::to_string(lineno) +
                                   ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw config_error(origin + ":" + std::to_string(lineno) + ": empty section name");
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error(origin + ":" + std::to_string(lineno) +
                               ": expected 'key = value', got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw config_error(origin + ":" + std::to_string(lineno) + ": empty key");
        std::string q = section.empty() ? key : section + "." + key;
        if (c.kv.count(q))
            throw config_error(origin + ":" + std::to_string(lineno) + ": duplicate key '" + q + "'");
        c.kv[q] = val;
        c.order.push_back(q);
    }
    return c;
}

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path);
}

std::string Config::str(const std::string& key, const std::string& def) const {
    auto it = kv.find(key);
    return it == kv.end() ? def : it->second;
}

double Config::num(const std::string& key, double def) const {
    auto it = kv.find(key);
    if (it == kv.end()) return def;
    try {
        size_t pos = 0;
        double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw config_error("config field '" + key + "': expected a number, got '" + it->second + "'");
    }
}

double Config::require_num(const std::string& key) const {
    if (!has(key)) throw config_error("config field '" + key + "' is required");
    return num(key, 0.0);
}

long Config::integer(const std::string& key, long def) const {
    auto it = kv.find(key);
    if (it == kv.end()) return def;
    try {
        size_t pos = 0;
        long v = std::stol(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw config_error("config field '" + key + "': expected an integer, got '" + it->second + "'");
    }
}

bool Config::flag(const std::string& key, bool def) const {
    auto it = kv.find(key);
    if (it == kv.end()) return def;
    std::string v = it->second;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw config_error("config field '" + key + "': expected a boolean, got '" + it->second + "'");
}

void Config::set(const std::string& key, const std::string& value) {
    if (!kv.count(key)) order.push_back(key);
    kv[key] = value;
}

void Config::check_schema(const std::map<std::string, std::set<std::string>>& sections) const {
    for (const auto& q : order) {
        size_t dot = q.find('.');
        if (dot == std::string::npos) continue;
        std::string sec = q.substr(0, dot), name = q.substr(dot + 1);
        auto it = sections.find(sec);
        if (it == sections.end()) continue;
        if (!it->second.count(name))
            throw config_error("config field '" + q + "': unknown key in section [" + sec + "]");
    }
}

std::vector<std::string> Config::section_keys(const std::string& section) const {
    std::vector<std::string> out;
    std::string prefix = section + ".";
    for (const auto& q : order)
        if (q.rfind(prefix, 0) == 0) out.push_back(q.substr(prefix.size()));
    return out;
}

// ===================================================================
// initial data
// ===================================================================

SpectralField initial_data(const Config& c, const BasisPtr& basis, Rng rng) {
    std::string type = c.str("initial.type", "random_band");
    SpectralField f = SpectralField::zero(basis);
    double amp = c.num("initial.amplitude", 1.0);

    if (type == "mode_sum") {
        // initial.modes = "k,l,c; k,l,c; ..."
        std::string spec = c.str("initial.modes", "1,1,1");
        std::istringstream ss(spec);
        std::string term;
        while (std::getline(ss, term, ';')) {
            std::istringstream ts(term);
            std::string a, b, w;
            if (!std::getline(ts, a, ',') || !std::getline(ts, b, ',') || !std::getline(ts, w))
                throw config_error("initial.modes: expected 'k,l,c' terms, got '" + term + "'");
            int k = std::stoi(a), l = std::stoi(b);
            double coef = std::stod(w);
            bool found = false;
            for (int j = 0; j < basis->n_modes; ++j)
                if (basis->modes[j] == std::make_pair(k, l)) {
                    f.c[j] += amp * coef;
                    found = true;
                    break;
                }
            if (!found)
                throw config_error("initial.modes: mode (" + a + "," + b + ") outside the basis");
        }
        return f;
    }

    // band limit: highest wavenumber index allowed; defaults keep the
    // quadratic term inside the 2/3 dealias cutoff of the working grid
    int band = static_cast<int>(c.integer("initial.band", std::max(1, basis->kmax / 3)));

    if (type == "gaussian_bump") {
        double cx = c.num("initial.cx", 0.45), cy = c.num("initial.cy", 0.55);
        double w = c.num("initial.width", 0.12);
        GridField g = GridField::sample(basis->grid, [&](double x, double y) {
            double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            return amp * std::exp(-r2 / (w * w));
        });
        Eigen::VectorXd coef = basis->analyze(g.v);
        for (int j = 0; j < basis->n_modes; ++j) {
            auto [k, l] = basis->modes[j];
            f.c[j] = (k <= band && l <= band) ? coef[j] : 0.0;
        }
        return f;
    }

    if (type == "random_band") {
        Rng r = rng.derive("initial_data");
        for (int j = 0; j < basis->n_modes; ++j) {
            auto [k, l] = basis->modes[j];
            if (k > band || l > band) continue;
            // smooth spectrum: random sign/phase with decaying envelope
            double env = 1.0 / (1.0 + basis->mu[j]);
            f.c[j] = amp * env * r.uniform(-1.0, 1.0);
        }
        // normalize the sup norm so cfl/threshold configs mean the same
        // thing regardless of band
        GridField g = reconstruct(f);
        double m = g.max_abs();
        if (m > 0) f.c *= amp / m;
        return f;
    }

    throw config_error("initial.type: unknown generator '" + type + "'");
}

}  // namespace sqg
