#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "sqg/solver.hpp"

namespace sqg {

// Flat key-value configuration with [section] headers.  Keys are stored
// fully qualified as "section.key"; see docs/config.md for the schema.
struct Config {
    std::map<std::string, std::string> kv;
    std::vector<std::string> order;  // insertion order of qualified keys

    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const { return kv.count(key) != 0; }
    std::string str(const std::string& key, const std::string& def = "") const;
    double num(const std::string& key, double def) const;
    double require_num(const std::string& key) const;
    long integer(const std::string& key, long def) const;
    bool flag(const std::string& key, bool def) const;

    void set(const std::string& key, const std::string& value);

    // Rejects qualified keys whose section appears in `sections` but whose
    // name is not listed there.  Sections absent from the schema pass through.
    void check_schema(const std::map<std::string, std::set<std::string>>& sections) const;

    // keys of one section, stripped of the prefix, in insertion order
    std::vector<std::string> section_keys(const std::string& section) const;
};

// Seeded initial data for the solver scenarios.  All generators stay
// band-limited below the dealias cutoff so the quadratic term is
// alias-free on the working grid.
//   initial.type = mode_sum | gaussian_bump | random_band
SpectralField initial_data(const Config& c, const BasisPtr& basis, Rng rng);

}  // namespace sqg
