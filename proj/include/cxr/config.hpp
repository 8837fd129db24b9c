#pragma once

// Flat key = value run configuration. Every tunable in the pipeline is a
// registered key with a per-profile default; unknown keys and out-of-range
// values are rejected at load time. The fully resolved map is serialized
// into checkpoints and metrics-log headers.

#include <map>
#include <string>
#include <vector>

namespace cxr::cfg {

enum class Profile { Toy, Paper };

Profile profile_from_string(const std::string& s);

class RunConfig {
public:
    static RunConfig defaults(Profile p);
    // file may be empty-string (defaults only); overrides are "key=value"
    static RunConfig load(Profile p, const std::string& path,
                          const std::vector<std::string>& overrides);

    int get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    const std::string& get_string(const std::string& key) const;

    void set(const std::string& key, const std::string& value);  // validates

    const std::map<std::string, std::string>& values() const { return values_; }
    Profile profile() const { return profile_; }
    // single-line JSON of the resolved config
    std::string to_json() const;

private:
    Profile profile_ = Profile::Toy;
    std::map<std::string, std::string> values_;
};

}  // namespace cxr::cfg
