#include "loadmix/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>

namespace loadmix {

namespace {

void reject_unknown_keys(const nlohmann::json& doc,
                         std::initializer_list<const char*> known,
                         const char* where) {
    for (const auto& [key, value] : doc.items()) {
        bool ok = false;
        for (const char* name : known) ok = ok || key == name;
        if (!ok)
            throw ConfigError(std::string("config: unknown key \"") + key + "\" in " +
                              where);
    }
}

template <typename T>
void read_field(const nlohmann::json& doc, const char* key, T& target) {
    if (auto it = doc.find(key); it != doc.end()) target = it->get<T>();
}

BatterySpec parse_battery(const nlohmann::json& doc) {
    reject_unknown_keys(doc,
                        {"capacity_kwh", "charge_rate_kw", "efficiency",
                         "consumption_kwh_per_100mi", "target_soc_percent"},
                        "battery");
    BatterySpec battery;
    read_field(doc, "capacity_kwh", battery.capacity_kwh);
    read_field(doc, "charge_rate_kw", battery.charge_rate_kw);
    read_field(doc, "efficiency", battery.efficiency);
    read_field(doc, "consumption_kwh_per_100mi", battery.consumption_kwh_per_100mi);
    read_field(doc, "target_soc_percent", battery.target_soc_percent);
    if (!(battery.capacity_kwh > 0.0) || !(battery.charge_rate_kw > 0.0) ||
        !(battery.consumption_kwh_per_100mi > 0.0))
        throw ConfigError("config: battery parameters must be positive");
    if (!(battery.efficiency > 0.0 && battery.efficiency <= 1.0))
        throw ConfigError("config: battery efficiency must be in (0, 1]");
    if (!(battery.target_soc_percent > 0.0 && battery.target_soc_percent <= 100.0))
        throw ConfigError("config: target SoC must be in (0, 100]");
    return battery;
}

MileageModel parse_mileage(const nlohmann::json& doc, const BatterySpec& battery) {
    reject_unknown_keys(doc, {"log_mean", "log_sd", "cap_miles"}, "mileage");
    MileageModel mileage;
    mileage.cap_miles = full_range_miles(battery);
    read_field(doc, "log_mean", mileage.log_mean);
    read_field(doc, "log_sd", mileage.log_sd);
    read_field(doc, "cap_miles", mileage.cap_miles);
    if (!(mileage.log_sd >= 0.0)) throw ConfigError("config: log_sd must be >= 0");
    if (!(mileage.cap_miles > 0.0)) throw ConfigError("config: cap_miles must be > 0");
    return mileage;
}

}  // namespace

RunConfig parse_config(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("config: document must be a JSON object");
    reject_unknown_keys(doc,
                        {"seed", "intensity", "battery", "mileage", "em",
                         "step_minutes", "replications", "with_ev", "timings",
                         "out_dir", "load_csv"},
                        "the top level");
    RunConfig config;
    try {
        if (auto it = doc.find("seed"); it != doc.end()) {
            config.seed = it->get<std::uint64_t>();
            config.seed_set = true;
        }
        if (auto it = doc.find("battery"); it != doc.end())
            config.battery = parse_battery(*it);
        config.mileage = parse_mileage(doc.value("mileage", nlohmann::json::object()),
                                       config.battery);
        if (auto it = doc.find("intensity"); it != doc.end()) {
            if (it->is_string()) {
                if (it->get<std::string>() != "daily_schedule")
                    throw ConfigError(
                        "config: intensity must be \"daily_schedule\" or an object");
                config.intensity_is_daily_schedule = true;
            } else {
                config.intensity_is_daily_schedule = false;
                config.intensity = intensity_from_json(*it);
            }
        }
        if (auto it = doc.find("em"); it != doc.end()) {
            reject_unknown_keys(*it, {"m", "m_range", "epsilon", "max_iterations"}, "em");
            read_field(*it, "m", config.em_m);
            if (auto range = it->find("m_range"); range != it->end()) {
                const auto values = range->get<std::vector<int>>();
                if (values.size() != 2)
                    throw ConfigError("config: m_range must be [low, high]");
                config.em_m_min = values[0];
                config.em_m_max = values[1];
            }
            read_field(*it, "epsilon", config.em_epsilon);
            read_field(*it, "max_iterations", config.em_max_iterations);
        }
        read_field(doc, "step_minutes", config.step_minutes);
        read_field(doc, "replications", config.replications);
        read_field(doc, "with_ev", config.with_ev);
        read_field(doc, "timings", config.timings);
        read_field(doc, "out_dir", config.out_dir);
        read_field(doc, "load_csv", config.load_csv);
    } catch (const nlohmann::json::exception& err) {
        throw ConfigError(std::string("config: ") + err.what());
    } catch (const std::invalid_argument& err) {
        throw ConfigError(std::string("config: ") + err.what());
    }

    if (config.em_m < 0 || (config.em_m_min < 0 || config.em_m_max < config.em_m_min))
        throw ConfigError("config: invalid mixture order settings");
    if (!(config.em_epsilon > 0.0))
        throw ConfigError("config: epsilon must be > 0");
    if (config.em_max_iterations < 0)
        throw ConfigError("config: max_iterations must be >= 0");
    if (config.step_minutes <= 0 || (24 * 60) % config.step_minutes != 0)
        throw ConfigError("config: step_minutes must divide 24 h");
    if (config.replications < 1)
        throw ConfigError("config: replications must be >= 1");
    return config;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::exception& err) {
        throw ConfigError(path + ": " + err.what());
    }
    return parse_config(doc);
}

void apply_seed_env(RunConfig& config, const char* env_value) {
    if (config.seed_set || env_value == nullptr) return;
    std::uint64_t seed = 0;
    const char* last = env_value;
    while (*last != '\0') ++last;
    auto [ptr, ec] = std::from_chars(env_value, last, seed);
    if (ec != std::errc{} || ptr != last)
        throw ConfigError("config: LOADMIX_SEED is not a non-negative integer");
    config.seed = seed;
    config.seed_set = true;
}

nlohmann::json config_to_json(const RunConfig& config) {
    nlohmann::json em{{"epsilon", config.em_epsilon},
                      {"max_iterations", config.em_max_iterations}};
    if (config.em_m > 0) em["m"] = config.em_m;
    if (config.em_m_min > 0) em["m_range"] = {config.em_m_min, config.em_m_max};
    nlohmann::json intensity;
    if (config.intensity_is_daily_schedule)
        intensity = "daily_schedule";
    else
        intensity = intensity_to_json(*config.intensity);
    return nlohmann::json{
        {"seed", config.seed},
        {"intensity", intensity},
        {"battery",
         {{"capacity_kwh", config.battery.capacity_kwh},
          {"charge_rate_kw", config.battery.charge_rate_kw},
          {"efficiency", config.battery.efficiency},
          {"consumption_kwh_per_100mi", config.battery.consumption_kwh_per_100mi},
          {"target_soc_percent", config.battery.target_soc_percent}}},
        {"mileage",
         {{"log_mean", config.mileage.log_mean},
          {"log_sd", config.mileage.log_sd},
          {"cap_miles", config.mileage.cap_miles}}},
        {"em", em},
        {"step_minutes", config.step_minutes},
        {"replications", config.replications},
        {"with_ev", config.with_ev},
        {"timings", config.timings},
        {"out_dir", config.out_dir},
        {"load_csv", config.load_csv}};
}

std::string config_hash(const RunConfig& config) {
    // The hash identifies the generative parameters; where the results land
    // is not one of them, so two runs that differ only in output directory
    // share a hash.
    nlohmann::json canonical_doc = config_to_json(config);
    canonical_doc.erase("out_dir");
    const std::string canonical = canonical_doc.dump();
    std::uint64_t hash = 14695981039346656037ull;
    for (unsigned char byte : canonical) {
        hash ^= byte;
        hash *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

}  // namespace loadmix
