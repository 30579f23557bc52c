#ifndef KSC_CONFIG_HPP
#define KSC_CONFIG_HPP

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "ksc/study.hpp"

namespace ksc {

// Everything a CLI run needs. Relative paths are taken relative to the
// working directory of the process.
struct RunConfig {
    StudyConfig study;
    std::filesystem::path output_dir = "ksc_out";
    std::optional<Eigen::Index> count;
    std::optional<std::string> mean_kernel;
    nlohmann::json source;
};

/// Builds a run configuration from JSON. Every object is checked against its
/// allowed keys; an unknown key raises ConfigError naming its full path,
/// e.g. `kernels[1].epsilno`.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

KernelEntry parse_kernel(const nlohmann::json& node, const std::string& path, int space_dims,
                         const Regularization& default_reg);
Regularization parse_regularization(const nlohmann::json& node, const std::string& path);

nlohmann::json to_json(const Regularization& reg);
nlohmann::json report_to_json(const StudyReport& report, const RunConfig& config);

} // namespace ksc

#endif // KSC_CONFIG_HPP
