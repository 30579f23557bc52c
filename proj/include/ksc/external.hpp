#ifndef KSC_EXTERNAL_HPP
#define KSC_EXTERNAL_HPP

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <string>

#include <Eigen/Core>

#include "ksc/models.hpp"
#include "ksc/param_space.hpp"

namespace ksc {

// qoi.bin layout: u64 little-endian count M, then M f64 little-endian values.
void write_qoi(const std::filesystem::path& path, const Eigen::Ref<const Eigen::VectorXd>& values);
Eigen::VectorXd read_qoi(const std::filesystem::path& path);

// One line, space separated, 17 significant digits, trailing newline.
std::string format_params(const Eigen::Ref<const Eigen::VectorXd>& y);

// Replaces {params}, {dir} and {index} in a command template.
std::string expand_command(const std::string& tmpl, const std::filesystem::path& params,
                           const std::filesystem::path& dir, std::size_t index);

struct ExternalStats {
    std::size_t launched = 0;
    std::size_t cached = 0;
};

/// Runs a black-box solver once per parameter sample through the file
/// protocol under `<workdir>/samples/<index>/`:
///
///   params.txt  written before launch
///   qoi.bin     written by the solver
///   done        written here after qoi.bin parsed cleanly
///
/// A sample whose directory has `done` and identical params.txt is read back
/// without launching the solver. Launches run under a bounded worker pool;
/// results are ordered by sample index.
class ExternalSolver {
public:
    explicit ExternalSolver(ExternalModel model) : model_(std::move(model)) {}

    const ExternalModel& model() const { return model_; }

    GridField evaluate(const Eigen::Ref<const Eigen::VectorXd>& y, std::size_t sample_index);

    // Rows of the result are samples, columns are output entries.
    Eigen::MatrixXd evaluate_all(const CollocationSet<double>& points, int max_jobs);

    ExternalStats stats() const { return {launched_.load(), cached_.load()}; }

    std::filesystem::path sample_dir(std::size_t sample_index) const;

private:
    ExternalModel model_;
    std::atomic<std::size_t> launched_{0};
    std::atomic<std::size_t> cached_{0};
};

} // namespace ksc

#endif // KSC_EXTERNAL_HPP
