#include "ksc/external.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>
#include <vector>

#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "ksc/errors.hpp"

namespace fs = std::filesystem;

namespace ksc {

namespace {

std::array<unsigned char, 8> to_le(std::uint64_t v) {
    std::array<unsigned char, 8> out{};
    for (int i = 0; i < 8; ++i) out[static_cast<std::size_t>(i)] = static_cast<unsigned char>(v >> (8 * i));
    return out;
}

std::uint64_t from_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
        s.replace(pos, from.size(), to);
}

// Quote for /bin/sh.
std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    return out + "'";
}

enum class RunStatus { ok, nonzero_exit, timeout, launch_failed };

struct RunResult {
    RunStatus status;
    int code;
};

RunResult run_shell(const std::string& command, const fs::path& cwd, double timeout_seconds) {
    const pid_t pid = fork();
    if (pid < 0) return {RunStatus::launch_failed, errno};
    if (pid == 0) {
        setpgid(0, 0);
        if (chdir(cwd.c_str()) != 0) _exit(127);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    setpgid(pid, pid);

    const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_seconds);
    auto pause = std::chrono::microseconds(500);
    int status = 0;
    for (;;) {
        const pid_t r = waitpid(pid, &status, WNOHANG);
        if (r == pid) break;
        if (r < 0 && errno != EINTR) return {RunStatus::launch_failed, errno};
        if (std::chrono::steady_clock::now() >= deadline) {
            kill(-pid, SIGKILL);
            kill(pid, SIGKILL);
            waitpid(pid, &status, 0);
            return {RunStatus::timeout, 0};
        }
        std::this_thread::sleep_for(pause);
        pause = std::min(pause * 2, std::chrono::microseconds(50000));
    }
    if (WIFEXITED(status)) {
        const int code = WEXITSTATUS(status);
        return {code == 0 ? RunStatus::ok : RunStatus::nonzero_exit, code};
    }
    return {RunStatus::nonzero_exit, WIFSIGNALED(status) ? 128 + WTERMSIG(status) : -1};
}

} // namespace

void write_qoi(const fs::path& path, const Eigen::Ref<const Eigen::VectorXd>& values) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    const auto count = to_le(static_cast<std::uint64_t>(values.size()));
    out.write(reinterpret_cast<const char*>(count.data()), 8);
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        const auto bytes = to_le(std::bit_cast<std::uint64_t>(values(i)));
        out.write(reinterpret_cast<const char*>(bytes.data()), 8);
    }
    if (!out) throw std::runtime_error("short write to " + path.string());
}

Eigen::VectorXd read_qoi(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::array<unsigned char, 8> buf{};
    if (!in.read(reinterpret_cast<char*>(buf.data()), 8)) throw std::runtime_error(path.string() + ": missing length header");
    const std::uint64_t count = from_le(buf.data());
    std::error_code ec;
    const auto size = fs::file_size(path, ec);
    if (ec || count > (size - 8) / 8) throw std::runtime_error(path.string() + ": file shorter than its length header");
    Eigen::VectorXd values(static_cast<Eigen::Index>(count));
    for (std::uint64_t i = 0; i < count; ++i) {
        in.read(reinterpret_cast<char*>(buf.data()), 8);
        values(static_cast<Eigen::Index>(i)) = std::bit_cast<double>(from_le(buf.data()));
    }
    if (!in) throw std::runtime_error(path.string() + ": truncated payload");
    return values;
}

std::string format_params(const Eigen::Ref<const Eigen::VectorXd>& y) {
    std::string line;
    char buf[32];
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", y(i));
        if (i > 0) line += ' ';
        line += buf;
    }
    return line + "\n";
}

std::string expand_command(const std::string& tmpl, const fs::path& params, const fs::path& dir, std::size_t index) {
    std::string cmd = tmpl;
    replace_all(cmd, "{params}", shell_quote(params.string()));
    replace_all(cmd, "{dir}", shell_quote(dir.string()));
    replace_all(cmd, "{index}", std::to_string(index));
    return cmd;
}

fs::path ExternalSolver::sample_dir(std::size_t sample_index) const {
    return model_.workdir / "samples" / std::to_string(sample_index);
}

GridField ExternalSolver::evaluate(const Eigen::Ref<const Eigen::VectorXd>& y, std::size_t sample_index) {
    using Kind = ExternalSolverError::Kind;
    const fs::path dir = fs::absolute(sample_dir(sample_index));
    const fs::path params = dir / "params.txt";
    const fs::path qoi = dir / "qoi.bin";
    const fs::path done = dir / "done";
    const std::string params_text = format_params(y);

    auto parse = [&]() {
        std::error_code ec;
        if (!fs::exists(qoi, ec)) throw ExternalSolverError(Kind::missing_output, sample_index, "solver wrote no qoi.bin");
        Eigen::VectorXd values;
        try {
            values = read_qoi(qoi);
        } catch (const std::exception& e) {
            throw ExternalSolverError(Kind::short_output, sample_index, e.what());
        }
        if (model_.expected_size > 0 && values.size() != model_.expected_size)
            throw ExternalSolverError(Kind::short_output, sample_index,
                                      "qoi.bin holds " + std::to_string(values.size()) + " values, expected " +
                                          std::to_string(model_.expected_size));
        for (Eigen::Index i = 0; i < values.size(); ++i)
            if (std::isnan(values(i)))
                throw ExternalSolverError(Kind::nan_output, sample_index, "qoi.bin contains NaN at entry " + std::to_string(i));
        return GridField(std::move(values));
    };

    std::error_code ec;
    if (fs::exists(done, ec) && read_text(params) == params_text) {
        GridField cached = parse();
        ++cached_;
        return cached;
    }

    fs::create_directories(dir, ec);
    if (ec) throw ExternalSolverError(Kind::launch, sample_index, "cannot create " + dir.string() + ": " + ec.message());
    fs::remove(done, ec);
    fs::remove(qoi, ec);
    write_text(params, params_text);

    const std::string cmd = expand_command(model_.command, params, dir, sample_index);
    ++launched_;
    const RunResult run = run_shell(cmd, dir, model_.timeout_seconds);
    switch (run.status) {
    case RunStatus::ok: break;
    case RunStatus::launch_failed:
        throw ExternalSolverError(Kind::launch, sample_index, std::string("cannot launch solver: ") + std::strerror(run.code));
    case RunStatus::nonzero_exit:
        throw ExternalSolverError(Kind::nonzero_exit, sample_index, "solver exited with status " + std::to_string(run.code));
    case RunStatus::timeout:
        throw ExternalSolverError(Kind::timeout, sample_index,
                                  "solver exceeded timeout of " + std::to_string(model_.timeout_seconds) + " s");
    }
    GridField field = parse();
    write_text(done, "");
    return field;
}

Eigen::MatrixXd ExternalSolver::evaluate_all(const CollocationSet<double>& points, int max_jobs) {
    const auto n = static_cast<std::size_t>(points.size());
    std::vector<GridField> results(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                results[i] = evaluate(points.point(static_cast<Eigen::Index>(i)), i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };

    const std::size_t jobs = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(max_jobs, 1)), 1, std::max<std::size_t>(n, 1));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    const Eigen::Index m = n == 0 ? model_.expected_size : results.front().size();
    Eigen::MatrixXd table(static_cast<Eigen::Index>(n), m);
    for (std::size_t i = 0; i < n; ++i) {
        if (results[i].size() != m)
            throw ExternalSolverError(ExternalSolverError::Kind::short_output, i,
                                      "output size " + std::to_string(results[i].size()) +
                                          " differs from sample 0 (" + std::to_string(m) + ")");
        table.row(static_cast<Eigen::Index>(i)) = results[i].values().transpose();
    }
    return table;
}

} // namespace ksc
