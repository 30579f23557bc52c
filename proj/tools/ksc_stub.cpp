// Stand-in solver for the external file protocol.
//
//   ksc_stub <mode> <params.txt> <dir> [arg]
//
// Reads the parameter line, writes <dir>/qoi.bin. Modes:
//   gfunction      g-function of the parameters
//   constant C     the value C
//   smooth         prod_d exp(c_d y_d), c_d = 0.3, 0.2, 0.1, 0.1, ...
//   field M        M values, entry j equal to (j + 1) * g(y)
//   sleep S        sleep S seconds, then behave like gfunction
//   fail           exit with status 3 and write nothing
//   nan            write a single NaN
//   short          header announces two values, payload holds one
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ksc/external.hpp"
#include "ksc/models.hpp"

namespace {

double smooth_coefficient(Eigen::Index d) {
    static constexpr double c[] = {0.3, 0.2};
    return d < 2 ? c[d] : 0.1;
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 4) {
        std::cerr << "usage: ksc_stub <mode> <params.txt> <dir> [arg]\n";
        return 2;
    }
    const std::string mode = argv[1];
    const std::string arg = argc > 4 ? argv[4] : "";

    std::ifstream in(argv[2]);
    std::vector<double> values;
    for (double v; in >> v;) values.push_back(v);
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    const std::filesystem::path qoi = std::filesystem::path(argv[3]) / "qoi.bin";

    if (mode == "fail") return 3;
    if (mode == "sleep") std::this_thread::sleep_for(std::chrono::duration<double>(std::atof(arg.c_str())));

    if (mode == "gfunction" || mode == "sleep") {
        ksc::write_qoi(qoi, Eigen::VectorXd::Constant(1, ksc::g_function(y)));
    } else if (mode == "constant") {
        ksc::write_qoi(qoi, Eigen::VectorXd::Constant(1, std::atof(arg.c_str())));
    } else if (mode == "smooth") {
        double f = 1.0;
        for (Eigen::Index d = 0; d < y.size(); ++d) f *= std::exp(smooth_coefficient(d) * y(d));
        ksc::write_qoi(qoi, Eigen::VectorXd::Constant(1, f));
    } else if (mode == "field") {
        const auto m = static_cast<Eigen::Index>(std::atoll(arg.c_str()));
        const double g = ksc::g_function(y);
        ksc::write_qoi(qoi, Eigen::VectorXd::LinSpaced(m, 1.0, static_cast<double>(m)) * g);
    } else if (mode == "nan") {
        ksc::write_qoi(qoi, Eigen::VectorXd::Constant(1, std::nan("")));
    } else if (mode == "short") {
        // Valid header claiming two values, followed by only one.
        ksc::write_qoi(qoi, Eigen::VectorXd::Constant(2, 1.0));
        std::filesystem::resize_file(qoi, 16);
    } else {
        std::cerr << "ksc_stub: unknown mode '" << mode << "'\n";
        return 2;
    }
    return 0;
}
