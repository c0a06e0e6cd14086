// Regenerates the synthetic data sets bundled under data/.
#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "stomem/parameter_table.hpp"
#include "stomem/synthetic.hpp"
#include "stomem/trace_io.hpp"

namespace fs = std::filesystem;
using namespace stomem;

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_synthetic_data OUTPUT_DIR\n";
    return 2;
  }
  const fs::path dir(argv[1]);
  try {
    const BiasParams zero = ParameterTable::builtin().at(0.0);
    const std::vector<double> offsets = log_spaced(0.1, 1e3, 200);

    std::ostringstream set_csv;
    write_trace_csv(set_csv, synthetic_set_trace(zero.set, offsets));
    write_text_file(dir / "synthetic_set_0V.csv", set_csv.str());

    std::ostringstream opt_csv;
    write_trace_csv(opt_csv, synthetic_optical_trace(zero.opt, zero.optical_baseline, offsets));
    write_text_file(dir / "synthetic_optical_0V.csv", opt_csv.str());

    // Photoresponse against initial conductance at the reference power.
    std::ostringstream vs_g0;
    write_points_csv(vs_g0, synthetic_power_law(0.50, 1.0, 0.5, 50.0, 20, kBundledOutliers), "G0_nS,dG_nS");
    write_text_file(dir / "photoresponse_vs_g0.csv", vs_g0.str());

    // Photoresponse against optical power at G0 = 1 nS.
    std::ostringstream vs_power;
    write_points_csv(vs_power, synthetic_power_law(0.52, std::pow(65.0, -0.52), 6.5, 650.0, 20, kBundledOutliers),
                     "P_opt_mWcm2,dG_nS");
    write_text_file(dir / "photoresponse_vs_power.csv", vs_power.str());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
