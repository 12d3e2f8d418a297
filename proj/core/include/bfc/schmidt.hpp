#pragma once

#include <functional>
#include <vector>

#include "bfc/comb.hpp"

namespace bfc {

struct SchmidtResult {
  std::vector<double> weights;  // retained lambda_i, descending
  double schmidt_number = 1.0;  // from the full spectrum
  int retained = 0;
};

// SVD of psi * sqrt(cell area). Islands whose signal windows overlap are
// decomposed together; disjoint groups contribute independent modes.
SchmidtResult schmidt_number(const JointSpectrum& jsa, int max_modes = 64);

// Builds the JSA at resolution factors 1 and 2 and checks K moved < 2%.
SchmidtResult schmidt_number_refined(const std::function<JointSpectrum(double)>& build,
                                     int max_modes = 64);

double gbar_from_k(double k, int d);

// Signal Schmidt modes on one axis spanning every island. Columns have unit
// discrete norm sum |u|^2 = 1.
struct SignalModes {
  UniformAxis axis;
  Eigen::MatrixXcd modes;
  std::vector<double> weights;
};
SignalModes signal_modes(const JointSpectrum& jsa, int max_modes = 64);

}  // namespace bfc
