#include "bfc/schmidt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "bfc/errors.hpp"

namespace bfc {

namespace {

struct Group {
  UniformAxis signal;
  std::vector<std::size_t> members;
};

long long lattice_index(double x, double origin, double h) { return std::llround((x - origin) / h); }

std::vector<Group> group_islands(const JointSpectrum& js) {
  const double h = js.step();
  const double origin = js.islands.front().signal.start;
  std::vector<std::size_t> order(js.islands.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return js.islands[a].signal.start < js.islands[b].signal.start;
  });
  std::vector<Group> groups;
  long long cur_hi = 0;
  for (std::size_t idx : order) {
    const auto& ax = js.islands[idx].signal;
    long long lo = lattice_index(ax.start, origin, h);
    long long hi = lo + static_cast<long long>(ax.size) - 1;
    if (groups.empty() || lo > cur_hi) {
      groups.push_back({ax, {idx}});
      cur_hi = hi;
    } else {
      groups.back().members.push_back(idx);
      cur_hi = std::max(cur_hi, hi);
    }
    auto& g = groups.back();
    long long glo = lattice_index(g.signal.start, origin, h);
    g.signal.start = origin + static_cast<double>(std::min(glo, lo)) * h;
    g.signal.size = static_cast<std::size_t>(cur_hi - std::min(glo, lo) + 1);
    g.signal.step = h;
  }
  return groups;
}

// Weighted amplitude of one group: union signal rows, concatenated idler columns.
Eigen::MatrixXcd group_matrix(const JointSpectrum& js, const Group& g) {
  const double h = js.step();
  Eigen::Index cols = 0;
  for (auto m : g.members) cols += static_cast<Eigen::Index>(js.islands[m].idler.size);
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(g.signal.size), cols);
  Eigen::Index c0 = 0;
  for (auto m : g.members) {
    const auto& isl = js.islands[m];
    auto r0 = static_cast<Eigen::Index>(lattice_index(isl.signal.start, g.signal.start, h));
    a.block(r0, c0, isl.amplitude.rows(), isl.amplitude.cols()) =
        isl.amplitude * std::sqrt(isl.signal.step * isl.idler.step);
    c0 += isl.amplitude.cols();
  }
  return a;
}

struct Decomposition {
  std::vector<double> sv2;  // squared singular values, all groups
  std::vector<std::pair<std::size_t, Eigen::Index>> owner;
  std::vector<Eigen::MatrixXcd> u;
  std::vector<Group> groups;
};

Decomposition decompose(const JointSpectrum& js, bool want_modes) {
  js.validate();
  Decomposition d;
  d.groups = group_islands(js);
  for (std::size_t gi = 0; gi < d.groups.size(); ++gi) {
    Eigen::MatrixXcd a = group_matrix(js, d.groups[gi]);
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(a, want_modes ? Eigen::ComputeThinU : 0);
    const auto& s = svd.singularValues();
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      d.sv2.push_back(s(i) * s(i));
      d.owner.emplace_back(gi, i);
    }
    if (want_modes) d.u.push_back(svd.matrixU());
  }
  return d;
}

std::vector<std::size_t> descending(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  return idx;
}

SchmidtResult summarize(const std::vector<double>& sv2, int max_modes) {
  double total = std::accumulate(sv2.begin(), sv2.end(), 0.0);
  if (!(total > 0.0)) throw InvalidParameter("schmidt: joint spectrum has zero norm");
  SchmidtResult r;
  double purity = 0.0;
  for (double x : sv2) purity += (x / total) * (x / total);
  r.schmidt_number = 1.0 / purity;
  double cum = 0.0;
  for (std::size_t i : descending(sv2)) {
    if (cum >= 0.999 || static_cast<int>(r.weights.size()) >= max_modes) break;
    double lam = sv2[i] / total;
    r.weights.push_back(lam);
    cum += lam;
  }
  r.retained = static_cast<int>(r.weights.size());
  return r;
}

}  // namespace

SchmidtResult schmidt_number(const JointSpectrum& jsa, int max_modes) {
  if (max_modes < 1) throw InvalidParameter("schmidt: max_modes must be >= 1");
  return summarize(decompose(jsa, false).sv2, max_modes);
}

SchmidtResult schmidt_number_refined(const std::function<JointSpectrum(double)>& build,
                                     int max_modes) {
  SchmidtResult coarse = schmidt_number(build(1.0), max_modes);
  SchmidtResult fine = schmidt_number(build(2.0), max_modes);
  double change = std::abs(fine.schmidt_number / coarse.schmidt_number - 1.0);
  if (change > 0.02) {
    std::ostringstream os;
    os << "schmidt: K changed by " << change * 100.0 << "% on grid refinement";
    throw ResolutionError(os.str());
  }
  return fine;
}

double gbar_from_k(double k, int d) {
  if (!(k >= 1.0) || d < 1) throw InvalidParameter("gbar_from_k: need k >= 1 and d >= 1");
  return 1.0 + 1.0 / (static_cast<double>(d) * k);
}

SignalModes signal_modes(const JointSpectrum& jsa, int max_modes) {
  if (max_modes < 1) throw InvalidParameter("signal_modes: max_modes must be >= 1");
  Decomposition d = decompose(jsa, true);
  const double h = jsa.step();
  SignalModes out;
  double lo = d.groups.front().signal.start, hi = lo;
  for (const auto& g : d.groups) {
    lo = std::min(lo, g.signal.start);
    hi = std::max(hi, g.signal.back());
  }
  out.axis = {lo, h, static_cast<std::size_t>(std::llround((hi - lo) / h)) + 1};
  double total = std::accumulate(d.sv2.begin(), d.sv2.end(), 0.0);
  std::vector<std::size_t> pick;
  double cum = 0.0;
  for (std::size_t i : descending(d.sv2)) {
    if (cum >= 0.999 || static_cast<int>(pick.size()) >= max_modes) break;
    pick.push_back(i);
    cum += d.sv2[i] / total;
  }
  out.modes = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(out.axis.size),
                                     static_cast<Eigen::Index>(pick.size()));
  for (std::size_t c = 0; c < pick.size(); ++c) {
    auto [gi, col] = d.owner[pick[c]];
    const auto& g = d.groups[gi];
    auto r0 = static_cast<Eigen::Index>(lattice_index(g.signal.start, lo, h));
    out.modes.col(static_cast<Eigen::Index>(c)).segment(r0, d.u[gi].rows()) = d.u[gi].col(col);
    out.weights.push_back(d.sv2[pick[c]] / total);
  }
  return out;
}

}  // namespace bfc
