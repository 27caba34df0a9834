#include "gridtrade/network.hpp"

#include "gridtrade/errors.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace gridtrade {

namespace {

int find_root(std::vector<int>& parent, int v) {
  while (parent[v] != v) {
    parent[v] = parent[parent[v]];
    v = parent[v];
  }
  return v;
}

}  // namespace

void Network::validate() const {
  if (bus_count <= 0) throw StructuralError("network needs at least one bus");
  if (reference_bus < 0 || reference_bus >= bus_count)
    throw StructuralError("reference bus " + std::to_string(reference_bus) + " out of range");
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const Line& l = lines[k];
    const std::string tag = "line " + std::to_string(k);
    if (l.from < 0 || l.from >= bus_count || l.to < 0 || l.to >= bus_count)
      throw StructuralError(tag + ": endpoint out of range");
    if (l.from == l.to) throw StructuralError(tag + ": endpoints must differ");
    if (!(l.reactance > 0.0) || !std::isfinite(l.reactance)) throw StructuralError(tag + ": reactance must be positive");
    if (!(l.capacity > 0.0) || !std::isfinite(l.capacity)) throw StructuralError(tag + ": capacity must be positive");
  }
  for (std::size_t s = 0; s < scenario_capacities.size(); ++s) {
    if (scenario_capacities[s].size() != lines.size())
      throw StructuralError("scenario " + std::to_string(s) + ": capacity override needs one value per line");
    for (double c : scenario_capacities[s])
      if (!(c > 0.0) || !std::isfinite(c)) throw StructuralError("scenario capacities must be positive");
  }
  if (!connected()) throw StructuralError("network graph is disconnected");
}

bool Network::connected() const {
  if (bus_count <= 0) return false;
  std::vector<int> parent(static_cast<std::size_t>(bus_count));
  std::iota(parent.begin(), parent.end(), 0);
  int components = bus_count;
  for (const Line& l : lines) {
    const int a = find_root(parent, l.from);
    const int b = find_root(parent, l.to);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components == 1;
}

bool Network::is_tree() const { return connected() && line_count() == bus_count - 1; }

const Eigen::VectorXd& LoadingMatrix::limits_for(int scenario) const {
  if (scenario >= 0 && static_cast<std::size_t>(scenario) < scenario_limits.size())
    return scenario_limits[static_cast<std::size_t>(scenario)];
  return limits;
}

LoadingMatrix build_loading_matrix(const Network& network) {
  network.validate();
  const int n = network.bus_count;
  const int l_count = network.line_count();
  const int ref = network.reference_bus;

  // Reduced weighted Laplacian with the reference bus removed.
  auto reduced_index = [ref](int bus) { return bus < ref ? bus : bus - 1; };
  Eigen::MatrixXd laplacian = Eigen::MatrixXd::Zero(n - 1, n - 1);
  for (const Line& l : network.lines) {
    const double b = 1.0 / l.reactance;
    if (l.from != ref) laplacian(reduced_index(l.from), reduced_index(l.from)) += b;
    if (l.to != ref) laplacian(reduced_index(l.to), reduced_index(l.to)) += b;
    if (l.from != ref && l.to != ref) {
      laplacian(reduced_index(l.from), reduced_index(l.to)) -= b;
      laplacian(reduced_index(l.to), reduced_index(l.from)) -= b;
    }
  }

  // Angle sensitivities: theta = X p with theta_ref = 0.
  Eigen::MatrixXd angles = Eigen::MatrixXd::Zero(n, n);
  if (n > 1) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(laplacian);
    if (!lu.isInvertible()) throw StructuralError("network graph is disconnected");
    const Eigen::MatrixXd inverse = lu.inverse();
    for (int i = 0; i < n; ++i) {
      if (i == ref) continue;
      for (int j = 0; j < n; ++j) {
        if (j == ref) continue;
        angles(i, j) = inverse(reduced_index(i), reduced_index(j));
      }
    }
  }

  LoadingMatrix lm;
  lm.rows.resize(2 * l_count, n);
  lm.limits.resize(2 * l_count);
  for (int k = 0; k < l_count; ++k) {
    const Line& l = network.lines[static_cast<std::size_t>(k)];
    const Eigen::RowVectorXd row = (angles.row(l.from) - angles.row(l.to)) / l.reactance;
    lm.rows.row(k) = row;
    lm.rows.row(k + l_count) = -row;
    lm.limits[k] = l.capacity;
    lm.limits[k + l_count] = l.capacity;
  }
  for (const auto& caps : network.scenario_capacities) {
    Eigen::VectorXd lim(2 * l_count);
    for (int k = 0; k < l_count; ++k) {
      lim[k] = caps[static_cast<std::size_t>(k)];
      lim[k + l_count] = caps[static_cast<std::size_t>(k)];
    }
    lm.scenario_limits.push_back(std::move(lim));
  }
  return lm;
}

FeasibilityReport check_feasible(const LoadingMatrix& lm, const InjectionMatrix& x, double tol, double balance_tol) {
  if (x.rows() != lm.bus_count())
    throw PreconditionError("injection matrix has " + std::to_string(x.rows()) + " rows, network has " +
                            std::to_string(lm.bus_count()) + " buses");
  FeasibilityReport report;
  for (Eigen::Index s = 0; s < x.cols(); ++s) {
    const int scenario = static_cast<int>(s);
    const Eigen::VectorXd flows = lm.rows * x.col(s);
    const Eigen::VectorXd& limits = lm.limits_for(scenario);
    for (Eigen::Index r = 0; r < flows.size(); ++r) {
      const double excess = flows[r] - limits[r];
      if (excess > tol) report.violations.push_back({static_cast<int>(r), scenario, excess});
    }
    const double balance = x.col(s).sum();
    report.balance_residual.push_back(balance);
    if (std::abs(balance) > balance_tol) report.feasible = false;
  }
  if (!report.violations.empty()) report.feasible = false;
  return report;
}

std::vector<int> binding_lines(const LoadingMatrix& lm, const Eigen::VectorXd& x_s, int scenario, double tol) {
  const Eigen::VectorXd flows = lm.rows * x_s;
  const Eigen::VectorXd& limits = lm.limits_for(scenario);
  std::vector<int> binding;
  for (Eigen::Index r = 0; r < flows.size(); ++r) {
    const double gap = flows[r] - limits[r];
    if (gap > kFeasibilityTol)
      throw PreconditionError("state violates row " + std::to_string(r) + " by " + std::to_string(gap) + " MW");
    if (std::abs(gap) <= tol) binding.push_back(static_cast<int>(r));
  }
  return binding;
}

bool is_feasible_direction(const LoadingMatrix& lm, const InjectionMatrix& x, const InjectionMatrix& q,
                           double binding_tol, double tol) {
  for (Eigen::Index s = 0; s < x.cols(); ++s) {
    for (int r : binding_lines(lm, x.col(s), static_cast<int>(s), binding_tol)) {
      if (lm.rows.row(r).dot(q.col(s)) > tol) return false;
    }
  }
  return true;
}

CurtailmentResult curtailment_factor_scenario(const LoadingMatrix& lm, const Eigen::VectorXd& x_s,
                                              const Eigen::VectorXd& q_s, int scenario, double binding_tol,
                                              double direction_tol) {
  CurtailmentResult result;
  const Eigen::VectorXd& limits = lm.limits_for(scenario);
  const Eigen::VectorXd flows = lm.rows * x_s;
  const Eigen::VectorXd loading = lm.rows * q_s;
  for (Eigen::Index r = 0; r < flows.size(); ++r) {
    const double headroom = limits[r] - flows[r];
    const bool binding = std::abs(headroom) <= binding_tol;
    if (binding) {
      // Loadings within the direction tolerance count as zero so round-off
      // in a proposer's solve does not collapse gamma.
      if (loading[r] <= direction_tol) continue;
      result.gamma = 0.0;
      result.rejected = true;
      result.limiting_row = static_cast<int>(r);
      result.limiting_scenario = scenario;
      return result;
    }
    if (loading[r] <= 0.0) continue;
    const double ratio = std::max(headroom, 0.0) / loading[r];
    if (ratio < result.gamma) {
      result.gamma = ratio;
      result.limiting_row = static_cast<int>(r);
      result.limiting_scenario = scenario;
    }
  }
  if (result.gamma <= 0.0) {
    result.gamma = 0.0;
    result.rejected = true;
  }
  return result;
}

CurtailmentResult curtailment_factor(const LoadingMatrix& lm, const InjectionMatrix& x, const InjectionMatrix& q,
                                     double binding_tol, double direction_tol) {
  if (x.rows() != q.rows() || x.cols() != q.cols())
    throw PreconditionError("state and trade injections differ in shape");
  CurtailmentResult overall;
  for (Eigen::Index s = 0; s < x.cols(); ++s) {
    const CurtailmentResult r =
        curtailment_factor_scenario(lm, x.col(s), q.col(s), static_cast<int>(s), binding_tol, direction_tol);
    if (r.rejected) return r;
    if (r.gamma < overall.gamma) overall = r;
  }
  return overall;
}

}  // namespace gridtrade
