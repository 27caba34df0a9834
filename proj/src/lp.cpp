#include "gridtrade/lp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gridtrade::lp {

std::string to_string(Status status) {
  switch (status) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

void LinearProgram::validate() const {
  const Eigen::Index n = objective.size();
  auto fail = [](const std::string& what) { throw std::invalid_argument("LinearProgram: " + what); };
  if (lower.size() != n || upper.size() != n) fail("bound vectors must match the objective length");
  if (eq_matrix.rows() != eq_rhs.size()) fail("equality rows and rhs differ in length");
  if (ineq_matrix.rows() != ineq_rhs.size()) fail("inequality rows and rhs differ in length");
  if (eq_matrix.rows() > 0 && eq_matrix.cols() != n) fail("equality matrix has the wrong column count");
  if (ineq_matrix.rows() > 0 && ineq_matrix.cols() != n) fail("inequality matrix has the wrong column count");
  if (!objective.allFinite() || !eq_matrix.allFinite() || !ineq_matrix.allFinite() ||
      !eq_rhs.allFinite() || !ineq_rhs.allFinite())
    fail("coefficients must be finite");
  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::isnan(lower[j]) || std::isnan(upper[j])) fail("NaN bound");
    if (lower[j] > upper[j]) fail("lower bound exceeds upper bound for variable " + std::to_string(j));
    if (lower[j] == kInfinity || upper[j] == -kInfinity) fail("bound excludes every finite value");
  }
}

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kOptimalityTol = 1e-9;
constexpr double kDriveOutTol = 1e-7;
constexpr int kRefactorInterval = 64;
constexpr int kDegenerateLimit = 40;

// Map from a general-form variable onto standard-form columns.
//   shifted:   x = offset + z
//   reflected: x = offset - z
//   free:      x = z - z_neg
enum class VarKind { shifted, reflected, free };

struct VarMap {
  VarKind kind = VarKind::shifted;
  int col = -1;
  int col_neg = -1;
  double offset = 0.0;
};

enum class RowOrigin { equality, inequality, bound };

struct RowInfo {
  RowOrigin origin = RowOrigin::equality;
  int index = 0;
  double sign = 1.0;
};

// min c'z  s.t.  A z = b,  z >= 0,  b >= 0
struct StandardForm {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  std::vector<VarMap> vars;
  std::vector<RowInfo> rows;
  std::vector<int> natural_basis;
};

StandardForm to_standard_form(const LinearProgram& lp) {
  const int n = static_cast<int>(lp.variable_count());
  const int m_eq = static_cast<int>(lp.eq_rhs.size());
  const int m_ineq = static_cast<int>(lp.ineq_rhs.size());
  const double obj_sign = lp.sense == Sense::minimize ? 1.0 : -1.0;

  StandardForm sf;
  sf.vars.resize(n);
  int cols = 0;
  std::vector<int> bounded;
  for (int j = 0; j < n; ++j) {
    const double lo = lp.lower[j];
    const double hi = lp.upper[j];
    VarMap& v = sf.vars[j];
    if (std::isfinite(lo)) {
      v.kind = VarKind::shifted;
      v.offset = lo;
      v.col = cols++;
      if (std::isfinite(hi)) bounded.push_back(j);
    } else if (std::isfinite(hi)) {
      v.kind = VarKind::reflected;
      v.offset = hi;
      v.col = cols++;
    } else {
      v.kind = VarKind::free;
      v.col = cols++;
      v.col_neg = cols++;
    }
  }
  const int m_bound = static_cast<int>(bounded.size());
  const int m = m_eq + m_ineq + m_bound;
  const int n_std = cols + m_ineq + m_bound;

  sf.a = Eigen::MatrixXd::Zero(m, n_std);
  sf.b = Eigen::VectorXd::Zero(m);
  sf.c = Eigen::VectorXd::Zero(n_std);
  sf.rows.resize(m);
  sf.natural_basis.assign(m, -1);

  auto place_row = [&](int r, const Eigen::Ref<const Eigen::RowVectorXd>& coeffs, double rhs) {
    for (int j = 0; j < n; ++j) {
      const double a = coeffs[j];
      if (a == 0.0) continue;
      const VarMap& v = sf.vars[j];
      switch (v.kind) {
        case VarKind::shifted:
          sf.a(r, v.col) += a;
          rhs -= a * v.offset;
          break;
        case VarKind::reflected:
          sf.a(r, v.col) -= a;
          rhs -= a * v.offset;
          break;
        case VarKind::free:
          sf.a(r, v.col) += a;
          sf.a(r, v.col_neg) -= a;
          break;
      }
    }
    sf.b[r] = rhs;
  };

  int r = 0;
  for (int i = 0; i < m_eq; ++i, ++r) {
    place_row(r, lp.eq_matrix.row(i), lp.eq_rhs[i]);
    sf.rows[r] = {RowOrigin::equality, i, 1.0};
  }
  for (int i = 0; i < m_ineq; ++i, ++r) {
    place_row(r, lp.ineq_matrix.row(i), lp.ineq_rhs[i]);
    const int slack = cols + i;
    sf.a(r, slack) = 1.0;
    sf.rows[r] = {RowOrigin::inequality, i, 1.0};
    sf.natural_basis[r] = slack;
  }
  for (int k = 0; k < m_bound; ++k, ++r) {
    const int j = bounded[k];
    const int slack = cols + m_ineq + k;
    sf.a(r, sf.vars[j].col) = 1.0;
    sf.a(r, slack) = 1.0;
    sf.b[r] = lp.upper[j] - lp.lower[j];
    sf.rows[r] = {RowOrigin::bound, j, 1.0};
    sf.natural_basis[r] = slack;
  }

  for (int i = 0; i < m; ++i) {
    if (sf.b[i] < 0.0) {
      sf.a.row(i) *= -1.0;
      sf.b[i] = -sf.b[i];
      sf.rows[i].sign = -1.0;
      sf.natural_basis[i] = -1;
    }
  }

  for (int j = 0; j < n; ++j) {
    const VarMap& v = sf.vars[j];
    const double cj = obj_sign * lp.objective[j];
    switch (v.kind) {
      case VarKind::shifted: sf.c[v.col] = cj; break;
      case VarKind::reflected: sf.c[v.col] = -cj; break;
      case VarKind::free:
        sf.c[v.col] = cj;
        sf.c[v.col_neg] = -cj;
        break;
    }
  }
  return sf;
}

// Dense tableau over the rows that survive redundancy elimination. The
// tableau is periodically rebuilt from the original columns so pivot error
// cannot accumulate.
class Simplex {
 public:
  Simplex(Eigen::MatrixXd a, Eigen::VectorXd b) : a_(std::move(a)), b_(std::move(b)) {
    active_rows_.resize(a_.rows());
    for (Eigen::Index i = 0; i < a_.rows(); ++i) active_rows_[i] = static_cast<int>(i);
  }

  enum class Outcome { optimal, unbounded, stalled };

  // Sets up phase 1 with artificials where no natural slack is available.
  void start_phase_one(const std::vector<int>& natural_basis) {
    const Eigen::Index m = a_.rows();
    const Eigen::Index n = a_.cols();
    std::vector<int> artificial_rows;
    for (Eigen::Index i = 0; i < m; ++i)
      if (natural_basis[i] < 0) artificial_rows.push_back(static_cast<int>(i));
    structural_cols_ = static_cast<int>(n);
    Eigen::MatrixXd ext = Eigen::MatrixXd::Zero(m, n + static_cast<Eigen::Index>(artificial_rows.size()));
    ext.leftCols(n) = a_;
    basis_.assign(m, -1);
    for (Eigen::Index i = 0; i < m; ++i) basis_[i] = natural_basis[i];
    for (std::size_t k = 0; k < artificial_rows.size(); ++k) {
      const int col = static_cast<int>(n + static_cast<Eigen::Index>(k));
      ext(artificial_rows[k], col) = 1.0;
      basis_[artificial_rows[k]] = col;
    }
    a_ = std::move(ext);
    t_ = a_;
    rhs_ = b_;
  }

  double artificial_mass() const {
    double total = 0.0;
    for (std::size_t i = 0; i < basis_.size(); ++i)
      if (basis_[i] >= structural_cols_) total += std::max(0.0, rhs_[static_cast<Eigen::Index>(i)]);
    return total;
  }

  Outcome iterate(const Eigen::VectorXd& cost, int column_limit, int& iterations, int max_iterations) {
    int degenerate_run = 0;
    int since_refactor = 0;
    while (true) {
      if (iterations >= max_iterations) return Outcome::stalled;
      if (since_refactor >= kRefactorInterval) {
        if (!refactor()) return Outcome::stalled;
        since_refactor = 0;
      }
      const Eigen::VectorXd reduced = reduced_costs(cost, column_limit);
      const bool bland = degenerate_run > kDegenerateLimit;
      int entering = -1;
      double best = -kOptimalityTol;
      for (int j = 0; j < column_limit; ++j) {
        if (reduced[j] < best) {
          entering = j;
          if (bland) break;
          best = reduced[j];
        }
      }
      if (entering < 0) return Outcome::optimal;

      int leaving = -1;
      double best_ratio = kInfinity;
      for (Eigen::Index i = 0; i < t_.rows(); ++i) {
        const double coef = t_(i, entering);
        if (coef <= kPivotTol) continue;
        const double ratio = std::max(0.0, rhs_[i]) / coef;
        if (leaving < 0 || ratio < best_ratio - 1e-12) {
          leaving = static_cast<int>(i);
          best_ratio = ratio;
        } else if (ratio <= best_ratio + 1e-12) {
          const bool prefer = bland ? basis_[i] < basis_[leaving] : coef > t_(leaving, entering);
          if (prefer) {
            leaving = static_cast<int>(i);
            best_ratio = std::min(best_ratio, ratio);
          }
        }
      }
      if (leaving < 0) return Outcome::unbounded;
      degenerate_run = best_ratio <= 1e-12 ? degenerate_run + 1 : 0;
      pivot(leaving, entering);
      ++iterations;
      ++since_refactor;
    }
  }

  // Replaces artificial basics by structural columns; rows where that is
  // impossible are linearly dependent and are removed.
  void drive_out_artificials() {
    for (Eigen::Index i = 0; i < t_.rows();) {
      if (basis_[i] < structural_cols_) {
        ++i;
        continue;
      }
      int best = -1;
      double best_abs = kDriveOutTol;
      for (int j = 0; j < structural_cols_; ++j) {
        const double v = std::abs(t_(i, j));
        if (v > best_abs && !is_basic(j)) {
          best = j;
          best_abs = v;
        }
      }
      if (best >= 0) {
        pivot(static_cast<int>(i), best);
        ++i;
      } else {
        // The artificial may sit in a different tableau row than the
        // constraint it was created for; that constraint is the dependent one.
        Eigen::Index origin = 0;
        a_.col(basis_[i]).cwiseAbs().maxCoeff(&origin);
        remove_row(i, origin);
      }
    }
    a_.conservativeResize(Eigen::NoChange, structural_cols_);
    t_.conservativeResize(Eigen::NoChange, structural_cols_);
    refactor();
  }

  // Recomputes the tableau from the original data for the current basis.
  bool refactor() {
    const Eigen::Index m = t_.rows();
    if (m == 0) return true;
    Eigen::MatrixXd basis_matrix(m, m);
    for (Eigen::Index k = 0; k < m; ++k) basis_matrix.col(k) = a_.col(basis_[k]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(basis_matrix);
    if (!lu.isInvertible()) return false;
    t_ = lu.solve(a_);
    rhs_ = lu.solve(b_);
    return t_.allFinite() && rhs_.allFinite();
  }

  // Basic solution and simplex multipliers from a fresh factorization.
  bool basic_solution(const Eigen::VectorXd& cost, Eigen::VectorXd& z, Eigen::VectorXd& duals) const {
    const Eigen::Index m = t_.rows();
    z = Eigen::VectorXd::Zero(a_.cols());
    duals = Eigen::VectorXd::Zero(m);
    if (m == 0) return true;
    Eigen::MatrixXd basis_matrix(m, m);
    Eigen::VectorXd cost_b(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      basis_matrix.col(k) = a_.col(basis_[k]);
      cost_b[k] = cost[basis_[k]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(basis_matrix);
    if (!lu.isInvertible()) return false;
    const Eigen::VectorXd zb = lu.solve(b_);
    for (Eigen::Index k = 0; k < m; ++k) z[basis_[k]] = zb[k];
    duals = basis_matrix.transpose().fullPivLu().solve(cost_b);
    return z.allFinite() && duals.allFinite();
  }

  const std::vector<int>& active_rows() const { return active_rows_; }
  const Eigen::MatrixXd& columns() const { return a_; }

 private:
  Eigen::VectorXd reduced_costs(const Eigen::VectorXd& cost, int column_limit) const {
    Eigen::VectorXd cb(t_.rows());
    for (Eigen::Index i = 0; i < t_.rows(); ++i) cb[i] = cost[basis_[i]];
    Eigen::VectorXd d = cost.head(column_limit);
    if (t_.rows() > 0) d.noalias() -= t_.leftCols(column_limit).transpose() * cb;
    for (int b : basis_)
      if (b < column_limit) d[b] = 0.0;
    return d;
  }

  void pivot(int row, int col) {
    const double p = t_(row, col);
    t_.row(row) /= p;
    rhs_[row] /= p;
    for (Eigen::Index i = 0; i < t_.rows(); ++i) {
      if (i == row) continue;
      const double f = t_(i, col);
      if (f == 0.0) continue;
      t_.row(i) -= f * t_.row(row);
      rhs_[i] -= f * rhs_[row];
      t_(i, col) = 0.0;
    }
    basis_[row] = col;
  }

  bool is_basic(int col) const { return std::find(basis_.begin(), basis_.end(), col) != basis_.end(); }

  // Drops tableau row i and original constraint row origin.
  void remove_row(Eigen::Index i, Eigen::Index origin) {
    auto drop = [](Eigen::MatrixXd& m, Eigen::Index i) {
      const Eigen::Index tail = m.rows() - i - 1;
      if (tail > 0) m.middleRows(i, tail) = m.bottomRows(tail).eval();
      m.conservativeResize(m.rows() - 1, Eigen::NoChange);
    };
    auto drop_vec = [](Eigen::VectorXd& v, Eigen::Index i) {
      const Eigen::Index tail = v.size() - i - 1;
      if (tail > 0) v.segment(i, tail) = v.tail(tail).eval();
      v.conservativeResize(v.size() - 1);
    };
    drop(t_, i);
    drop(a_, origin);
    drop_vec(rhs_, i);
    drop_vec(b_, origin);
    basis_.erase(basis_.begin() + i);
    active_rows_.erase(active_rows_.begin() + origin);
  }

  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
  Eigen::MatrixXd t_;
  Eigen::VectorXd rhs_;
  std::vector<int> basis_;
  std::vector<int> active_rows_;
  int structural_cols_ = 0;
};

}  // namespace

LpSolution solve(const LinearProgram& program) {
  program.validate();
  const StandardForm sf = to_standard_form(program);
  const int n_std = static_cast<int>(sf.a.cols());
  const int m = static_cast<int>(sf.a.rows());
  const int max_iterations = 200 + 50 * (m + n_std);

  LpSolution out;
  Simplex simplex(sf.a, sf.b);
  simplex.start_phase_one(sf.natural_basis);

  int iterations = 0;
  const int total_cols = static_cast<int>(simplex.columns().cols());
  Eigen::VectorXd phase_one_cost = Eigen::VectorXd::Zero(total_cols);
  phase_one_cost.tail(total_cols - n_std).setOnes();
  auto outcome = simplex.iterate(phase_one_cost, total_cols, iterations, max_iterations);
  out.iterations = iterations;
  if (outcome == Simplex::Outcome::stalled) return out;
  const double scale = 1.0 + (sf.b.size() ? sf.b.cwiseAbs().maxCoeff() : 0.0);
  if (simplex.artificial_mass() > 1e-7 * scale) {
    out.status = Status::infeasible;
    return out;
  }
  simplex.drive_out_artificials();

  Eigen::VectorXd z;
  Eigen::VectorXd multipliers;
  bool certified = false;
  for (int round = 0; round < 6 && !certified; ++round) {
    outcome = simplex.iterate(sf.c, n_std, iterations, max_iterations);
    out.iterations = iterations;
    if (outcome == Simplex::Outcome::unbounded) {
      out.status = Status::unbounded;
      return out;
    }
    if (outcome == Simplex::Outcome::stalled) return out;
    if (!simplex.basic_solution(sf.c, z, multipliers)) return out;
    const Eigen::MatrixXd& cols = simplex.columns();
    const Eigen::VectorXd reduced = sf.c - cols.transpose() * multipliers;
    const double primal_scale = 1e-9 * scale;
    const double dual_scale = 1e-9 * (1.0 + sf.c.cwiseAbs().maxCoeff());
    certified = (z.size() == 0 || z.minCoeff() >= -primal_scale) &&
                (reduced.size() == 0 || reduced.minCoeff() >= -dual_scale);
    if (!certified && !simplex.refactor()) return out;
  }
  if (!certified) return out;
  z = z.cwiseMax(0.0);

  const Eigen::Index n = program.variable_count();
  out.primal.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const VarMap& v = sf.vars[j];
    switch (v.kind) {
      case VarKind::shifted: out.primal[j] = v.offset + z[v.col]; break;
      case VarKind::reflected: out.primal[j] = v.offset - z[v.col]; break;
      case VarKind::free: out.primal[j] = z[v.col] - z[v.col_neg]; break;
    }
  }

  const double obj_sign = program.sense == Sense::minimize ? 1.0 : -1.0;
  out.eq_duals = Eigen::VectorXd::Zero(program.eq_rhs.size());
  out.ineq_duals = Eigen::VectorXd::Zero(program.ineq_rhs.size());
  const auto& active = simplex.active_rows();
  for (std::size_t k = 0; k < active.size(); ++k) {
    const RowInfo& row = sf.rows[active[k]];
    const double y = obj_sign * row.sign * multipliers[static_cast<Eigen::Index>(k)];
    if (row.origin == RowOrigin::equality) out.eq_duals[row.index] = y;
    if (row.origin == RowOrigin::inequality) out.ineq_duals[row.index] = y;
  }
  out.reduced_costs = program.objective;
  if (program.eq_rhs.size() > 0) out.reduced_costs -= program.eq_matrix.transpose() * out.eq_duals;
  if (program.ineq_rhs.size() > 0) out.reduced_costs -= program.ineq_matrix.transpose() * out.ineq_duals;
  out.objective = program.objective.dot(out.primal);
  out.status = Status::optimal;
  return out;
}

KktResiduals kkt_residuals(const LinearProgram& lp, const LpSolution& sol) {
  KktResiduals res;
  const Eigen::Index n = lp.variable_count();
  const double dir = lp.sense == Sense::maximize ? 1.0 : -1.0;

  if (lp.eq_rhs.size() > 0) {
    const Eigen::VectorXd r = lp.eq_matrix * sol.primal - lp.eq_rhs;
    res.primal_infeasibility = std::max(res.primal_infeasibility, r.cwiseAbs().maxCoeff());
  }
  double dual_objective = 0.0;
  if (lp.eq_rhs.size() > 0) dual_objective += lp.eq_rhs.dot(sol.eq_duals);
  if (lp.ineq_rhs.size() > 0) {
    const Eigen::VectorXd slack = lp.ineq_rhs - lp.ineq_matrix * sol.primal;
    for (Eigen::Index i = 0; i < slack.size(); ++i) {
      res.primal_infeasibility = std::max(res.primal_infeasibility, -slack[i]);
      res.dual_infeasibility = std::max(res.dual_infeasibility, -dir * sol.ineq_duals[i]);
      res.complementarity = std::max(res.complementarity, std::abs(sol.ineq_duals[i] * slack[i]));
    }
    dual_objective += lp.ineq_rhs.dot(sol.ineq_duals);
  }
  const Eigen::VectorXd stationarity = lp.objective -
      (lp.eq_rhs.size() ? Eigen::VectorXd(lp.eq_matrix.transpose() * sol.eq_duals) : Eigen::VectorXd::Zero(n)) -
      (lp.ineq_rhs.size() ? Eigen::VectorXd(lp.ineq_matrix.transpose() * sol.ineq_duals) : Eigen::VectorXd::Zero(n)) -
      sol.reduced_costs;
  if (n > 0) res.dual_infeasibility = std::max(res.dual_infeasibility, stationarity.cwiseAbs().maxCoeff());

  for (Eigen::Index j = 0; j < n; ++j) {
    const double x = sol.primal[j];
    const double lo = lp.lower[j];
    const double hi = lp.upper[j];
    if (std::isfinite(lo)) res.primal_infeasibility = std::max(res.primal_infeasibility, lo - x);
    if (std::isfinite(hi)) res.primal_infeasibility = std::max(res.primal_infeasibility, x - hi);
    // For a maximization a positive reduced cost pushes against the upper
    // bound; for a minimization against the lower bound.
    const double r = dir * sol.reduced_costs[j];
    if (r > 0.0) {
      const double bound = lp.sense == Sense::maximize ? hi : lo;
      if (!std::isfinite(bound)) {
        res.dual_infeasibility = std::max(res.dual_infeasibility, r);
      } else {
        res.complementarity = std::max(res.complementarity, std::abs(r * (x - bound)));
        dual_objective += sol.reduced_costs[j] * bound;
      }
    } else if (r < 0.0) {
      const double bound = lp.sense == Sense::maximize ? lo : hi;
      if (!std::isfinite(bound)) {
        res.dual_infeasibility = std::max(res.dual_infeasibility, -r);
      } else {
        res.complementarity = std::max(res.complementarity, std::abs(r * (x - bound)));
        dual_objective += sol.reduced_costs[j] * bound;
      }
    }
  }
  res.duality_gap = std::abs(sol.objective - dual_objective);
  return res;
}

int ProgramBuilder::add_variable(double lower, double upper, double cost) {
  costs_.push_back(cost);
  lower_.push_back(lower);
  upper_.push_back(upper);
  return static_cast<int>(costs_.size()) - 1;
}

void ProgramBuilder::set_cost(int variable, double cost) { costs_.at(static_cast<std::size_t>(variable)) = cost; }

int ProgramBuilder::add_equality(const Terms& terms, double rhs) {
  eq_rows_.push_back(terms);
  eq_rhs_.push_back(rhs);
  return static_cast<int>(eq_rhs_.size()) - 1;
}

int ProgramBuilder::add_inequality(const Terms& terms, double rhs) {
  ineq_rows_.push_back(terms);
  ineq_rhs_.push_back(rhs);
  return static_cast<int>(ineq_rhs_.size()) - 1;
}

LinearProgram ProgramBuilder::build() const {
  const auto n = static_cast<Eigen::Index>(costs_.size());
  LinearProgram lp;
  lp.sense = sense_;
  lp.objective = Eigen::Map<const Eigen::VectorXd>(costs_.data(), n);
  lp.lower = Eigen::Map<const Eigen::VectorXd>(lower_.data(), n);
  lp.upper = Eigen::Map<const Eigen::VectorXd>(upper_.data(), n);
  auto fill = [n](const std::vector<Terms>& rows, const std::vector<double>& rhs, Eigen::MatrixXd& mat,
                  Eigen::VectorXd& vec) {
    const auto m = static_cast<Eigen::Index>(rows.size());
    mat = Eigen::MatrixXd::Zero(m, n);
    vec = Eigen::Map<const Eigen::VectorXd>(rhs.data(), m);
    for (Eigen::Index i = 0; i < m; ++i)
      for (const auto& [col, coef] : rows[static_cast<std::size_t>(i)]) {
        if (col < 0 || col >= n) throw std::out_of_range("ProgramBuilder: column index out of range");
        mat(i, col) += coef;
      }
  };
  fill(eq_rows_, eq_rhs_, lp.eq_matrix, lp.eq_rhs);
  fill(ineq_rows_, ineq_rhs_, lp.ineq_matrix, lp.ineq_rhs);
  return lp;
}

}  // namespace gridtrade::lp
