#include "qnode/tomography.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "qnode/matrix.hpp"

namespace qnode {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2;

CMatrix pauli(int p) {
  switch (p) {
    case 0:
      return CMatrix::Identity(2, 2);
    case 1:
      return pauli_x();
    case 2:
      return pauli_y();
    default:
      return pauli_z();
  }
}

// Balanced-analyzer slot effects at phase phi: E_early = (I+Z)/8,
// E_central = (I + cos(phi) X - sin(phi) Y)/4, E_late = (I-Z)/8.
CMatrix balanced_effect(int slot, double phi) {
  if (slot == 0) return (pauli(0) + pauli(3)) / 8.0;
  if (slot == 2) return (pauli(0) - pauli(3)) / 8.0;
  return (pauli(0) + std::cos(phi) * pauli(1) - std::sin(phi) * pauli(2)) /
         4.0;
}

// Pauli coefficients of the effect: E = sum_P coeff[P] sigma_P.
std::array<double, 4> effect_coeffs(int slot, double phi) {
  std::array<double, 4> c{};
  CMatrix e = balanced_effect(slot, phi);
  for (int p = 0; p < 4; ++p) c[static_cast<size_t>(p)] = ((e * pauli(p)).trace() / 2.0).real();
  return c;
}

bool near(double a, double b) { return std::abs(a - b) < 1e-6; }

const SettingCounts* find_setting(const TomographyCounts& counts,
                                  double phase_idler, double phase_signal) {
  for (const auto& s : counts.settings)
    if (near(s.setting.phase_idler, phase_idler) &&
        near(s.setting.phase_signal, phase_signal))
      return &s;
  return nullptr;
}

}  // namespace

std::vector<TomographySetting> default_settings() {
  return {
      {0.0, 0.0, "zz"},
      {0.0, kHalfPi, "zq"},
      {kHalfPi, 0.0, "qz"},
      {kHalfPi, kHalfPi, "qq"},
  };
}

DensityMatrix reconstruct_two_qubit(const TomographyCounts& counts) {
  if (counts.settings.size() < 4)
    throw std::invalid_argument(
        "reconstruction requires at least four tomography settings");
  const auto n_rows =
      static_cast<Eigen::Index>(counts.settings.size()) * 9;
  Eigen::MatrixXd design(n_rows, 16);
  Eigen::VectorXd observed(n_rows);
  Eigen::Index row = 0;
  for (const auto& s : counts.settings) {
    std::array<std::array<double, 4>, 3> ci, cs;
    for (int slot = 0; slot < 3; ++slot) {
      ci[static_cast<size_t>(slot)] =
          effect_coeffs(slot, s.setting.phase_idler);
      cs[static_cast<size_t>(slot)] =
          effect_coeffs(slot, s.setting.phase_signal);
    }
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        for (int p = 0; p < 4; ++p)
          for (int q = 0; q < 4; ++q)
            design(row, p * 4 + q) = ci[static_cast<size_t>(a)][static_cast<size_t>(p)] *
                                     cs[static_cast<size_t>(b)][static_cast<size_t>(q)];
        observed(row) =
            s.cells.cells[static_cast<size_t>(a)][static_cast<size_t>(b)];
        ++row;
      }
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.singularValues()(15) <
      1e-10 * svd.singularValues()(0))
    throw std::domain_error(
        "reconstruction: singular design matrix (settings do not span the "
        "state space)");
  Eigen::VectorXd y = svd.solve(observed);
  if (!(y(0) > 0))
    throw std::domain_error("reconstruction: singular normalization");
  CMatrix rho = CMatrix::Zero(4, 4);
  for (int p = 0; p < 4; ++p)
    for (int q = 0; q < 4; ++q)
      rho += (y(p * 4 + q) / y(0)) * kron(pauli(p), pauli(q));
  rho /= 4.0;
  return project_to_physical(0.5 * (rho + rho.adjoint()));
}

// Maximizes the per-setting multinomial likelihood
//   L(rho) = sum_s sum_c n_{s,c} ln( p_{s,c} / T_s ),
// p_{s,c} = tr(rho E_{s,c}), T_s = tr(rho G_s), G_s = sum_c E_{s,c}, because
// post-selected cell counts carry no information about the absolute
// coincidence yield.  Damped positive-map steps rho -> A rho A / tr(A rho A)
// with A = I + eps * D, D = sum (n/p) E - sum_s (N_s/T_s) G_s: D vanishes at
// the maximizer, so data consistent with a state leaves it fixed.  eps
// backtracks whenever a step would lower the likelihood.
DensityMatrix mle_refine(const TomographyCounts& counts,
                         const DensityMatrix& rho0, int max_iter, double tol) {
  if (rho0.dim() != 4)
    throw std::invalid_argument("mle refinement expects a two-qubit state");
  if (counts.settings.empty())
    throw std::invalid_argument("mle refinement: no settings");
  struct SettingData {
    std::array<CMatrix, 9> effects;
    std::array<double, 9> observed;
    CMatrix g;
    double total;
  };
  std::vector<SettingData> sets;
  double n_total = 0;
  for (const auto& s : counts.settings) {
    SettingData st;
    st.g = CMatrix::Zero(4, 4);
    st.total = 0;
    size_t k = 0;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b, ++k) {
        st.effects[k] = kron(balanced_effect(a, s.setting.phase_idler),
                             balanced_effect(b, s.setting.phase_signal));
        st.g += st.effects[k];
        // Accidental-corrected counts may dip slightly negative; they carry
        // no likelihood weight.
        st.observed[k] = std::max(
            0.0, s.cells.cells[static_cast<size_t>(a)][static_cast<size_t>(b)]);
        st.total += st.observed[k];
      }
    }
    if (st.total > 0) {
      n_total += st.total;
      sets.push_back(std::move(st));
    }
  }
  if (!(n_total > 0))
    throw std::invalid_argument("mle refinement: no counts");
  CMatrix g_all = CMatrix::Zero(4, 4);
  for (const auto& st : sets) g_all += st.g;
  Eigen::SelfAdjointEigenSolver<CMatrix> ges(g_all);
  if (ges.eigenvalues()(0) <= 0)
    throw std::domain_error("mle refinement: degenerate measurement set");

  constexpr double kProbFloor = 1e-18;
  auto log_likelihood = [&](const CMatrix& m) {
    double ll = 0;
    for (const auto& st : sets) {
      double ts = (m * st.g).trace().real();
      if (!(ts > kProbFloor)) return -std::numeric_limits<double>::infinity();
      for (size_t k = 0; k < 9; ++k) {
        if (st.observed[k] <= 0) continue;
        double p = (m * st.effects[k]).trace().real();
        ll += st.observed[k] * std::log(std::max(p, kProbFloor));
      }
      ll -= st.total * std::log(ts);
    }
    return ll;
  };

  // Start from the hermitized, physical seed mixed with a trace of identity
  // so no cell probability sits exactly on the support boundary.
  CMatrix rho =
      project_to_physical(0.5 * (rho0.mat() + rho0.mat().adjoint())).mat();
  rho = (1.0 - 1e-9) * rho + (1e-9 / 4.0) * CMatrix::Identity(4, 4);
  double ll = log_likelihood(rho);
  double eps = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    CMatrix d = CMatrix::Zero(4, 4);
    for (const auto& st : sets) {
      double ts = std::max((rho * st.g).trace().real(), kProbFloor);
      d -= (st.total / ts) * st.g;
      for (size_t k = 0; k < 9; ++k) {
        if (st.observed[k] <= 0) continue;
        double p = std::max((rho * st.effects[k]).trace().real(), kProbFloor);
        d += (st.observed[k] / p) * st.effects[k];
      }
    }
    d /= n_total;
    d = 0.5 * (d + d.adjoint());
    if (d.norm() < 1e-12) break;

    bool accepted = false;
    CMatrix next;
    double ll_next = ll;
    while (eps >= 1e-12) {
      CMatrix a = CMatrix::Identity(4, 4) + eps * d;
      next = a * rho * a.adjoint();
      next = 0.5 * (next + next.adjoint());
      double tr = next.trace().real();
      if (tr > 0) {
        next /= tr;
        ll_next = log_likelihood(next);
        if (ll_next >= ll - 1e-12 * (1.0 + std::abs(ll))) {
          accepted = true;
          break;
        }
      }
      eps *= 0.5;
    }
    if (!accepted) break;
    double step =
        trace_distance(project_to_physical(next), project_to_physical(rho));
    rho = next;
    ll = ll_next;
    eps = std::min(eps * 1.3, 4.0);
    if (step < tol) break;
  }
  return project_to_physical(rho);
}

DensityMatrix reconstruct_one_qubit(
    std::span<const OneQubitSettingCounts> counts) {
  double e0 = 0, c0 = 0, l0 = 0, eh = 0, ch = 0, lh = 0;
  bool have0 = false, haveh = false;
  double sum_e = 0, sum_l = 0;
  for (const auto& s : counts) {
    if (s.early < 0 || s.central < 0 || s.late < 0)
      throw std::invalid_argument("one-qubit counts must be non-negative");
    sum_e += s.early;
    sum_l += s.late;
    if (near(s.phase_signal, 0.0)) {
      e0 += s.early;
      c0 += s.central;
      l0 += s.late;
      have0 = true;
    } else if (near(s.phase_signal, kHalfPi)) {
      eh += s.early;
      ch += s.central;
      lh += s.late;
      haveh = true;
    } else {
      throw std::invalid_argument(
          "one-qubit reconstruction expects phases 0 and pi/2");
    }
  }
  if (!have0 || !haveh)
    throw std::invalid_argument(
        "one-qubit reconstruction requires both phase settings");
  double pop0 = e0 + l0, poph = eh + lh, pop = sum_e + sum_l;
  if (!(pop0 > 0) || !(poph > 0))
    throw std::invalid_argument("one-qubit reconstruction: no population counts");
  double bz = (sum_e - sum_l) / pop;
  double bx = c0 / pop0 - 1.0;
  double by = 1.0 - ch / poph;
  CMatrix rho = 0.5 * (pauli(0) + bx * pauli(1) + by * pauli(2) +
                       bz * pauli(3));
  return project_to_physical(rho);
}

// Maps accidental-subtracted cell counts to their balanced-analyzer
// equivalents.  Slots fix the interferometer path for every time-bin pair
// component: early = short arm, late = long arm, and a central slot pairs
// with whichever bin the partner slot selects.  Corner cells therefore
// rescale by the product of their arm transmissions; a central cell is
// re-leveled onto the rebalanced corners it decomposes into, with its
// interference deviation rescaled by the geometric-mean amplitude damping.
TomographyCounts correct_counts(const TomographyCounts& counts,
                                const MzParams& idler,
                                const MzParams& signal) {
  idler.validate();
  signal.validate();
  if (idler.t_short <= 0 || signal.t_short <= 0)
    throw std::invalid_argument(
        "imbalance correction requires nonzero short-arm transmission");
  double ri = idler.t_long / idler.t_short;
  double rs = signal.t_long / signal.t_short;
  if (ri <= 0 || rs <= 0)
    throw std::invalid_argument(
        "imbalance correction requires interfering analyzers (visibility > 0)");

  TomographyCounts out = counts;
  for (auto& s : out.settings) {
    auto& c = s.cells.cells;
    const auto& acc = s.accidentals.cells;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        auto& cell = c[static_cast<size_t>(a)][static_cast<size_t>(b)];
        cell -= acc[static_cast<size_t>(a)][static_cast<size_t>(b)];
        if (cell < 0) cell = 0;
      }
    double ee = c[0][0], el = c[0][2], le = c[2][0], ll = c[2][2];
    double ec = c[0][1], ce = c[1][0], cl = c[1][2], lc = c[2][1];
    double cc = c[1][1];
    // Rebalanced corners (short-short transmission as the reference).
    double ee_c = ee, el_c = el / rs, le_c = le / ri, ll_c = ll / (ri * rs);
    auto relevel = [](double raw, double raw_level, double level,
                      double damping) {
      double v = level + (raw - raw_level) / damping;
      return v < 0 ? 0.0 : v;
    };
    c[0][0] = ee_c;
    c[0][2] = el_c;
    c[2][0] = le_c;
    c[2][2] = ll_c;
    c[0][1] = relevel(ec, ee * rs + el / rs, ee_c + el_c, std::sqrt(rs));
    c[1][0] = relevel(ce, ee * ri + le / ri, ee_c + le_c, std::sqrt(ri));
    c[1][2] = relevel(cl, ll / ri + el * ri, ll_c + el_c, std::sqrt(ri));
    c[2][1] = relevel(lc, ll / rs + le * rs, ll_c + le_c, std::sqrt(rs));
    c[1][1] = relevel(cc, ee * ri * rs + ll / (ri * rs) + el * ri / rs +
                              le * rs / ri,
                      ee_c + el_c + le_c + ll_c, std::sqrt(ri * rs));
    s.accidentals = FransonCounts{};
  }
  return out;
}

BasisVisibilities conditional_visibilities(const TomographyCounts& counts) {
  const SettingCounts* s00 = find_setting(counts, 0.0, 0.0);
  const SettingCounts* s0h = find_setting(counts, 0.0, kHalfPi);
  const SettingCounts* sh0 = find_setting(counts, kHalfPi, 0.0);
  const SettingCounts* shh = find_setting(counts, kHalfPi, kHalfPi);
  if (!s00 || !s0h || !sh0 || !shh)
    throw std::invalid_argument(
        "conditional visibilities require the four default settings");

  double agree = 0, disagree = 0;
  for (const auto* s : {s00, s0h, sh0, shh}) {
    const auto& c = s->cells.cells;
    agree += c[0][0] + c[2][2];
    disagree += c[0][2] + c[2][0];
  }
  if (!(agree + disagree > 0))
    throw std::invalid_argument("conditional visibilities: no corner counts");

  double cc00 = s00->cells.cells[1][1];
  double cc0h = s0h->cells.cells[1][1];
  double cch0 = sh0->cells.cells[1][1];
  double cchh = shh->cells.cells[1][1];
  double level = (cc00 + cchh) / 2.0;
  if (!(level > 0))
    throw std::invalid_argument("conditional visibilities: no central counts");

  BasisVisibilities v;
  v.v_z = (agree - disagree) / (agree + disagree);
  v.v_x = std::hypot(cc00 - level, cc0h - level) / level;
  v.v_y = std::hypot(cch0 - level, cchh - level) / level;
  return v;
}

double average_one_qubit_fidelity(const BasisVisibilities& v) {
  if (!std::isfinite(v.v_z) || !std::isfinite(v.v_x) || !std::isfinite(v.v_y))
    throw std::invalid_argument("fidelity requires all three basis visibilities");
  return ((1 + v.v_z) / 2 + (1 + v.v_x) / 2 + (1 + v.v_y) / 2) / 3.0;
}

double input_output_fidelity(const DensityMatrix& rho_in_corrected,
                             const DensityMatrix& rho_out) {
  return uhlmann_fidelity(rho_in_corrected, rho_out);
}

FitResult fit_exponential_decay(std::span<const double> tau,
                                std::span<const double> eta,
                                std::span<const double> sigma) {
  if (tau.size() < 3)
    throw std::invalid_argument("decay fit: need at least three points");
  DecayFitResult base = fit_efficiency_decay(tau, eta, sigma);
  FitResult out;
  out.eta0 = base.eta0;
  out.t2_eff = base.t2;
  out.covariance(0, 0) = base.eta0_err * base.eta0_err;
  out.covariance(1, 1) = base.t2_err * base.t2_err;
  out.covariance(0, 1) = base.cov_eta0_t2;
  out.covariance(1, 0) = base.cov_eta0_t2;
  out.residual_norm = std::sqrt(base.chi2);
  out.iterations = base.iterations;
  out.converged = base.converged;
  return out;
}

std::string serialize_fit_result(const FitResult& fit) {
  char buf[64];
  std::ostringstream os;
  auto emit = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << key << " = " << buf << '\n';
  };
  emit("eta0", fit.eta0);
  emit("t2_eff", fit.t2_eff);
  emit("eta0_err", std::sqrt(std::max(0.0, fit.covariance(0, 0))));
  emit("t2_eff_err", std::sqrt(std::max(0.0, fit.covariance(1, 1))));
  emit("cov_eta0_t2", fit.covariance(0, 1));
  emit("residual_norm", fit.residual_norm);
  os << "iterations = " << fit.iterations << '\n';
  os << "converged = " << (fit.converged ? "true" : "false") << '\n';
  return os.str();
}

}  // namespace qnode
