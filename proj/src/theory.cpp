#include "grpsel/theory.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace grpsel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<int> checked_sorted_subset(const std::vector<int>& set, int p,
                                       const std::string& what) {
  std::vector<int> s = set;
  std::sort(s.begin(), s.end());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] < 0 || s[i] >= p) {
      throw std::invalid_argument(what + ": group index " + std::to_string(s[i]) +
                                  " out of range");
    }
    if (i > 0 && s[i] == s[i - 1]) {
      throw std::invalid_argument(what + ": duplicate group index " +
                                  std::to_string(s[i]));
    }
  }
  return s;
}

std::vector<int> complement_of(const std::vector<int>& sorted_subset, int p) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(p) - sorted_subset.size());
  std::size_t j = 0;
  for (int k = 0; k < p; ++k) {
    if (j < sorted_subset.size() && sorted_subset[j] == k) {
      ++j;
    } else {
      out.push_back(k);
    }
  }
  return out;
}

// min(C(p, k), cap + 1) without overflow; prefix products of the multiplicative
// formula are exact integers
std::int64_t capped_binomial(int p, int k, std::int64_t cap) {
  if (k < 0 || k > p) return 0;
  k = std::min(k, p - k);
  std::int64_t val = 1;
  for (int i = 1; i <= k; ++i) {
    const double next = static_cast<double>(val) * (p - k + i) / i;
    if (next > static_cast<double>(cap)) return cap + 1;
    val = val * (p - k + i) / i;
  }
  return val;
}

// advance a strictly increasing index tuple over {0..p-1} in lexicographic order
bool next_combination(std::vector<int>& idx, int p) {
  const int k = static_cast<int>(idx.size());
  for (int i = k - 1; i >= 0; --i) {
    if (idx[i] < p - k + i) {
      ++idx[i];
      for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
      return true;
    }
  }
  return false;
}

void require_matching_groups(const GroupedDesign& design,
                             const GroupedCoefficients& beta,
                             const std::string& what) {
  if (!(beta.groups() == design.groups())) {
    throw std::invalid_argument(what + ": coefficients and design use different groupings");
  }
}

double guarded_ratio(double value, double denom) {
  if (denom > 0.0) return value / denom;
  return value == 0.0 ? 0.0 : kInf;
}

}  // namespace

SparsityProfile sparsity_profile(const GroupedCoefficients& beta_true,
                                 const std::vector<int>& small_groups) {
  const auto& groups = beta_true.groups();
  const int p = groups.num_groups();
  if (p == 0) throw std::invalid_argument("sparsity_profile: empty coefficient vector");

  SparsityProfile out;
  out.small_groups = checked_sorted_subset(small_groups, p, "sparsity_profile");
  out.important_groups = complement_of(out.small_groups, p);
  out.q = static_cast<int>(out.important_groups.size());

  out.group_norms.resize(static_cast<std::size_t>(p));
  for (int k = 0; k < p; ++k) {
    out.group_norms[static_cast<std::size_t>(k)] = beta_true.group_norm(k);
  }
  for (int k : out.small_groups) {
    out.eta1 += out.group_norms[static_cast<std::size_t>(k)];
  }
  out.exactly_sparse = out.eta1 == 0.0;

  if (out.q > 0) {
    out.theta_a = 0.0;
    out.theta_b = kInf;
    for (int k : out.important_groups) {
      const double nk = out.group_norms[static_cast<std::size_t>(k)];
      out.theta_a = std::max(out.theta_a, nk);
      out.theta_b = std::min(out.theta_b, nk);
    }
  }

  out.num_groups = p;
  out.total_dim = groups.total_dim();
  out.max_group_size = groups.max_size();
  out.min_group_size = groups.min_size();
  return out;
}

SrcCertificate verify_src(const GroupedDesign& design, int q_star,
                          const SrcOptions& opts) {
  const int p = design.groups().num_groups();
  if (q_star < 1 || q_star > p) {
    throw std::invalid_argument("verify_src: q_star must be between 1 and the group count");
  }

  SrcCertificate cert;
  cert.q_star = q_star;
  cert.exhaustive = opts.exhaustive;

  const double n = static_cast<double>(design.n());
  double lo = kInf;
  double hi = -kInf;
  auto touch = [&](const std::vector<int>& subset) {
    const Eigen::MatrixXd xa = extract_submatrix(design, subset);
    const Eigen::MatrixXd gram = xa.transpose() * xa / n;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    lo = std::min(lo, eig.eigenvalues().minCoeff());
    hi = std::max(hi, eig.eigenvalues().maxCoeff());
    ++cert.subsets_checked;
  };

  if (opts.exhaustive) {
    if (capped_binomial(p, q_star, opts.exhaustive_cap) > opts.exhaustive_cap) {
      throw std::invalid_argument(
          "verify_src: subset count exceeds the exhaustive cap; use sampled mode");
    }
    std::vector<int> idx(static_cast<std::size_t>(q_star));
    std::iota(idx.begin(), idx.end(), 0);
    do {
      touch(idx);
    } while (next_combination(idx, p));
  } else {
    if (opts.samples < 1) throw std::invalid_argument("verify_src: samples must be positive");
    std::mt19937_64 rng(opts.seed);
    std::vector<int> all(static_cast<std::size_t>(p));
    std::iota(all.begin(), all.end(), 0);
    std::vector<int> subset(static_cast<std::size_t>(q_star));
    for (int s = 0; s < opts.samples; ++s) {
      std::shuffle(all.begin(), all.end(), rng);
      std::copy(all.begin(), all.begin() + q_star, subset.begin());
      std::sort(subset.begin(), subset.end());
      touch(subset);
    }
  }

  cert.c_lower = lo < 0.0 ? 0.0 : lo;  // tiny negatives are eigensolver noise
  cert.c_upper = hi;
  cert.c_bar = cert.c_lower > 0.0 ? cert.c_upper / cert.c_lower : kInf;
  return cert;
}

Eta2Result eta2(const GroupedDesign& design, const GroupedCoefficients& beta_true,
                const std::vector<int>& small_groups, const Eta2Options& opts) {
  require_matching_groups(design, beta_true, "eta2");
  const int p = design.groups().num_groups();
  const auto small = checked_sorted_subset(small_groups, p, "eta2");

  std::vector<Eigen::VectorXd> contrib;
  for (int k : small) {
    if (beta_true.group_norm(k) > 0.0) {
      contrib.emplace_back(design.group_block(k) * beta_true.group(k));
    }
  }
  const int m = static_cast<int>(contrib.size());

  Eta2Result out;
  if (m == 0) {
    out.subsets_checked = 1;
    return out;
  }

  if (m <= opts.exhaustive_limit && m < 63) {
    // walk subsets in Gray-code order so each step flips one block in or out
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(design.n());
    const std::uint64_t total = std::uint64_t{1} << m;
    std::uint64_t gray = 0;
    double best = 0.0;
    for (std::uint64_t i = 1; i < total; ++i) {
      const std::uint64_t next = i ^ (i >> 1);
      const std::uint64_t flipped = next ^ gray;
      const int b = std::countr_zero(flipped);
      if (next & flipped) {
        sum += contrib[static_cast<std::size_t>(b)];
      } else {
        sum -= contrib[static_cast<std::size_t>(b)];
      }
      gray = next;
      best = std::max(best, sum.norm());
    }
    out.value = best;
    out.exact = true;
    out.subsets_checked = static_cast<std::int64_t>(total);
    return out;
  }

  if (opts.samples < 1) throw std::invalid_argument("eta2: samples must be positive");
  std::mt19937_64 rng(opts.seed);
  std::bernoulli_distribution coin(0.5);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(design.n());
  double best = 0.0;
  // singletons and the full sum come free and anchor the lower bound
  for (const auto& v : contrib) {
    best = std::max(best, v.norm());
    sum += v;
  }
  best = std::max(best, sum.norm());
  for (int s = 0; s < opts.samples; ++s) {
    sum.setZero();
    for (const auto& v : contrib) {
      if (coin(rng)) sum += v;
    }
    best = std::max(best, sum.norm());
  }
  out.value = best;
  out.exact = false;
  out.subsets_checked = opts.samples + m + 1;
  return out;
}

BoundConstants eval_bounds(const SparsityProfile& profile, const SrcCertificate& src,
                           double eta2_value, int n, double sigma, double lambda,
                           double c0, double a_n) {
  if (lambda <= 0.0) throw std::invalid_argument("eval_bounds: lambda must be positive");
  if (n < 1) throw std::invalid_argument("eval_bounds: n must be positive");
  if (sigma < 0.0) throw std::invalid_argument("eval_bounds: sigma must be nonnegative");
  if (eta2_value < 0.0) throw std::invalid_argument("eval_bounds: eta2 must be nonnegative");
  if (c0 < 0.0 || a_n < 0.0) {
    throw std::invalid_argument("eval_bounds: c0 and a_n must be nonnegative");
  }
  if (!(src.c_lower > 0.0) || !std::isfinite(src.c_upper) || src.c_upper < src.c_lower) {
    throw std::invalid_argument(
        "eval_bounds: certificate has no positive spectrum floor; bounds are undefined");
  }

  BoundConstants b;
  b.lambda = lambda;
  b.sigma = sigma;
  b.c0 = c0;
  b.a_n = a_n;
  b.n = n;
  b.q = profile.q;
  b.q_star = src.q_star;
  b.d_max = profile.max_group_size;
  b.d_min = profile.min_group_size;
  b.d_ratio = b.d_max / b.d_min;
  b.total_dim = profile.total_dim;
  b.c_lower = src.c_lower;
  b.c_upper = src.c_upper;
  b.c_bar = src.c_upper / src.c_lower;
  b.eta1 = profile.eta1;
  b.eta2 = eta2_value;

  const double q = profile.q;
  const double d = b.d_ratio;
  const double cb = b.c_bar;
  const double nn = n;

  // every bound below is assembled from r1^2 q and r2^2 q, which stay finite
  // at q == 0 where r1 and r2 themselves blow up
  auto r1_sq_q_at = [&](double lam) {
    return nn * b.c_upper * std::sqrt(b.d_max) * b.eta1 / (lam * b.d_min);
  };
  auto r2_sq_q_at = [&](double lam) {
    return nn * b.c_upper * eta2_value * eta2_value / (lam * lam * b.d_min);
  };
  auto count_bound_at = [&](double lam) {
    const double R1 = r1_sq_q_at(lam);
    const double R2 = r2_sq_q_at(lam);
    const double r2_times_q = std::sqrt(R2 * q);
    return 2.0 * q + 4.0 * R1 + 4.0 * std::sqrt(d * cb) * r2_times_q + 4.0 * d * cb * q;
  };

  b.r1_sq_q = r1_sq_q_at(lambda);
  b.r2_sq_q = r2_sq_q_at(lambda);
  const double r2_times_q = std::sqrt(b.r2_sq_q * q);

  b.M1_q = count_bound_at(lambda);
  b.M2_q = (2.0 / 3.0) * (q + 4.0 * b.r1_sq_q + 2.0 * d * cb * q +
                          4.0 * std::sqrt(2.0 * d) * (1.0 + std::sqrt(cb)) * std::sqrt(cb) *
                              r2_times_q +
                          (16.0 / 3.0) * d * cb * cb * q);
  b.M3_q = (2.0 / 3.0) * (q + 4.0 * b.r1_sq_q +
                          4.0 * std::sqrt(d * cb) * (1.0 + 2.0 * std::sqrt(1.0 + cb)) *
                              r2_times_q +
                          3.0 * b.r2_sq_q + (2.0 / 3.0) * d * cb * (7.0 + 4.0 * cb) * q);

  if (profile.q > 0) {
    b.r1 = std::sqrt(b.r1_sq_q / q);
    b.r2 = std::sqrt(b.r2_sq_q / q);
    b.M1 = b.M1_q / q;
    b.M2 = b.M2_q / q;
    b.M3 = b.M3_q / q;
  } else {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    b.r1 = b.r2 = b.M1 = b.M2 = b.M3 = nan;
  }

  const double b1_sq_over_q = lambda * lambda * b.d_min * b.d_min / (nn * b.c_upper);
  const double b1_proof_sq_over_q = lambda * lambda * b.d_min / (nn * b.c_upper);
  b.B1 = std::sqrt(b1_sq_over_q * q);
  b.B1_proof = std::sqrt(b1_proof_sq_over_q * q);

  b.count_bound = b.M1_q;
  b.omega_sq_bound = b.M2_q * b1_sq_over_q;
  b.omega_sq_bound_proof = b.M2_q * b1_proof_sq_over_q;
  b.zeta_sq_bound = b.M3_q * b1_sq_over_q / (b.c_lower * nn);
  b.zeta_sq_bound_proof = b.M3_q * b1_proof_sq_over_q / (b.c_lower * nn);
  b.coverage_threshold = b.M3_q * lambda * lambda / (b.c_lower * b.c_upper * nn * nn);

  const double log_arg = std::max(b.total_dim, a_n);
  b.lambda_np = 2.0 * sigma *
                std::sqrt(8.0 * (1.0 + c0) * b.d_max * d * d * b.q_star * cb * nn *
                          b.c_upper * std::log(log_arg));

  // smallest penalty level whose count bound leaves room under the certified
  // rank; the bound is nonincreasing in lambda, so bisect
  auto fits = [&](double lam) {
    return count_bound_at(lam) + 1.0 <= static_cast<double>(src.q_star);
  };
  double lo = 1e-8;
  double hi = 1e12;
  if (fits(lo)) {
    b.lambda_0 = 0.0;  // unconstrained below the search floor
  } else if (!fits(hi)) {
    b.lambda_0 = kInf;
  } else {
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (fits(mid) ? hi : lo) = mid;
    }
    b.lambda_0 = hi;
  }

  return b;
}

Eigen::MatrixXd span_projector(const GroupedDesign& design,
                               const std::vector<int>& groups) {
  const int n = design.n();
  const auto idx =
      checked_sorted_subset(groups, design.groups().num_groups(), "span_projector");
  if (idx.empty()) return Eigen::MatrixXd::Zero(n, n);
  const Eigen::MatrixXd xs = extract_submatrix(design, idx);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xs);
  const auto rank = qr.rank();
  if (rank == 0) return Eigen::MatrixXd::Zero(n, n);
  const Eigen::MatrixXd thin_q =
      qr.householderQ() * Eigen::MatrixXd::Identity(n, rank);
  return thin_q * thin_q.transpose();
}

SelectionDiagnostics selection_diagnostics(
    const GroupedDesign& design, const GroupedCoefficients& beta_true,
    const GroupedCoefficients& beta_hat,
    const std::optional<std::vector<int>>& small_groups, double active_tol) {
  require_matching_groups(design, beta_true, "selection_diagnostics");
  require_matching_groups(design, beta_hat, "selection_diagnostics");
  if (active_tol < 0.0) {
    throw std::invalid_argument("selection_diagnostics: active_tol must be nonnegative");
  }
  const int p = design.groups().num_groups();

  SelectionDiagnostics out;
  out.selected = beta_hat.active_set(active_tol);
  out.q_hat = static_cast<int>(out.selected.size());

  std::vector<int> small;
  if (small_groups.has_value()) {
    small = checked_sorted_subset(*small_groups, p, "selection_diagnostics");
  } else {
    for (int k = 0; k < p; ++k) {
      if (beta_true.group_norm(k) == 0.0) small.push_back(k);
    }
  }
  out.important = complement_of(small, p);

  const Eigen::VectorXd signal = design.matrix() * beta_true.values();
  if (out.selected.empty()) {
    out.omega_tilde = signal.norm();
  } else {
    const Eigen::MatrixXd proj = span_projector(design, out.selected);
    out.omega_tilde = (signal - proj * signal).norm();
  }

  double missed_sq = 0.0;
  for (int k : out.important) {
    if (!std::binary_search(out.selected.begin(), out.selected.end(), k)) {
      out.missed_important.push_back(k);
      const double nk = beta_true.group_norm(k);
      missed_sq += nk * nk;
    }
  }
  out.zeta2 = std::sqrt(missed_sq);
  out.union_count = out.q_hat + static_cast<int>(out.missed_important.size());
  return out;
}

SelectionBoundReport check_selection_bounds(const BoundConstants& bounds,
                                            const SelectionDiagnostics& diag,
                                            const SparsityProfile& profile) {
  SelectionBoundReport rep;
  rep.q_hat = diag.q_hat;

  rep.count.observed = diag.union_count;
  rep.count.bound = bounds.count_bound;
  rep.count.holds = rep.count.observed <= rep.count.bound;

  rep.omega_sq.observed = diag.omega_tilde * diag.omega_tilde;
  rep.omega_sq.bound = bounds.omega_sq_bound;
  rep.omega_sq.holds = rep.omega_sq.observed <= rep.omega_sq.bound;

  rep.zeta_sq.observed = diag.zeta2 * diag.zeta2;
  rep.zeta_sq.bound = bounds.zeta_sq_bound;
  rep.zeta_sq.holds = rep.zeta_sq.observed <= rep.zeta_sq.bound;

  // every group whose signal exceeds the coverage threshold must be selected,
  // so the check rests on the largest norm the selection left out
  double worst = 0.0;
  for (int k = 0; k < profile.num_groups; ++k) {
    if (!std::binary_search(diag.selected.begin(), diag.selected.end(), k)) {
      const double nk = profile.group_norms[static_cast<std::size_t>(k)];
      worst = std::max(worst, nk * nk);
    }
  }
  rep.coverage.observed = worst;
  rep.coverage.bound = bounds.coverage_threshold;
  rep.coverage.holds = rep.coverage.observed <= rep.coverage.bound;

  rep.all_hold =
      rep.count.holds && rep.omega_sq.holds && rep.zeta_sq.holds && rep.coverage.holds;
  rep.lambda = bounds.lambda;
  rep.lambda_required = std::max(bounds.lambda_0, bounds.lambda_np);
  rep.lambda_admissible = rep.lambda >= rep.lambda_required;
  return rep;
}

RegularityReport check_regularity(const SparsityProfile& profile,
                                  const GroupedDesign& design, double lambda_tilde,
                                  double r_n) {
  if (profile.q < 1) {
    throw std::invalid_argument("check_regularity: no important groups declared");
  }
  if (lambda_tilde <= 0.0 || r_n <= 0.0) {
    throw std::invalid_argument("check_regularity: lambda_tilde and r_n must be positive");
  }
  if (profile.num_groups != design.groups().num_groups()) {
    throw std::invalid_argument("check_regularity: profile and design disagree on group count");
  }

  const double n = design.n();
  const double p = profile.num_groups;
  const double q = profile.q;
  const double da = profile.max_group_size;
  const double db = profile.min_group_size;
  const double d = da / db;
  const double nd = profile.total_dim;
  const double tb = profile.theta_b;

  // degenerate partitions contribute nothing through these logs
  const double log_q = std::log(std::max(q, 1.0));
  const double log_pq = std::log(std::max(p - q, 1.0));
  const double log_nd = std::log(std::max(nd, 1.0));

  RegularityReport rep;
  rep.general_initial_terms[0] = std::sqrt(da * log_q) / (std::sqrt(n) * tb);
  rep.general_initial_terms[1] = lambda_tilde * std::pow(da, 1.5) * q / (n * tb * tb);
  rep.general_initial_terms[2] = std::sqrt(n * d * log_pq) / (lambda_tilde * r_n);
  rep.general_initial_terms[3] = std::pow(da, 2.5) * q * q / (r_n * tb * std::sqrt(db));

  rep.refit_initial_terms[0] = rep.general_initial_terms[0];
  rep.refit_initial_terms[1] = rep.general_initial_terms[1];
  rep.refit_initial_terms[2] = std::sqrt(d * q * log_pq * log_nd) / lambda_tilde;
  rep.refit_initial_terms[3] =
      std::pow(da * q, 2.5) * std::sqrt(log_nd) / (tb * std::sqrt(n * db));

  const Eigen::MatrixXd xi = extract_submatrix(design, profile.important_groups);
  const Eigen::MatrixXd gram = xi.transpose() * xi / n;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  rep.important_gram_min = eig.eigenvalues().minCoeff();
  rep.important_gram_max = eig.eigenvalues().maxCoeff();
  return rep;
}

ErrorBoundReport check_error_bounds(const BoundConstants& bounds,
                                    const GroupedCoefficients& beta_true,
                                    const GroupedCoefficients& beta_hat,
                                    const GroupedDesign& design) {
  require_matching_groups(design, beta_true, "check_error_bounds");
  require_matching_groups(design, beta_hat, "check_error_bounds");

  ErrorBoundReport rep;
  const Eigen::VectorXd diff = beta_hat.values() - beta_true.values();
  rep.coef_error = diff.norm();
  rep.pred_error = (design.matrix() * diff).norm();

  const double n = bounds.n;
  const double q = bounds.q;
  const double log_nd = std::log(std::max(bounds.total_dim, 1.0));
  const double b1_sq_over_q =
      bounds.lambda * bounds.lambda * bounds.d_min * bounds.d_min / (n * bounds.c_upper);

  // assembled from the q-products so q == 0 stays finite
  const double noise_term = 2.0 * bounds.sigma * std::sqrt(bounds.M1_q * log_nd);
  const double r2_b1 = std::sqrt(bounds.r2_sq_q * b1_sq_over_q);
  const double m1_b1 =
      std::sqrt(bounds.d_ratio * bounds.c_bar * bounds.M1_q * b1_sq_over_q);
  const double tail = std::sqrt((bounds.c_lower * bounds.r1_sq_q + bounds.r2_sq_q) /
                                (bounds.c_lower * bounds.c_upper)) *
                      bounds.lambda / n;

  rep.coef_bound = (noise_term + r2_b1 + m1_b1) / std::sqrt(n * bounds.c_lower) + tail;
  rep.pred_bound = noise_term + 2.0 * r2_b1 + m1_b1;
  rep.coef_ratio = guarded_ratio(rep.coef_error, rep.coef_bound);
  rep.pred_ratio = guarded_ratio(rep.pred_error, rep.pred_bound);
  rep.coef_holds = rep.coef_error <= rep.coef_bound;
  rep.pred_holds = rep.pred_error <= rep.pred_bound;

  rep.coef_rate = guarded_ratio(rep.coef_error, std::sqrt(q * log_nd / n));
  rep.pred_rate = guarded_ratio(rep.pred_error, std::sqrt(q * log_nd));
  return rep;
}

AdaptiveRates adaptive_error_rates(const GroupedDesign& design,
                                   const GroupedCoefficients& beta_true,
                                   const GroupedCoefficients& beta_hat,
                                   double lambda_tilde) {
  require_matching_groups(design, beta_true, "adaptive_error_rates");
  require_matching_groups(design, beta_hat, "adaptive_error_rates");
  if (lambda_tilde < 0.0) {
    throw std::invalid_argument("adaptive_error_rates: lambda_tilde must be nonnegative");
  }

  const double n = design.n();
  const double q = static_cast<double>(beta_true.active_set().size());
  const Eigen::VectorXd diff = beta_hat.values() - beta_true.values();

  AdaptiveRates rates;
  const double lt_sq = lambda_tilde * lambda_tilde;
  rates.coef_rate = guarded_ratio(diff.norm(), std::sqrt(q / n + lt_sq / (n * n)));
  rates.pred_rate =
      guarded_ratio((design.matrix() * diff).norm(), std::sqrt(q + lt_sq / n));
  return rates;
}

}  // namespace grpsel
