#include "resalloc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <thread>

#include <Eigen/Dense>

#include "resalloc/aggregation.hpp"
#include "resalloc/errors.hpp"
#include "resalloc/halfspace.hpp"
#include "resalloc/linear_design.hpp"
#include "resalloc/support_alloc.hpp"

namespace resalloc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t block_seed(std::uint64_t seed, std::size_t block) {
  return splitmix64(splitmix64(seed) ^ splitmix64(0xB10C0000ULL + block));
}

using BlockFn = std::function<void(std::mt19937_64&, std::size_t, std::span<double>)>;

// Runs `trials` trials in blocks and returns the accumulator vector (width
// entries) summed in block order.
std::vector<double> run_sharded(const SimulationSpec& spec, std::size_t width,
                                const BlockFn& fn) {
  if (spec.trials == 0) throw DomainError("simulation needs at least one trial");
  const std::size_t block = SimulationSpec::kBlockTrials;
  const std::size_t blocks = (spec.trials + block - 1) / block;
  std::vector<std::vector<double>> partial(blocks, std::vector<double>(width, 0.0));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    try {
      for (std::size_t b = next++; b < blocks && !failed; b = next++) {
        std::mt19937_64 rng(block_seed(spec.seed, b));
        const std::size_t count = std::min(block, spec.trials - b * block);
        fn(rng, count, partial[b]);
      }
    } catch (...) {
      if (!failed.exchange(true)) failure = std::current_exception();
    }
  };
  std::size_t threads = spec.threads != 0 ? spec.threads
                                          : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, blocks);
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::vector<double> total(width, 0.0);
  for (const auto& p : partial) {
    for (std::size_t k = 0; k < width; ++k) total[k] += p[k];
  }
  return total;
}

// Layout of the MSE accumulators: [sum e, sum e^2, then per coordinate
// sum theta_hat_j and sum theta_hat_j^2].
constexpr std::size_t kMseHeader = 2;

SimulationReport mse_report(const std::vector<double>& acc,
                            std::span<const double> theta, double predicted,
                            std::size_t trials) {
  const double n = static_cast<double>(trials);
  SimulationReport out;
  out.check = "mse";
  out.trials = trials;
  out.predicted_risk = predicted;
  out.empirical_risk = acc[0] / n;
  const double var = trials > 1
                         ? std::max(0.0, (acc[1] - acc[0] * acc[0] / n) / (n - 1.0))
                         : 0.0;
  out.std_error = std::sqrt(var / n);
  out.pass = std::abs(out.empirical_risk - predicted) <= 3.0 * out.std_error;
  out.true_theta.assign(theta.begin(), theta.end());
  const std::size_t d = theta.size();
  out.coordinate_mean.resize(d);
  out.coordinate_std_error.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double s = acc[kMseHeader + 2 * j];
    const double ss = acc[kMseHeader + 2 * j + 1];
    out.coordinate_mean[j] = s / n;
    const double v = trials > 1 ? std::max(0.0, (ss - s * s / n) / (n - 1.0)) : 0.0;
    out.coordinate_std_error[j] = std::sqrt(v / n);
  }
  return out;
}

void record_estimate(std::span<const double> estimate, std::span<const double> theta,
                     std::span<double> acc) {
  double err = 0.0;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const double e = estimate[j] - theta[j];
    err += e * e;
    acc[kMseHeader + 2 * j] += estimate[j];
    acc[kMseHeader + 2 * j + 1] += estimate[j] * estimate[j];
  }
  acc[0] += err;
  acc[1] += err * err;
}

// Standard error of a frequency k/n. The estimate is shrunk towards 1/2 by
// half a count so that it stays positive when no event was seen.
double frequency_std_error(double events, std::size_t trials) {
  const double n = static_cast<double>(trials);
  const double p = (events + 0.5) / (n + 1.0);
  return std::sqrt(p * (1.0 - p) / n);
}

void require_theta(std::span<const double> theta, std::size_t d) {
  if (theta.size() != d) {
    std::ostringstream os;
    os << "true theta has " << theta.size() << " entries, expected " << d;
    throw DimensionMismatch(os.str());
  }
  for (double v : theta) {
    if (!std::isfinite(v)) throw DomainError("true theta must be finite");
  }
}

}  // namespace

SimulationReport simulate_mse(std::span<const double> losses,
                              std::span<const double> theta, WeightRule rule,
                              const SimulationSpec& spec) {
  if (theta.empty()) throw DimensionMismatch("true theta is empty");
  require_theta(theta, theta.size());
  const std::size_t d = theta.size();
  const std::size_t n_src = losses.size();
  std::vector<double> weights(n_src);
  if (rule == WeightRule::Optimal) {
    const AggregationWeights w = optimal_weights_single(losses);
    for (const auto& e : w.rows[0]) weights[e.source] = e.weight;
  } else {
    if (n_src == 0) throw DimensionMismatch("no sources");
    for (double l : losses) {
      if (!std::isfinite(l) || l <= 0.0) {
        throw DomainError("uniform weighting needs finite positive losses");
      }
    }
    std::fill(weights.begin(), weights.end(), 1.0 / static_cast<double>(n_src));
  }
  const double predicted = weighted_loss(weights, losses);
  std::vector<double> sd(n_src, 0.0);
  for (std::size_t i = 0; i < n_src; ++i) {
    if (weights[i] > 0.0) sd[i] = std::sqrt(losses[i] / static_cast<double>(d));
  }

  const auto acc = run_sharded(
      spec, kMseHeader + 2 * d,
      [&](std::mt19937_64& rng, std::size_t count, std::span<double> out) {
        std::normal_distribution<double> normal;
        std::vector<double> estimate(d);
        for (std::size_t t = 0; t < count; ++t) {
          std::fill(estimate.begin(), estimate.end(), 0.0);
          for (std::size_t i = 0; i < n_src; ++i) {
            if (weights[i] == 0.0) continue;
            for (std::size_t j = 0; j < d; ++j) {
              estimate[j] += weights[i] * (theta[j] + sd[i] * normal(rng));
            }
          }
          record_estimate(estimate, theta, out);
        }
      });
  return mse_report(acc, theta, predicted, spec.trials);
}

SimulationReport simulate_mse(const SupportProblem& p, std::span<const double> r,
                              std::span<const double> theta,
                              const SimulationSpec& spec) {
  const std::size_t d = p.dimension();
  require_theta(theta, d);
  const AggregationWeights w = optimal_weights_supported(p.sources(), r, d);

  // Aggregated noise of coordinate j: sum over I_j of w_ij sd_ij z_ij.
  struct Term {
    double weight;
    double sd;
  };
  std::vector<std::vector<Term>> terms(d);
  for (std::size_t j = 0; j < d; ++j) {
    for (const auto& e : w.rows[j]) {
      if (e.weight == 0.0) continue;
      const auto& src = p.sources()[e.source];
      const double q = src.tradeoff_at(src.position_of(j)).precision(r[e.source]);
      terms[j].push_back({e.weight, 1.0 / std::sqrt(q)});
    }
  }

  const auto acc = run_sharded(
      spec, kMseHeader + 2 * d,
      [&](std::mt19937_64& rng, std::size_t count, std::span<double> out) {
        std::normal_distribution<double> normal;
        std::vector<double> estimate(d);
        for (std::size_t t = 0; t < count; ++t) {
          for (std::size_t j = 0; j < d; ++j) {
            double v = 0.0;
            for (const auto& term : terms[j]) {
              v += term.weight * (theta[j] + term.sd * normal(rng));
            }
            estimate[j] = v;
          }
          record_estimate(estimate, theta, out);
        }
      });
  return mse_report(acc, theta, w.total_loss, spec.trials);
}

SimulationReport simulate_mse(const DesignProblem& p, std::span<const double> r,
                              std::span<const double> theta,
                              const SimulationSpec& spec) {
  const std::size_t d = p.dimension();
  require_theta(theta, d);
  const ObservedDesign obs = observed_design(p, r);
  const Eigen::VectorXd& prec = obs.precision;
  const MvueEstimator estimator(obs.design, prec);
  const Eigen::Map<const Eigen::VectorXd> th(theta.data(), static_cast<Eigen::Index>(d));
  const Eigen::VectorXd mean_y = obs.design * th;
  const Eigen::VectorXd sd = prec.cwiseSqrt().cwiseInverse();
  const double predicted = estimator.covariance().trace();

  const auto acc = run_sharded(
      spec, kMseHeader + 2 * d,
      [&](std::mt19937_64& rng, std::size_t count, std::span<double> out) {
        std::normal_distribution<double> normal;
        Eigen::VectorXd y(mean_y.size());
        for (std::size_t t = 0; t < count; ++t) {
          for (Eigen::Index n = 0; n < y.size(); ++n) y(n) = mean_y(n) + sd(n) * normal(rng);
          const Eigen::VectorXd est = estimator.estimate(y);
          record_estimate(std::span<const double>(est.data(), d), theta, out);
        }
      });
  return mse_report(acc, theta, predicted, spec.trials);
}

std::vector<double> default_decision_theta(const ElectionProblem& p) {
  const auto c = p.weights();
  const double target = p.threshold() + p.advantage();
  std::vector<double> theta(c.size(), 0.0);
  if (p.mode() == ElectionMode::Direct) {
    std::fill(theta.begin(), theta.end(), target);
    return theta;
  }
  std::vector<std::size_t> order(c.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return c[a] > c[b]; });
  double total = 0.0;
  for (std::size_t i : order) {
    if (total >= target) break;
    theta[i] = 1.0;
    total += c[i];
  }
  if (total < target) {
    throw DomainError("no bit vector reaches an advantage of t; t exceeds 1/2");
  }
  return theta;
}

SimulationReport simulate_decision(const ElectionProblem& p,
                                   std::span<const double> r,
                                   std::span<const double> theta,
                                   const SimulationSpec& spec) {
  const std::size_t d = p.regions();
  require_theta(theta, d);
  if (r.size() != d) throw DimensionMismatch("allocation length differs from region count");
  const auto c = p.weights();
  double truth = 0.0;
  for (std::size_t i = 0; i < d; ++i) truth += c[i] * theta[i];
  const double b = p.threshold();
  if (truth - b < p.advantage() * (1.0 - 1e-12)) {
    std::ostringstream os;
    os << "true advantage " << truth - b << " is below the problem's t = " << p.advantage();
    throw DomainError(os.str());
  }

  const bool indirect = p.mode() == ElectionMode::Indirect;
  std::vector<double> noise(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double loss = p.loss_fns()[i].loss(std::max(r[i], 0.0));
    if (indirect) {
      if (theta[i] != 0.0 && theta[i] != 1.0) {
        throw DomainError("indirect elections need a bit vector theta");
      }
      noise[i] = loss;  // flip probability
    } else {
      noise[i] = c[i] == 0.0 ? 0.0 : std::sqrt(loss);  // standard deviation
    }
  }
  const double bound = indirect ? indirect_bound(p, r) : direct_bound(p, r);

  const auto acc = run_sharded(
      spec, 1, [&](std::mt19937_64& rng, std::size_t count, std::span<double> out) {
        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        std::normal_distribution<double> normal;
        double errors = 0.0;
        for (std::size_t t = 0; t < count; ++t) {
          double score = 0.0;
          for (std::size_t i = 0; i < d; ++i) {
            double est;
            if (indirect) {
              est = uniform(rng) < noise[i] ? 1.0 - theta[i] : theta[i];
            } else {
              est = theta[i] + noise[i] * normal(rng);
            }
            score += c[i] * est;
          }
          if (score <= b) errors += 1.0;
        }
        out[0] += errors;
      });

  SimulationReport out;
  out.check = "decision";
  out.trials = spec.trials;
  out.one_sided = true;
  out.empirical_risk = acc[0] / static_cast<double>(spec.trials);
  out.predicted_risk = bound;
  out.std_error = frequency_std_error(acc[0], spec.trials);
  out.pass = out.empirical_risk <= bound;
  out.advisory = !indirect;
  out.true_theta.assign(theta.begin(), theta.end());
  return out;
}

std::vector<SimulationReport> simulate_tail(const DesignProblem& p,
                                            std::span<const double> r,
                                            std::span<const double> theta,
                                            std::span<const double> deltas,
                                            const SimulationSpec& spec) {
  const std::size_t d = p.dimension();
  require_theta(theta, d);
  if (deltas.empty()) throw DimensionMismatch("no confidence levels given");
  const ObservedDesign obs = observed_design(p, r);
  const Eigen::VectorXd& prec = obs.precision;
  const MvueEstimator estimator(obs.design, prec);
  std::vector<double> radius(deltas.size());
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    radius[k] = tail_bound_radius(obs.design, prec, deltas[k]);
  }
  const Eigen::Map<const Eigen::VectorXd> th(theta.data(), static_cast<Eigen::Index>(d));
  const Eigen::VectorXd mean_y = obs.design * th;
  const Eigen::VectorXd sd = prec.cwiseSqrt().cwiseInverse();

  const auto acc = run_sharded(
      spec, deltas.size(),
      [&](std::mt19937_64& rng, std::size_t count, std::span<double> out) {
        std::normal_distribution<double> normal;
        Eigen::VectorXd y(mean_y.size());
        for (std::size_t t = 0; t < count; ++t) {
          for (Eigen::Index n = 0; n < y.size(); ++n) y(n) = mean_y(n) + sd(n) * normal(rng);
          const double err = (estimator.estimate(y) - th).squaredNorm();
          for (std::size_t k = 0; k < radius.size(); ++k) {
            if (err > radius[k]) out[k] += 1.0;
          }
        }
      });

  std::vector<SimulationReport> reports;
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    SimulationReport out;
    out.check = "tail";
    out.trials = spec.trials;
    out.one_sided = true;
    out.delta = deltas[k];
    out.empirical_risk = acc[k] / static_cast<double>(spec.trials);
    out.predicted_risk = deltas[k];
    out.std_error = frequency_std_error(acc[k], spec.trials);
    out.pass = out.empirical_risk <= deltas[k];
    out.true_theta.assign(theta.begin(), theta.end());
    reports.push_back(std::move(out));
  }
  return reports;
}

bool coordinates_unbiased(const SimulationReport& report, double k) {
  for (std::size_t j = 0; j < report.coordinate_mean.size(); ++j) {
    const double gap = std::abs(report.coordinate_mean[j] - report.true_theta[j]);
    if (gap > k * report.coordinate_std_error[j]) return false;
  }
  return true;
}

}  // namespace resalloc
