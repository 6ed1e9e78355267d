#pragma once

#include <map>
#include <memory>
#include <random>
#include <string>

#include "mto/optimizer.hpp"

namespace mto::test {

inline ProblemConfig config(const std::string& id, int res, double A_d = 0.0, double t = 0.0,
                            std::map<std::string, double> params = {}) {
  ProblemConfig cfg;
  cfg.case_spec.case_id = id;
  cfg.case_spec.resolution = res;
  cfg.case_spec.t = t;
  cfg.case_spec.params = std::move(params);
  cfg.filter.A_d = A_d;
  return cfg;
}

inline std::unique_ptr<Problem> problem(const ProblemConfig& cfg) {
  return std::make_unique<Problem>(build_case(cfg.case_spec), cfg);
}

// Initial design with a seeded jitter of the given amplitude, kept in [0, 1].
inline VecX jittered(const Problem& p, double s0, double v0, double amp, unsigned seed) {
  VecX x = p.initial_design(s0, v0);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-amp, amp);
  for (auto& v : x) v = std::clamp(v + u(rng), 0.0, 1.0);
  return x;
}

}  // namespace mto::test
