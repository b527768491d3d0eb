// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0
//
// Self-checks run by `topicdiff diag`: a finite-difference sweep over every
// op and network, analytic-score sampler recovery, and a score network trained
// on a Gaussian with a known score.

#ifndef TOPICDIFF_ORACLES_HPP_
#define TOPICDIFF_ORACLES_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace topicdiff::oracles {

struct Check {
  std::string name;
  double value = 0;
  double limit = 0;  // pass when value < limit
  bool pass() const { return value < limit; }
};

struct DiagReport {
  std::string name;
  std::vector<Check> checks;

  bool pass() const;
  double worst(const std::string& prefix = "") const;
  /// One line per check plus a summary line.
  std::string text() const;
};

void to_json(nlohmann::json& j, const DiagReport& r);

/// Finite-difference gradient check of every op and network (limit 1e-4).
DiagReport grad_check_suite(std::uint64_t seed);

/// Perturbation variance, annealed Langevin and reverse-SDE recovery under analytic scores.
DiagReport sde_demo(std::uint64_t seed);

/// Score network trained 2,000 steps on a 2-D Gaussian versus the analytic perturbed score.
DiagReport dsm_oracle(std::uint64_t seed);

/// Runs the diagnostic named `name` ("grad-check", "sde-demo", "dsm-oracle").
/// Throws ContractError for other names.
DiagReport run_diag(const std::string& name, std::uint64_t seed);

}  // namespace topicdiff::oracles

#endif  // TOPICDIFF_ORACLES_HPP_
