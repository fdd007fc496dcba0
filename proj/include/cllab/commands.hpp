#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cllab {

// CLI subcommand bodies, callable in-process. Exit codes: 0 success,
// 1 usage/config error, 2 runtime/numeric failure.

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides);

// axis: m | lambda_dcl | tau_dcl | noise. values_csv overrides the default
// grid for numeric axes ("" keeps the documented defaults); the noise axis
// always runs baseline + {pos,neg} x {plus,minus}. A failed cell is recorded
// in the CSV and the grid continues.
int cmd_ablate(const std::string& config_path, const std::vector<std::string>& overrides,
               const std::string& axis, const std::string& values_csv, std::size_t jobs);

int cmd_diagnose(const std::string& checkpoint_path, const std::string& config_path,
                 const std::vector<std::string>& overrides, const std::string& pads_csv,
                 std::size_t k, std::size_t draws, bool deterministic);

// Finite-difference audit over every objective on random N=8, D=16 batches.
// inject_sign_flip is the self-test hook: it corrupts one analytic gradient
// entry and must make the command fail.
int cmd_gradcheck(double step, double threshold, std::size_t seeds, bool inject_sign_flip);

// pairs_tsv overrides the dataset's test split when non-empty.
int cmd_eval(const std::string& checkpoint_path, const std::string& config_path,
             const std::vector<std::string>& overrides, const std::string& pairs_tsv);

}  // namespace cllab
