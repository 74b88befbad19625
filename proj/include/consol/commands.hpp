#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace consol::cli {

// Exit codes, one per failure class.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitDivergence = 4;

struct CommandOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed_override;
  bool quiet = false;
};

struct EvaluateOptions {
  std::string model_path;
  std::string reference_csv;
  std::string out_dir = ".";
  bool quiet = false;
};

struct OracleOptions : CommandOptions {
  std::string compare_csv;  // optional analytic CSV to diff against
};

int cmd_generate(const CommandOptions& opts);
int cmd_train_forward(const CommandOptions& opts);
int cmd_train_inverse(const CommandOptions& opts);
int cmd_evaluate(const EvaluateOptions& opts);
int cmd_oracle(const OracleOptions& opts);

}  // namespace consol::cli
