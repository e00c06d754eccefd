#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "actseg/config.hpp"
#include "actseg/evaluate.hpp"
#include "actseg/model.hpp"

namespace actseg {

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name. Returns the process exit code: 0 success, 1 usage,
/// 2 data/format, 3 numeric failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

namespace cli {

void cmd_synth(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

struct TrainOutcome {
  std::size_t epochs = 0;
  double final_cost = 0.0;
};
TrainOutcome cmd_train(const std::filesystem::path& manifest, const RunConfig& config,
                       const std::filesystem::path& out_dir,
                       const std::filesystem::path& resume_from, std::ostream& log);

void cmd_segment(const std::filesystem::path& checkpoint, const std::filesystem::path& manifest,
                 const std::filesystem::path& out_dir, bool svg, std::ostream& log);

/// Returns the summary; writes metrics.csv into `out_dir` when non-empty.
EvaluationSummary cmd_eval(const std::filesystem::path& manifest,
                           const std::filesystem::path& predictions_dir,
                           const std::filesystem::path& out_dir, std::ostream& log);

void cmd_sweep(const std::filesystem::path& manifest, const RunConfig& config,
               const std::string& key, const std::vector<std::string>& values,
               const std::filesystem::path& out_dir, std::ostream& log);

/// SVG strip: one coloured rect per predicted segment, and a grey band of
/// ground-truth segments when `gt` is non-empty.
std::string render_timeline(const std::string& title, const std::vector<int>& pred,
                            const std::vector<int>& gt);

/// "label:length" runs separated by spaces.
std::string run_length_encode(const std::vector<int>& labels);

}  // namespace cli
}  // namespace actseg
