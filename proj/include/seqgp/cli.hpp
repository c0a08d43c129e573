#pragma once

#include <filesystem>

namespace seqgp {

/// Subcommands generate, run, baseline, predict, compare and report.
/// Returns 0 on success, 1 on usage or config errors, 2 on sampler failures.
int cli_main(int argc, const char* const* argv);

/// Recomputes metrics.jsonl of a run directory from its persisted files.
void regenerate_report(const std::filesystem::path& run_dir);

}  // namespace seqgp
