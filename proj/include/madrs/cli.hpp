#pragma once

#include "madrs/llm_gateway.hpp"
#include "madrs/prompt.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace madrs::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitConfig = 2;

/// Effective settings of one command after merging the JSON config file
/// with command-line overrides.
struct RunConfig {
    std::string corpus_path;
    /// "mock" or an endpoint URL.
    std::string backend = "mock";
    LlmConfig llm;
    PromptVariant variant = PromptVariant::AllCues;
    ContextScope scope = ContextScope::FullTranscript;
    int repetitions = 5;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    std::string catalog_path;
    std::string markers_path;
    double alpha = 0.05;
    /// Oracle perturbation probability (mock backend).
    double noise = 0.0;
    bool force = false;
    bool compare = false;
    bool include_age = false;
    bool icc_runs_as_raters = false;
    int patients = 20;
    int visits = 2;

    /// Throws ConfigError.
    void validate() const;
    /// Canonical JSON of every setting that affects artifact contents.
    std::string canonical_json() const;
};

/// Runs one command; `args` excludes the program name. Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Artifact locations under the output directory.
std::string segments_dir(const RunConfig& c);
std::string runset_path(const RunConfig& c);
std::string report_stem(const RunConfig& c);

} // namespace madrs::cli
