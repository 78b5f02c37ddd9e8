// Experiment harness: flat key-value spec files, deterministic grid sweeps,
// region computations and CSV emission.
//
// Spec files are flat `key = value` text; grid axes are written as
// `grid.<param> = [v1, v2, ...]` (a bare `param = v` is shorthand for a
// one-element axis). Cells are enumerated in a fixed order, each cell's
// random seed is derived from the master seed and the cell coordinates
// alone, and rows are written in cell order, so reruns and resumed runs
// are byte-identical.

#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "arq/model.hpp"
#include "arq/optimizer.hpp"

namespace arq {

enum class Engine { Analytic, MonteCarlo, Both };
enum class Coding { Fixed, Variable };
enum class OptimizeMode { None, MaxLongTerm, MaxDelayLimited, MinOutage };

struct ExperimentSpec {
    std::string name = "experiment";
    std::vector<Protocol> protocols{Protocol::Rtd};  // basic/rtd/inr x coding
    std::vector<Scenario> scenarios{Scenario::LongLc};
    std::vector<Coding> codings{Coding::Fixed};
    std::vector<int> m_values{1};
    std::vector<double> n_values{2.0};   // Nakagami order; 0 denotes the
                                         // deterministic law with gain w
    std::vector<double> w_values{1.0};
    std::vector<double> snr_db_values{0.0};
    std::vector<double> pb_values{0.0};
    Engine engine = Engine::Analytic;
    uint64_t mc_packets = 1000000;
    uint64_t seed = 1;
    std::string out_path;
    std::optional<double> fixed_rate;
    OptimizeMode optimize = OptimizeMode::None;
};

// Parses a spec file; error messages carry the offending line number.
ExperimentSpec parse_spec_file(const std::string& path);
ExperimentSpec parse_spec_text(const std::string& text, const std::string& origin = "<text>");

struct RunOptions {
    std::optional<uint64_t> seed;
    std::optional<uint64_t> packets;
    int threads = 0;
    bool resume = false;
    std::string out_override;
};

// Thrown when a computed row violates a model-level identity; the CLI maps
// it to exit code 2.
struct InvariantViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

extern const char* const kCsvHeader;

// Grid sweep -> CSV rows (one per cell per engaged engine). Returns the
// number of data rows in the finished file.
size_t run_experiment(const ExperimentSpec& spec, const RunOptions& options);

// Largest feedback error probability keeping the relative outage inflation
// within beta percent, per cell, by bisection up to the 0.5 search ceiling.
size_t beta_region(const ExperimentSpec& spec, double beta_percent, const RunOptions& options,
                   double pb_tolerance = 1e-3);

// Relative throughput gain of optimized noisy operation over the uniform
// noise-free baseline (optimized at its own rate), in percent.
size_t relative_throughput(const ExperimentSpec& spec, const RunOptions& options);

// Largest p_b at which the ARQ long-term throughput still beats open-loop
// transmission at the same rate and power budget.
size_t usefulness_region(const ExperimentSpec& spec, const RunOptions& options,
                         double pb_tolerance = 1e-3);

// Monte-Carlo-vs-analytic cross-check over the standard verification grid.
// Prints one line per cell; returns true when every quantity agrees within
// four standard errors.
bool verify_grid(uint64_t packets, uint64_t seed, int threads, std::ostream& out);

}  // namespace arq
