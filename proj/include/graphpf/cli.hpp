#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "graphpf/netgraph.hpp"
#include "graphpf/pfsolver.hpp"

namespace graphpf::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2 };

struct BenchRow {
    unsigned threads = 1;
    double elapsed_ms = 0.0;  // median over repetitions
    std::size_t iterations = 0;
};

struct BenchResult {
    std::vector<BenchRow> rows;
    double speedup = 1.0;  // first-row time over the best time
};

/// Raised when a benchmark configuration fails to converge or thread rows disagree.
class BenchAbort : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline const std::vector<unsigned> kDefaultThreadSweep{1, 2, 4, 8, 12, 16, 20};

/// Solves `g` `reps` times per thread count. Aborts on any non-converged run and when
/// iteration counts or final voltages differ between thread counts.
BenchResult run_bench(const NetworkGraph& g, const SolverConfig& config, const std::vector<unsigned>& threads,
                      std::size_t reps);

/// Throws BenchAbort if rows report different iteration counts.
void check_bench_determinism(const std::vector<BenchRow>& rows);

double compute_speedup(const std::vector<BenchRow>& rows);

void write_bench_csv(std::ostream& out, const BenchResult& result);

/// Entry point shared by the executable and the tests. argv[0] is the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace graphpf::cli
