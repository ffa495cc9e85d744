#include "graphpf/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>

#include "graphpf/caseio.hpp"
#include "graphpf/oracle.hpp"
#include "graphpf/pagerank.hpp"
#include "graphpf/svg.hpp"

namespace graphpf::cli {
namespace {

struct SolverFlags {
    SolverConfig config;
    unsigned threads = 1;
    std::string criterion = "voltage";
    bool case_start = false;

    SolverConfig resolved() const {
        SolverConfig c = config;
        c.criterion = criterion == "mismatch" ? StopCriterion::PowerMismatch : StopCriterion::VoltageDelta;
        if (case_start) c.flat_start = false;
        return c;
    }
};

void add_solver_flags(CLI::App* sub, SolverFlags& f) {
    sub->add_option("--tol-v", f.config.tol_v, "Voltage-change tolerance (pu)")->check(CLI::PositiveNumber);
    sub->add_option("--tol-s", f.config.tol_s, "Power-mismatch tolerance (pu)")->check(CLI::PositiveNumber);
    sub->add_option("--criterion", f.criterion, "Stop test: voltage or mismatch")
        ->check(CLI::IsMember({"voltage", "mismatch"}));
    sub->add_option("--damping", f.config.damping, "Weight of the new iterate, in (0, 1]");
    sub->add_option("--block-size", f.config.block_size, "Nodes per level-2 block")->check(CLI::PositiveNumber);
    sub->add_option("--threads", f.threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--max-iter", f.config.max_iter, "Iteration cap")->check(CLI::PositiveNumber);
    sub->add_flag("--flat-start,!--case-start", f.config.flat_start,
                  "Start from a flat profile (default) or, with --case-start, from the case Vm/Va");
}

std::string stem_of(const std::string& path) {
    return std::filesystem::path(path).stem().string();
}

std::optional<RawCase> load_case(const std::string& path, std::ostream& err) {
    if (!std::filesystem::exists(path)) {
        err << "error: file not found: " << path << '\n';
        return std::nullopt;
    }
    try {
        RawCase c = load_matpower(path);
        const auto diags = validate_case(c);
        for (const auto& d : diags) err << to_string(d) << '\n';
        if (has_errors(diags)) return std::nullopt;
        return c;
    } catch (const std::exception& e) {
        err << "error: " << path << ": " << e.what() << '\n';
        return std::nullopt;
    }
}

bool write_file(const std::string& path, const std::function<void(std::ostream&)>& body, std::ostream& err) {
    std::ofstream f(path);
    if (!f) {
        err << "error: cannot write " << path << '\n';
        return false;
    }
    body(f);
    return static_cast<bool>(f);
}

oracle::VoltageProfile profile_of(const NetworkGraph& g, const std::vector<Complex>& v) {
    oracle::VoltageProfile p;
    for (const auto& bus : g.vertices) p.bus_ids.push_back(bus.external_id);
    p.v = v;
    return p;
}

void print_summary(std::ostream& out, const std::string& name, const NetworkGraph& g, const SolverConfig& cfg,
                   unsigned threads, std::size_t blocks, const SolveReport& r) {
    const double tol = cfg.criterion == StopCriterion::VoltageDelta ? cfg.tol_v : cfg.tol_s;
    out << std::left;
    out << std::setw(18) << "case" << name << '\n';
    out << std::setw(18) << "buses" << g.num_vertices() << '\n';
    out << std::setw(18) << "branches" << g.num_edges() << '\n';
    out << std::setw(18) << "criterion" << to_string(cfg.criterion) << " (tol " << tol << ")\n";
    out << std::setw(18) << "damping" << cfg.damping << '\n';
    out << std::setw(18) << "start" << (cfg.flat_start ? "flat" : "case") << '\n';
    out << std::setw(18) << "block size" << cfg.block_size << " (" << blocks << " blocks)\n";
    out << std::setw(18) << "threads" << threads << '\n';
    out << std::setw(18) << "status" << to_string(r.status) << '\n';
    out << std::setw(18) << "converged" << (r.converged ? "yes" : "no") << '\n';
    out << std::setw(18) << "iterations" << r.iterations << '\n';
    out << std::setw(18) << "time (ms)" << std::fixed << std::setprecision(3) << r.elapsed_ms << '\n';
    out << std::defaultfloat << std::setprecision(6);
    if (!r.trace.empty()) out << std::setw(18) << "final max |dV|" << r.trace.back().max_dv << " pu\n";
    out << std::setw(18) << "final mismatch" << r.mismatch_final << " pu\n";
    if (!r.message.empty()) out << std::setw(18) << "note" << r.message << '\n';
    out << std::right;
}

void write_trace_svg(std::ostream& out, const std::string& name, const SolveReport& r) {
    svg::Series dv{"max |dV|", {}}, dp{"max |dP|", {}}, dq{"max |dQ|", {}};
    for (const auto& t : r.trace) {
        dv.points.emplace_back(static_cast<double>(t.iter), t.max_dv);
        dp.points.emplace_back(static_cast<double>(t.iter), t.max_dp);
        dq.points.emplace_back(static_cast<double>(t.iter), t.max_dq);
    }
    svg::write_line_chart(out, {dv, dp, dq}, {"Convergence trace: " + name, "iteration", "pu", true});
}

int cmd_solve(const std::string& path, const SolverFlags& flags, std::string prefix, bool emit_svg, std::ostream& out,
              std::ostream& err) {
    const auto c = load_case(path, err);
    if (!c) return kUsage;
    const SolverConfig cfg = flags.resolved();
    try {
        cfg.validate();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }
    if (prefix.empty()) prefix = stem_of(path);

    const NetworkGraph g = make_network(*c);
    const SolveReport r = solve(g, cfg, EngineConfig{flags.threads});
    const auto blocks = partition_levels(g, cfg.block_size).blocks.size();

    std::ostringstream summary;
    print_summary(summary, c->name, g, cfg, flags.threads, blocks, r);
    out << summary.str();

    bool ok = write_file(prefix + ".summary.txt", [&](std::ostream& f) { f << summary.str(); }, err);
    ok &= write_file(prefix + ".trace.csv", [&](std::ostream& f) { write_trace_csv(f, r.trace); }, err);
    if (r.status != SolveStatus::Diverged) {
        ok &= write_file(prefix + ".results.txt",
                         [&](std::ostream& f) { write_results(f, g, r.final_v, r.branch_flows); }, err);
    }
    if (emit_svg) ok &= write_file(prefix + ".trace.svg", [&](std::ostream& f) { write_trace_svg(f, c->name, r); }, err);
    if (!ok) return kUsage;
    if (!r.converged) {
        err << "error: " << (r.message.empty() ? "solver did not converge" : r.message) << '\n';
        return kFailure;
    }
    return kOk;
}

struct ValidateFlags {
    double nr_tol = 1e-8;
    double max_angle = -1.0;
    double max_mag = -1.0;
    std::string prefix;
};

int cmd_validate(const std::string& path, const SolverFlags& flags, const ValidateFlags& vf, std::ostream& out,
                 std::ostream& err) {
    const auto c = load_case(path, err);
    if (!c) return kUsage;
    const SolverConfig cfg = flags.resolved();
    try {
        cfg.validate();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }

    const NetworkGraph g = make_network(*c);
    const SolveReport r = solve(g, cfg, EngineConfig{flags.threads});
    if (!r.converged) {
        err << "error: bi-level solver failed (" << to_string(r.status) << "): " << r.message << '\n';
        return kFailure;
    }
    const auto t0 = std::chrono::steady_clock::now();
    const auto nr = oracle::newton_solve(*c, vf.nr_tol, 30, cfg.flat_start);
    const double nr_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (!nr.converged) {
        err << "error: Newton-Raphson oracle failed (" << oracle::to_string(nr.status) << ")\n";
        return kFailure;
    }
    const auto diff = oracle::diff_solutions(profile_of(g, r.final_v), oracle::VoltageProfile{nr.bus_ids, nr.v});
    const auto blocks = partition_levels(g, cfg.block_size).blocks.size();
    const double tol = cfg.criterion == StopCriterion::VoltageDelta ? cfg.tol_v : cfg.tol_s;

    auto row = [&](const std::string& label, const std::string& a, const std::string& b) {
        out << std::left << std::setw(34) << label << std::setw(24) << a << b << '\n' << std::right;
    };
    auto num = [](double v, int prec = 6) {
        std::ostringstream s;
        s << std::setprecision(prec) << v;
        return s.str();
    };
    out << c->name << ": " << g.num_vertices() << " buses, " << g.num_edges() << " branches\n";
    row("Method", "Bi-level PageRank", "Newton-Raphson");
    row("Criterion", std::string(to_string(cfg.criterion)) + " " + num(tol), "mismatch " + num(vf.nr_tol));
    row("Size of LCB", std::to_string(cfg.block_size), "-");
    row("# of LCB", std::to_string(blocks), "-");
    row("# of Running Threads", std::to_string(flags.threads), "1");
    row("Damping", num(cfg.damping), "-");
    row("Iterations", std::to_string(r.iterations), std::to_string(nr.iterations));
    row("Computation Time (ms)", num(r.elapsed_ms), num(nr_ms));
    row("Max Difference  Angle (radian)", num(diff.max_angle_diff) + " (bus " + std::to_string(diff.argmax_bus_angle) + ")",
        "-");
    row("Max Difference  Magnitude (pu)", num(diff.max_mag_diff) + " (bus " + std::to_string(diff.argmax_bus_mag) + ")",
        "-");

    if (!vf.prefix.empty()) {
        const auto nr_flows = branch_flows(g, nr.v);
        bool ok = write_file(vf.prefix + ".bilevel.results.txt",
                             [&](std::ostream& f) { write_results(f, g, r.final_v, r.branch_flows); }, err);
        ok &= write_file(vf.prefix + ".newton.results.txt",
                         [&](std::ostream& f) { write_results(f, g, nr.v, nr_flows); }, err);
        if (!ok) return kUsage;
    }

    bool within = true;
    if (vf.max_angle >= 0.0 && diff.max_angle_diff > vf.max_angle) {
        err << "error: angle difference " << diff.max_angle_diff << " exceeds " << vf.max_angle << '\n';
        within = false;
    }
    if (vf.max_mag >= 0.0 && diff.max_mag_diff > vf.max_mag) {
        err << "error: magnitude difference " << diff.max_mag_diff << " exceeds " << vf.max_mag << '\n';
        within = false;
    }
    return within ? kOk : kFailure;
}

std::vector<unsigned> parse_thread_list(const std::string& csv) {
    std::vector<unsigned> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        std::size_t used = 0;
        const long v = std::stol(tok, &used);
        if (used != tok.size() || v <= 0) throw std::invalid_argument("bad thread count '" + tok + "'");
        out.push_back(static_cast<unsigned>(v));
    }
    if (out.empty()) throw std::invalid_argument("empty thread sweep");
    return out;
}

int cmd_bench(const std::string& path, const SolverFlags& flags, const std::string& sweep, std::size_t reps,
              std::string csv_path, bool emit_svg, std::ostream& out, std::ostream& err) {
    const auto c = load_case(path, err);
    if (!c) return kUsage;
    const SolverConfig cfg = flags.resolved();
    std::vector<unsigned> threads;
    try {
        cfg.validate();
        threads = sweep.empty() ? kDefaultThreadSweep : parse_thread_list(sweep);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }
    if (csv_path.empty()) csv_path = stem_of(path) + ".bench.csv";

    const NetworkGraph g = make_network(*c);
    BenchResult result;
    try {
        result = run_bench(g, cfg, threads, reps);
    } catch (const BenchAbort& e) {
        err << "error: benchmark aborted: " << e.what() << '\n';
        return kFailure;
    }
    write_bench_csv(out, result);
    out << "speedup," << result.speedup << '\n';
    bool ok = write_file(csv_path, [&](std::ostream& f) { write_bench_csv(f, result); }, err);
    if (emit_svg) {
        svg::Series s{c->name, {}};
        for (const auto& r : result.rows) s.points.emplace_back(r.threads, r.elapsed_ms);
        const auto svg_path = std::filesystem::path(csv_path).replace_extension(".svg").string();
        ok &= write_file(
            svg_path,
            [&](std::ostream& f) { svg::write_line_chart(f, {s}, {"Solve time vs threads", "threads", "ms", false}); },
            err);
    }
    return ok ? kOk : kUsage;
}

int cmd_pagerank(const std::string& path, double d, double tol, std::size_t max_iter, unsigned threads,
                 const std::string& out_path, std::ostream& out, std::ostream& err) {
    if (!std::filesystem::exists(path)) {
        err << "error: file not found: " << path << '\n';
        return kUsage;
    }
    DirectedGraph g;
    try {
        if (std::filesystem::path(path).extension() == ".m") {
            g = graph_from_case(load_matpower(path));
        } else {
            std::ifstream in(path);
            std::stringstream buf;
            buf << in.rdbuf();
            g = parse_edge_list(buf.str());
        }
    } catch (const std::exception& e) {
        err << "error: " << path << ": " << e.what() << '\n';
        return kUsage;
    }
    if (g.n == 0) {
        err << "error: graph has no vertices\n";
        return kUsage;
    }
    PageRankResult r;
    try {
        r = pagerank(g, d, tol, max_iter, EngineConfig{threads});
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }
    auto emit = [&](std::ostream& f) {
        f << "# vertex,score\n" << std::setprecision(17);
        for (std::size_t i = 0; i < g.n; ++i) f << g.labels[i] << ',' << r.state.scores[i] << '\n';
    };
    if (out_path.empty()) {
        emit(out);
    } else if (!write_file(out_path, emit, err)) {
        return kUsage;
    }
    err << "pagerank: " << r.iterations << " supersteps, " << (r.converged ? "converged" : "not converged")
        << ", last max delta " << r.last_delta << '\n';
    return r.converged ? kOk : kFailure;
}

int cmd_replicate(const std::string& path, std::size_t k, const std::string& out_path, std::ostream& out,
                  std::ostream& err) {
    const auto c = load_case(path, err);
    if (!c) return kUsage;
    RawCase rep;
    try {
        rep = replicate_case(*c, k);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }
    if (out_path.empty()) {
        write_matpower(out, rep);
        return kOk;
    }
    return write_file(out_path, [&](std::ostream& f) { write_matpower(f, rep); }, err) ? kOk : kUsage;
}

}  // namespace

double compute_speedup(const std::vector<BenchRow>& rows) {
    if (rows.empty()) return 1.0;
    double best = rows.front().elapsed_ms;
    for (const auto& r : rows) best = std::min(best, r.elapsed_ms);
    return best > 0.0 ? rows.front().elapsed_ms / best : 1.0;
}

void check_bench_determinism(const std::vector<BenchRow>& rows) {
    for (const auto& r : rows) {
        if (r.iterations != rows.front().iterations) {
            throw BenchAbort("determinism violation: " + std::to_string(r.threads) + " threads took " +
                             std::to_string(r.iterations) + " iterations, " + std::to_string(rows.front().threads) +
                             " threads took " + std::to_string(rows.front().iterations));
        }
    }
}

BenchResult run_bench(const NetworkGraph& g, const SolverConfig& config, const std::vector<unsigned>& threads,
                      std::size_t reps) {
    if (threads.empty()) throw std::invalid_argument("run_bench: empty thread list");
    if (reps == 0) throw std::invalid_argument("run_bench: reps must be positive");
    BenchResult result;
    std::vector<Complex> reference;
    for (const unsigned t : threads) {
        std::vector<double> times;
        std::size_t iterations = 0;
        for (std::size_t rep = 0; rep < reps; ++rep) {
            const auto r = solve(g, config, EngineConfig{t});
            if (!r.converged) {
                throw BenchAbort("threads=" + std::to_string(t) + " block_size=" + std::to_string(config.block_size) +
                                 " did not converge (" + to_string(r.status) + ")");
            }
            if (reference.empty()) reference = r.final_v;
            if (r.final_v != reference) {
                throw BenchAbort("determinism violation: final voltages differ at threads=" + std::to_string(t));
            }
            times.push_back(r.elapsed_ms);
            iterations = r.iterations;
        }
        std::sort(times.begin(), times.end());
        const std::size_t m = times.size();
        const double median = m % 2 ? times[m / 2] : 0.5 * (times[m / 2 - 1] + times[m / 2]);
        result.rows.push_back({t, median, iterations});
        check_bench_determinism(result.rows);
    }
    result.speedup = compute_speedup(result.rows);
    return result;
}

void write_bench_csv(std::ostream& out, const BenchResult& result) {
    out << "threads,ms,iterations\n";
    for (const auto& r : result.rows) out << r.threads << ',' << r.elapsed_ms << ',' << r.iterations << '\n';
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bi-level PageRank power flow on an in-memory property graph"};
    app.require_subcommand(1);

    std::string case_path;
    SolverFlags solver;
    std::string prefix;
    bool emit_svg = false;

    auto* solve_cmd = app.add_subcommand("solve", "Solve a MATPOWER case with the bi-level solver");
    solve_cmd->add_option("case", case_path, "MATPOWER .m file")->required();
    add_solver_flags(solve_cmd, solver);
    solve_cmd->add_option("--out", prefix, "Output prefix (default: case file stem)");
    solve_cmd->add_flag("--svg", emit_svg, "Also write the convergence trace as SVG");

    ValidateFlags vflags;
    auto* validate_cmd = app.add_subcommand("validate", "Compare the bi-level solution with Newton-Raphson");
    validate_cmd->add_option("case", case_path, "MATPOWER .m file")->required();
    add_solver_flags(validate_cmd, solver);
    validate_cmd->add_option("--nr-tol", vflags.nr_tol, "Newton-Raphson mismatch tolerance")->check(CLI::PositiveNumber);
    validate_cmd->add_option("--max-angle-diff", vflags.max_angle, "Fail if the angle difference exceeds this (rad)");
    validate_cmd->add_option("--max-mag-diff", vflags.max_mag, "Fail if the magnitude difference exceeds this (pu)");
    validate_cmd->add_option("--out", vflags.prefix, "Write both result files under this prefix");

    std::string sweep;
    std::size_t reps = 5;
    std::string bench_csv;
    auto* bench_cmd = app.add_subcommand("bench", "Thread-scaling benchmark");
    bench_cmd->add_option("case", case_path, "MATPOWER .m file")->required();
    add_solver_flags(bench_cmd, solver);
    bench_cmd->add_option("--thread-sweep", sweep, "Comma-separated thread counts (default 1,2,4,8,12,16,20)");
    bench_cmd->add_option("--reps", reps, "Repetitions per thread count")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--out", bench_csv, "Benchmark CSV path");
    bench_cmd->add_flag("--svg", emit_svg, "Also write time vs threads as SVG");

    double pr_damping = 0.85;
    double pr_tol = 1e-10;
    std::size_t pr_max_iter = 1000;
    unsigned pr_threads = 1;
    std::string pr_out;
    auto* pr_cmd = app.add_subcommand("pagerank", "Classic PageRank on an edge list or a case file");
    pr_cmd->add_option("graph", case_path, "Edge list (src dst per line) or MATPOWER .m file")->required();
    pr_cmd->add_option("--damping", pr_damping, "Damping factor d in (0, 1)");
    pr_cmd->add_option("--tol", pr_tol, "Stop when max |delta PR| is below this")->check(CLI::PositiveNumber);
    pr_cmd->add_option("--max-iter", pr_max_iter, "Superstep cap")->check(CLI::PositiveNumber);
    pr_cmd->add_option("--threads", pr_threads, "Worker threads")->check(CLI::PositiveNumber);
    pr_cmd->add_option("--out", pr_out, "Scores file (default: standard output)");

    std::size_t copies = 1;
    std::string rep_out;
    auto* rep_cmd = app.add_subcommand("replicate", "Write k disjoint copies of a case");
    rep_cmd->add_option("case", case_path, "MATPOWER .m file")->required();
    rep_cmd->add_option("k", copies, "Number of copies")->required();
    rep_cmd->add_option("--out", rep_out, "Output .m path (default: standard output)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        for (auto* sub : app.get_subcommands()) err << sub->help();
        return kUsage;
    }

    try {
        if (*solve_cmd) return cmd_solve(case_path, solver, prefix, emit_svg, out, err);
        if (*validate_cmd) return cmd_validate(case_path, solver, vflags, out, err);
        if (*bench_cmd) return cmd_bench(case_path, solver, sweep, reps, bench_csv, emit_svg, out, err);
        if (*pr_cmd) return cmd_pagerank(case_path, pr_damping, pr_tol, pr_max_iter, pr_threads, pr_out, out, err);
        if (*rep_cmd) return cmd_replicate(case_path, copies, rep_out, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("graphpf");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace graphpf::cli
