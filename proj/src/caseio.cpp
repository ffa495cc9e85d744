#include "graphpf/caseio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <unordered_map>

namespace graphpf {
namespace {

// Column counts that must be present in each table (MATPOWER v2 numbering).
constexpr std::size_t kBusCols = 13;
constexpr std::size_t kGenCols = 8;
constexpr std::size_t kBranchCols = 11;

struct NumericRow {
    std::vector<double> values;
    std::size_t line = 0;
};

struct MatrixBlock {
    std::vector<NumericRow> rows;
    std::size_t line = 0;
};

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

// Drops a trailing `%` comment, ignoring `%` inside single-quoted strings.
std::string_view strip_comment(std::string_view line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '\'') quoted = !quoted;
        if (line[i] == '%' && !quoted) return line.substr(0, i);
    }
    return line;
}

std::optional<double> to_number(std::string_view tok) {
    double value = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    if (first != last && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    return value;
}

// Splits matrix content into numeric rows. Rows end at ';' or at end of line.
void scan_matrix_text(std::string_view text, std::size_t line_no, MatrixBlock& block) {
    NumericRow row;
    row.line = line_no;
    std::size_t i = 0;
    auto flush = [&] {
        if (!row.values.empty()) block.rows.push_back(std::move(row));
        row = NumericRow{};
        row.line = line_no;
    };
    while (i < text.size()) {
        const char ch = text[i];
        if (ch == ' ' || ch == '\t' || ch == ',' || ch == '\r') {
            ++i;
            continue;
        }
        if (ch == ';') {
            flush();
            ++i;
            continue;
        }
        const auto end = text.find_first_of(" \t,;\r", i);
        const auto tok = text.substr(i, end == std::string_view::npos ? text.size() - i : end - i);
        const auto value = to_number(tok);
        if (!value) {
            throw ParseError("line " + std::to_string(line_no) + ": non-numeric token '" +
                                 std::string(tok) + "' in matrix",
                             line_no);
        }
        row.values.push_back(*value);
        i += tok.size();
    }
    flush();
}

BusType bus_type_from_code(double code, std::size_t line) {
    if (code == 1.0) return BusType::PQ;
    if (code == 2.0) return BusType::PV;
    if (code == 3.0) return BusType::Slack;
    std::ostringstream msg;
    msg << "line " << line << ": bus type " << code << " is not one of 1 (PQ), 2 (PV), 3 (slack)";
    throw ValidationError(msg.str());
}

void require_columns(const NumericRow& row, std::size_t needed, std::string_view block) {
    if (row.values.size() < needed) {
        throw ParseError("line " + std::to_string(row.line) + ": mpc." + std::string(block) +
                             " row has " + std::to_string(row.values.size()) +
                             " columns, need at least " + std::to_string(needed),
                         row.line);
    }
}

int to_id(double v, std::size_t line) {
    if (v != std::floor(v)) {
        throw ParseError("line " + std::to_string(line) + ": bus number must be an integer", line);
    }
    return static_cast<int>(v);
}

std::string fmt_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

struct DisjointSets {
    std::vector<std::size_t> parent;
    explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

RawCase parse_matpower(std::string_view source_text, std::string name) {
    std::map<std::string, MatrixBlock, std::less<>> blocks;
    std::optional<double> base_mva;

    MatrixBlock* open_block = nullptr;  // matrix we are collecting rows for
    char skip_until = 0;                // closing bracket of an ignored multi-line value

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= source_text.size()) {
        const auto nl = source_text.find('\n', pos);
        const auto raw = source_text.substr(pos, nl == std::string_view::npos ? std::string_view::npos
                                                                                : nl - pos);
        pos = (nl == std::string_view::npos) ? source_text.size() + 1 : nl + 1;
        ++line_no;
        auto line = trim(strip_comment(raw));
        if (line.empty()) continue;

        if (open_block) {
            const auto close = line.find(']');
            scan_matrix_text(line.substr(0, close), line_no, *open_block);
            if (close != std::string_view::npos) open_block = nullptr;
            continue;
        }
        if (skip_until) {
            if (line.find(skip_until) != std::string_view::npos) skip_until = 0;
            continue;
        }

        if (line.starts_with("function")) {
            const auto eq = line.find('=');
            if (eq != std::string_view::npos) name = std::string(trim(line.substr(eq + 1)));
            continue;
        }
        if (!line.starts_with("mpc.")) continue;

        const auto eq = line.find('=');
        if (eq == std::string_view::npos) continue;
        const auto key = trim(line.substr(4, eq - 4));
        auto rhs = trim(line.substr(eq + 1));

        if (key == "baseMVA") {
            if (rhs.ends_with(';')) rhs.remove_suffix(1);
            const auto v = to_number(trim(rhs));
            if (!v) throw ParseError("line " + std::to_string(line_no) + ": bad mpc.baseMVA value", line_no);
            base_mva = *v;
            continue;
        }
        if (key == "bus" || key == "gen" || key == "branch") {
            if (!rhs.starts_with('[')) {
                throw ParseError("line " + std::to_string(line_no) + ": mpc." + std::string(key) +
                                     " must be a [ ... ] matrix",
                                 line_no);
            }
            if (blocks.contains(key)) {
                throw ParseError("line " + std::to_string(line_no) + ": duplicate mpc." + std::string(key),
                                 line_no);
            }
            auto& block = blocks[std::string(key)];
            block.line = line_no;
            rhs.remove_prefix(1);
            const auto close = rhs.find(']');
            scan_matrix_text(rhs.substr(0, close), line_no, block);
            if (close == std::string_view::npos) open_block = &block;
            continue;
        }
        // Anything else (version, gencost, bus_name, ...) is skipped, including multi-line values.
        if (rhs.starts_with('[') && rhs.find(']') == std::string_view::npos) skip_until = ']';
        if (rhs.starts_with('{') && rhs.find('}') == std::string_view::npos) skip_until = '}';
    }
    if (open_block) throw ParseError("unterminated matrix block (missing '];')", line_no);

    if (!base_mva) throw ParseError("missing block mpc.baseMVA");
    for (const char* req : {"bus", "gen", "branch"}) {
        if (!blocks.contains(std::string_view(req))) throw ParseError(std::string("missing block mpc.") + req);
    }

    RawCase c;
    c.name = std::move(name);
    c.base_mva = *base_mva;

    const auto& bus_rows = blocks.find("bus")->second.rows;
    if (bus_rows.empty()) throw ValidationError("no buses");
    c.buses.reserve(bus_rows.size());
    for (const auto& row : bus_rows) {
        require_columns(row, kBusCols, "bus");
        const auto& v = row.values;
        BusRecord b;
        b.id = to_id(v[0], row.line);
        b.bus_type = bus_type_from_code(v[1], row.line);
        b.pd = v[2];
        b.qd = v[3];
        b.gs = v[4];
        b.bs = v[5];
        b.vm = v[7];
        b.va = v[8];
        b.base_kv = v[9];
        c.buses.push_back(b);
    }
    for (const auto& row : blocks.find("gen")->second.rows) {
        require_columns(row, kGenCols, "gen");
        const auto& v = row.values;
        c.gens.push_back(GenRecord{to_id(v[0], row.line), v[1], v[2], v[5], v[7] > 0.0});
    }
    for (const auto& row : blocks.find("branch")->second.rows) {
        require_columns(row, kBranchCols, "branch");
        const auto& v = row.values;
        c.branches.push_back(BranchRecord{to_id(v[0], row.line), to_id(v[1], row.line), v[2], v[3], v[4],
                                          v[8], v[9], v[10] > 0.0});
    }
    return c;
}

RawCase load_matpower(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("file not found: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    auto stem = path;
    if (const auto slash = stem.find_last_of("/\\"); slash != std::string::npos) stem = stem.substr(slash + 1);
    if (stem.ends_with(".m")) stem.resize(stem.size() - 2);
    return parse_matpower(ss.str(), stem);
}

void write_matpower(std::ostream& out, const RawCase& c) {
    out << "function mpc = " << (c.name.empty() ? "case" : c.name) << "\n\n";
    out << "%% MATPOWER Case Format : Version 2\nmpc.version = '2';\n\n";
    out << "%% system MVA base\nmpc.baseMVA = " << fmt_double(c.base_mva) << ";\n\n";

    out << "%% bus data\n%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\n";
    out << "mpc.bus = [\n";
    for (const auto& b : c.buses) {
        out << '\t' << b.id << '\t' << static_cast<int>(b.bus_type) << '\t' << fmt_double(b.pd) << '\t'
            << fmt_double(b.qd) << '\t' << fmt_double(b.gs) << '\t' << fmt_double(b.bs) << "\t1\t"
            << fmt_double(b.vm) << '\t' << fmt_double(b.va) << '\t' << fmt_double(b.base_kv)
            << "\t1\t1.1\t0.9;\n";
    }
    out << "];\n\n";

    out << "%% generator data\n%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\n";
    out << "mpc.gen = [\n";
    for (const auto& g : c.gens) {
        out << '\t' << g.bus_id << '\t' << fmt_double(g.pg) << '\t' << fmt_double(g.qg) << "\t9999\t-9999\t"
            << fmt_double(g.vg) << '\t' << fmt_double(c.base_mva) << '\t' << (g.in_service ? 1 : 0)
            << "\t9999\t0;\n";
    }
    out << "];\n\n";

    out << "%% branch data\n%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax\n";
    out << "mpc.branch = [\n";
    for (const auto& br : c.branches) {
        out << '\t' << br.from_bus << '\t' << br.to_bus << '\t' << fmt_double(br.r) << '\t' << fmt_double(br.x)
            << '\t' << fmt_double(br.b) << "\t0\t0\t0\t" << fmt_double(br.tap) << '\t' << fmt_double(br.shift)
            << '\t' << (br.in_service ? 1 : 0) << "\t-360\t360;\n";
    }
    out << "];\n";
}

std::string write_matpower(const RawCase& c) {
    std::ostringstream ss;
    write_matpower(ss, c);
    return ss.str();
}

std::vector<std::size_t> component_labels(const RawCase& c) {
    std::unordered_map<int, std::size_t> index;
    for (std::size_t i = 0; i < c.buses.size(); ++i) index.emplace(c.buses[i].id, i);
    DisjointSets sets(c.buses.size());
    for (const auto& br : c.branches) {
        if (!br.in_service) continue;
        const auto f = index.find(br.from_bus);
        const auto t = index.find(br.to_bus);
        if (f != index.end() && t != index.end()) sets.unite(f->second, t->second);
    }
    std::vector<std::size_t> label(c.buses.size());
    for (std::size_t i = 0; i < label.size(); ++i) label[i] = sets.find(i);
    return label;
}

std::vector<Diagnostic> validate_case(const RawCase& c) {
    std::vector<Diagnostic> diags;
    auto error = [&](RecordKind kind, std::size_t idx, std::string msg) {
        diags.push_back({Severity::Error, kind, idx, std::move(msg)});
    };

    if (!(c.base_mva > 0.0)) error(RecordKind::Case, 0, "baseMVA must be positive");
    if (c.buses.empty()) {
        error(RecordKind::Case, 0, "no buses");
        return diags;
    }

    std::unordered_map<int, std::size_t> index;
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
        const auto& b = c.buses[i];
        if (b.id <= 0) error(RecordKind::Bus, i, "bus id " + std::to_string(b.id) + " is not positive");
        if (!index.emplace(b.id, i).second) error(RecordKind::Bus, i, "duplicate bus id " + std::to_string(b.id));
        if (!(b.vm > 0.0)) {
            diags.push_back({Severity::Warning, RecordKind::Bus, i,
                             "bus " + std::to_string(b.id) + " has non-positive Vm; start value falls back to 1.0"});
        }
    }
    for (std::size_t i = 0; i < c.gens.size(); ++i) {
        if (!index.contains(c.gens[i].bus_id)) {
            error(RecordKind::Gen, i, "generator references missing bus " + std::to_string(c.gens[i].bus_id));
        }
    }
    for (std::size_t i = 0; i < c.branches.size(); ++i) {
        const auto& br = c.branches[i];
        const auto label = "branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus);
        bool ends_ok = true;
        for (int end : {br.from_bus, br.to_bus}) {
            if (!index.contains(end)) {
                error(RecordKind::Branch, i, label + " references missing bus " + std::to_string(end));
                ends_ok = false;
            }
        }
        if (ends_ok && br.from_bus == br.to_bus) error(RecordKind::Branch, i, label + " is a self-loop");
        if (br.in_service && br.r == 0.0 && br.x == 0.0) error(RecordKind::Branch, i, label + " has r = x = 0");
    }

    const auto label = component_labels(c);
    std::map<std::size_t, std::vector<std::size_t>> slacks;
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
        slacks[label[i]];
        if (c.buses[i].bus_type == BusType::Slack) slacks[label[i]].push_back(i);
    }
    for (const auto& [root, members] : slacks) {
        if (members.empty()) {
            error(RecordKind::Bus, root,
                  "island containing bus " + std::to_string(c.buses[root].id) + " has no slack bus");
        } else if (members.size() > 1) {
            error(RecordKind::Bus, members[1],
                  "island containing bus " + std::to_string(c.buses[root].id) + " has " +
                      std::to_string(members.size()) + " slack buses");
        }
    }
    return diags;
}

bool has_errors(const std::vector<Diagnostic>& diags) {
    return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) { return d.severity == Severity::Error; });
}

std::string to_string(const Diagnostic& d) {
    static constexpr const char* kinds[] = {"case", "bus", "gen", "branch"};
    std::string s = d.severity == Severity::Error ? "error" : "warning";
    s += " [";
    s += kinds[static_cast<int>(d.kind)];
    s += " #" + std::to_string(d.index) + "]: " + d.message;
    return s;
}

RawCase replicate_case(const RawCase& c, std::size_t k) {
    if (k == 0) throw std::invalid_argument("replicate_case: k must be at least 1");
    const auto diags = validate_case(c);
    if (has_errors(diags)) throw ValidationError("replicate_case: input does not validate: " + to_string(diags.front()));

    int max_id = 0;
    for (const auto& b : c.buses) max_id = std::max(max_id, b.id);
    long long offset = 1;
    while (offset < max_id) offset *= 10;
    if (static_cast<long long>(k) * offset > std::numeric_limits<int>::max()) {
        throw std::invalid_argument("replicate_case: bus ids would overflow");
    }

    RawCase out;
    out.name = c.name + "x" + std::to_string(k);
    out.base_mva = c.base_mva;
    out.buses.reserve(c.buses.size() * k);
    out.gens.reserve(c.gens.size() * k);
    out.branches.reserve(c.branches.size() * k);
    for (std::size_t m = 0; m < k; ++m) {
        const int shift = static_cast<int>(static_cast<long long>(m) * offset);
        for (auto b : c.buses) {
            b.id += shift;
            out.buses.push_back(b);
        }
        for (auto g : c.gens) {
            g.bus_id += shift;
            out.gens.push_back(g);
        }
        for (auto br : c.branches) {
            br.from_bus += shift;
            br.to_bus += shift;
            out.branches.push_back(br);
        }
    }
    return out;
}

}  // namespace graphpf
