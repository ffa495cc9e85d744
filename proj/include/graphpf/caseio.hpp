#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace graphpf {

enum class BusType { PQ = 1, PV = 2, Slack = 3 };

struct BusRecord {
    int id = 0;
    BusType bus_type = BusType::PQ;
    double pd = 0.0;  // MW
    double qd = 0.0;  // MVAr
    double gs = 0.0;  // MW at 1.0 pu
    double bs = 0.0;  // MVAr at 1.0 pu
    double vm = 1.0;  // pu
    double va = 0.0;  // degrees
    double base_kv = 0.0;

    bool operator==(const BusRecord&) const = default;
};

struct GenRecord {
    int bus_id = 0;
    double pg = 0.0;  // MW
    double qg = 0.0;  // MVAr
    double vg = 1.0;  // pu
    bool in_service = true;

    bool operator==(const GenRecord&) const = default;
};

struct BranchRecord {
    int from_bus = 0;
    int to_bus = 0;
    double r = 0.0;
    double x = 0.0;
    double b = 0.0;
    double tap = 0.0;    // 0 means plain line
    double shift = 0.0;  // degrees
    bool in_service = true;

    bool operator==(const BranchRecord&) const = default;
};

struct RawCase {
    std::string name;
    double base_mva = 100.0;
    std::vector<BusRecord> buses;
    std::vector<GenRecord> gens;
    std::vector<BranchRecord> branches;

    bool operator==(const RawCase&) const = default;
};

/// Raised for malformed case text. `line()` is 0 when the error is not tied to a line.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Raised when a parsed case violates a structural invariant (bad bus type, no buses, ...).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Severity { Warning, Error };

enum class RecordKind { Case, Bus, Gen, Branch };

struct Diagnostic {
    Severity severity = Severity::Error;
    RecordKind kind = RecordKind::Case;
    std::size_t index = 0;  // position of the offending record in its table
    std::string message;
};

/// Parses MATPOWER `.m` case text. Only `mpc.baseMVA`, `mpc.bus`, `mpc.gen` and
/// `mpc.branch` are consumed; every other assignment is skipped.
RawCase parse_matpower(std::string_view source_text, std::string name = "case");

/// Reads and parses a case file; throws std::runtime_error if the file cannot be opened.
RawCase load_matpower(const std::string& path);

/// Serializes in MATPOWER v2 layout. Values are printed with round-trip precision.
void write_matpower(std::ostream& out, const RawCase& c);
std::string write_matpower(const RawCase& c);

/// Empty result iff the case satisfies every structural invariant and each connected
/// component (over in-service branches) holds exactly one slack bus.
std::vector<Diagnostic> validate_case(const RawCase& c);

bool has_errors(const std::vector<Diagnostic>& diags);
std::string to_string(const Diagnostic& d);

/// Connected-component label per bus (index into c.buses), over in-service branches.
/// Branches naming unknown buses are ignored.
std::vector<std::size_t> component_labels(const RawCase& c);

/// k disjoint copies of `c`. Copy m shifts every bus id by m times the smallest power of
/// ten that is >= the largest bus id. Throws std::invalid_argument for k == 0 and
/// ValidationError if `c` does not validate.
RawCase replicate_case(const RawCase& c, std::size_t k);

}  // namespace graphpf
