#pragma once

#include <stdexcept>
#include <string>

namespace ioslab {

/// Argument outside the domain of an operation (negative radius, t1 > t2, ...).
struct domain_error : std::domain_error {
    using std::domain_error::domain_error;
};

/// Comparison function does not belong to the class an operation requires.
struct class_error : std::logic_error {
    using std::logic_error::logic_error;
};

/// Envelope or gain fitting could not produce a valid function.
struct fit_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Table lookup would need extrapolation outside the tabulated region.
struct table_gap_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite values produced by a right-hand side at a finite state.
struct integration_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Unknown zoo id, missing witness, unknown construction name.
struct lookup_error : std::out_of_range {
    using std::out_of_range::out_of_range;
};

/// Trajectory left every bounded set before the requested event.
struct blow_up_error : std::runtime_error {
    double time;
    blow_up_error(const std::string& what, double t) : std::runtime_error(what), time(t) {}
};

/// Descriptor diagnostic with a 1-based source location.
struct parse_error : std::runtime_error {
    enum class kind { syntax, unknown_identifier, dimension_mismatch };
    kind code;
    int line;
    int column;
    parse_error(kind k, int ln, int col, const std::string& msg)
        : std::runtime_error("line " + std::to_string(ln) + ", col " + std::to_string(col) + ": " + msg),
          code(k), line(ln), column(col) {}
};

} // namespace ioslab
