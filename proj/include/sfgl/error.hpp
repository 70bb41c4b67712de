#pragma once

#include <iostream>
#include <stdexcept>
#include <string>

namespace sfgl {

// Failure categories surfaced by the library; the CLI maps them onto
// exit codes and error reports.
enum class errc {
  parse,     // malformed input text
  bounds,    // index outside declared dimensions
  domain,    // value outside a function's mathematical domain
  config,    // infeasible request (budgets, parameters)
  shape,     // dimension mismatch between operands
  contract,  // caller violated an operation precondition
  fit,       // degenerate sample, no model can be fitted
  training,  // optimisation diverged
  numeric,   // NaN/Inf appeared mid-computation
  io,        // file could not be read or written
};

inline const char* errc_name(errc k) {
  switch (k) {
    case errc::parse: return "parse";
    case errc::bounds: return "bounds";
    case errc::domain: return "domain";
    case errc::config: return "config";
    case errc::shape: return "shape";
    case errc::contract: return "contract";
    case errc::fit: return "fit";
    case errc::training: return "training";
    case errc::numeric: return "numeric";
    case errc::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(errc kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}

  errc kind() const { return kind_; }

 private:
  errc kind_;
};

[[noreturn]] inline void fail(errc kind, const std::string& msg) {
  throw Error(kind, msg);
}

// Non-fatal diagnostics (clamped parameters, empty test sets, ...).
inline void warn(const std::string& msg) {
  std::cerr << "warning: " << msg << "\n";
}

}  // namespace sfgl
