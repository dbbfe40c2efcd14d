#pragma once

// Result rows and the comma-separated writer. `#` lines carry provenance.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "qlaser/error.hpp"

namespace qlaser {

struct ExperimentRow {
  std::string mode;
  std::size_t N = 0;
  double K_bond = 0.0;
  double h_field = 0.0;
  double epsilon_abs = 0.0;
  double phi = 0.0;
  std::string observable;
  double value = 0.0;
  double std_error = 0.0;
  double theory_paper = 0.0;
  double theory_errorprop = 0.0;
  double finite_size_metric = 0.0;
  std::uint64_t seed = 0;
  double wall_time = 0.0;
};

inline constexpr std::string_view kCsvHeader =
    "mode,N,K_bond,h_field,epsilon_abs,phi,observable,value,std_error,theory_paper,theory_errorprop,"
    "finite_size_metric,seed,wall_time";

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  void comment(std::string_view line) { os_ << "# " << line << '\n'; }

  void header() { os_ << kCsvHeader << '\n'; }

  void row(const ExperimentRow& r) {
    require(r.observable.find(',') == std::string::npos, "observable names must not contain commas");
    os_ << r.mode << ',' << r.N << ',' << format_number(r.K_bond) << ',' << format_number(r.h_field) << ','
        << format_number(r.epsilon_abs) << ',' << format_number(r.phi) << ',' << r.observable << ','
        << format_number(r.value) << ',' << format_number(r.std_error) << ',' << format_number(r.theory_paper) << ','
        << format_number(r.theory_errorprop) << ',' << format_number(r.finite_size_metric) << ',' << r.seed << ','
        << format_number(r.wall_time) << '\n';
  }

  void rows(const std::vector<ExperimentRow>& rs) {
    for (const auto& r : rs) row(r);
  }

  void flush() { os_.flush(); }

 private:
  std::ostream& os_;
};

}  // namespace qlaser
