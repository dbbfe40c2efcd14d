#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "qlaser/harness.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw qlaser::InvalidArgument("cannot read spec file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Run a coupled-laser-lattice experiment described by a JSON spec"};
  std::string spec_path, out_path;
  std::optional<std::size_t> threads;
  std::uint64_t seed_offset = 0;
  app.add_option("spec", spec_path, "experiment spec (JSON)")->required();
  app.add_option("--out", out_path, "output CSV path");
  app.add_option("--threads", threads, "worker threads (overridden by QLASER_THREADS)");
  app.add_option("--seed-offset", seed_offset, "added to every seed in the spec");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  qlaser::ExperimentSpec spec;
  std::string text;
  std::size_t n_threads = 1;
  try {
    text = slurp(spec_path);
    spec = qlaser::parse_spec(text);
    if (out_path.empty()) out_path = spec.output.value_or("");
    if (out_path.empty()) throw qlaser::InvalidArgument("no output path: pass --out or set 'output'");
    n_threads = qlaser::resolve_threads(threads);
  } catch (const std::exception& e) {
    std::cerr << "invalid spec: " << e.what() << '\n';
    return 2;
  }

  std::ofstream os(out_path);
  if (!os) {
    std::cerr << "cannot open " << out_path << " for writing\n";
    return 2;
  }
  qlaser::CsvWriter w(os);
  qlaser::write_provenance(w, text, spec, seed_offset);
  w.header();

  const auto outcome = qlaser::run_experiment(spec, n_threads, seed_offset);
  w.rows(outcome.rows);
  w.rows(outcome.summary);
  if (outcome.exit_code != 0) w.comment("aborted: " + outcome.message);
  w.flush();
  if (outcome.exit_code != 0) {
    std::cerr << (outcome.exit_code == 2 ? "invalid input: " : "numerical failure: ") << outcome.message << '\n';
    return outcome.exit_code;
  }
  for (const auto& r : outcome.summary) std::cout << r.observable << " seed=" << r.seed << " " << r.value << '\n';
  return 0;
}
