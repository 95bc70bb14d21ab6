// Command-line front end: one subcommand per run mode.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cavmag/harness.hpp"

namespace {

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Magnetic phases of a cavity-coupled two-component Fermi chain"};
  app.set_version_flag("--version", std::string(cavmag::kVersion));
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int workers = 0;
  std::uint64_t seed = 0;
  CLI::App* chosen = nullptr;
  std::optional<cavmag::Mode> mode;

  for (cavmag::Mode m : {cavmag::Mode::ground, cavmag::Mode::observables, cavmag::Mode::sweep,
                         cavmag::Mode::phase_diagram, cavmag::Mode::meanfield, cavmag::Mode::scaling}) {
    auto* sub = app.add_subcommand(cavmag::to_string(m), "run mode " + cavmag::to_string(m));
    sub->add_option("--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides config and CAVMAG_OUT_DIR)");
    sub->add_option("--workers", workers, "worker threads (overrides config and CAVMAG_WORKERS)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "solver start-vector seed (overrides config)");
    sub->callback([&, m, sub] {
      mode = m;
      chosen = sub;
    });
  }
  CLI11_PARSE(app, argc, argv);

  try {
    cavmag::RunConfig c = cavmag::load_config(config_path, mode);
    if (auto v = env("CAVMAG_OUT_DIR")) c.output_dir = *v;
    if (auto v = env("CAVMAG_WORKERS")) {
      try {
        c.workers = std::stoi(*v);
      } catch (const std::exception&) {
        throw cavmag::ConfigError("CAVMAG_WORKERS: expected a positive integer");
      }
      if (c.workers < 1) throw cavmag::ConfigError("CAVMAG_WORKERS: expected a positive integer");
    }
    if (chosen->count("--out")) c.output_dir = out_dir;
    if (chosen->count("--workers")) c.workers = workers;
    if (chosen->count("--seed")) c.lanczos.seed = seed;
    c.echo["output_dir"] = c.output_dir;
    c.echo["workers"] = c.workers;
    c.echo["seed"] = c.lanczos.seed;

    cavmag::RunOutcome out = cavmag::execute(c);
    const auto files = cavmag::write_results(out, c, c.output_dir);
    const std::size_t n = out.mode == cavmag::Mode::meanfield ? out.meanfield.size() : out.points.size();
    std::cout << cavmag::to_string(c.mode) << ": " << n << " points, " << out.failed_points() << " failed";
    if (!out.boundaries.empty()) std::cout << ", " << out.boundaries.size() << " boundary searches";
    if (c.mode == cavmag::Mode::scaling && !out.fit) std::cout << "; " << out.fit_error;
    std::cout << "\n";
    for (const auto& f : files) std::cout << "  " << (std::filesystem::path(c.output_dir) / f).string() << "\n";
    return out.exit_code();
  } catch (const cavmag::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const cavmag::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
