// polytransfer run <config> | polytransfer list

#include <iostream>

#include <CLI11.hpp>

#include "polytransfer/config.hpp"
#include "polytransfer/error.hpp"
#include "polytransfer/experiments.hpp"

namespace px = polytransfer::experiments;

int main(int argc, char** argv) {
  CLI::App app{"Distribution-shift transfer experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string root_override;
  auto* run = app.add_subcommand("run", "run the experiment described by a config file");
  run->add_option("config", config_path, "path to a key = value config")->required()->check(CLI::ExistingFile);
  run->add_option("--output-root", root_override, "output root (default: $POLYTRANSFER_OUTPUT_ROOT or ./results)");

  auto* list = app.add_subcommand("list", "print the experiment catalog");

  CLI11_PARSE(app, argc, argv);

  if (list->parsed()) {
    for (const auto& e : px::catalog()) std::cout << e.name << "\t" << e.summary << '\n';
    return 0;
  }

  try {
    auto cfg = polytransfer::config::Config::load(config_path);
    const auto root = root_override.empty() ? px::output_root() : std::filesystem::path(root_override);
    const auto dir = px::run(cfg, std::cerr, root);
    std::cout << dir.string() << '\n';
  } catch (const polytransfer::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    if (std::string(e.what()).find("unknown experiment") != std::string::npos) std::cerr << '\n' << app.help();
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
