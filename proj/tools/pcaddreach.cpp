#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>

#include "pcaddreach/conformal.hpp"
#include "pcaddreach/parallel.hpp"
#include "pcaddreach/pipeline.hpp"

namespace {

unsigned resolve_threads(int flag_value) {
  if (flag_value >= 0) return pcaddreach::resolve_thread_count(static_cast<unsigned>(flag_value));
  if (const char* env = std::getenv("PCADDREACH_THREADS")) {
    char* end = nullptr;
    const long parsed = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || parsed < 0)
      throw pcaddreach::ConfigError("PCADDREACH_THREADS: expected a nonnegative integer");
    return pcaddreach::resolve_thread_count(static_cast<unsigned>(parsed));
  }
  return pcaddreach::resolve_thread_count(0);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"star-set flowpipes with conformal error inflation"};
  app.require_subcommand(1);

  std::string config_path, out_dir, phase_override;
  int threads = -1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run configuration JSON")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory for artifacts")->required();
    sub->add_option("--threads", threads, "worker threads (0 = auto; default from PCADDREACH_THREADS)");
  };

  for (const auto& name : pcaddreach::Pipeline::phase_names())
    add_common(app.add_subcommand(name, "run the " + name + " phase"));
  CLI::App* run = app.add_subcommand("run", "run every phase in order");
  add_common(run);
  run->add_option("--phase", phase_override, "run only this phase");

  CLI11_PARSE(app, argc, argv);

  try {
    pcaddreach::RunConfig config = pcaddreach::load_config(config_path);
    pcaddreach::Pipeline pipeline(std::move(config), out_dir, resolve_threads(threads));
    const std::string& command = app.get_subcommands().front()->get_name();
    if (command == "run" && phase_override.empty())
      pipeline.run_all();
    else
      pipeline.run_phase(command == "run" ? phase_override : command);
    return 0;
  } catch (const pcaddreach::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const pcaddreach::MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const pcaddreach::InfeasibleCalibrationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
