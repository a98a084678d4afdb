#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "json.hpp"
#include "rydgate/error.hpp"

#ifndef RYDGATE_DEFAULT_CONFIG
#define RYDGATE_DEFAULT_CONFIG "config/experiment.toml"
#endif

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

int report(const std::string& kind, const std::string& message, int code) {
  std::cerr << nlohmann::json{{"error", {{"type", kind}, {"message", message}, {"exit_code", code}}}}.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace rydgate;

  CLI::App app{"Heteronuclear Rydberg blockade gate simulator"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path = RYDGATE_DEFAULT_CONFIG;
  std::string out_dir;
  std::string format = "csv";
  long long seed = -1;
  int jobs = 0;
  app.add_option("--config", config_path, "Run configuration (TOML)");
  app.add_option("--seed", seed, "Random seed (overrides run.seed)")->check(CLI::NonNegativeNumber);
  app.add_option("--jobs", jobs, "Worker threads (overrides run.jobs)")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "Output directory (overrides run.output_dir)");
  app.add_option("--format", format, "Table format")->check(CLI::IsMember({"csv", "json"}));

  const std::pair<const char*, const char*> simple[] = {
      {"structure", "Level energies and dipole matrix elements"},
      {"blockade", "P85 and blockade shift versus offset y"},
      {"thermal", "Thermally averaged P85 versus temperature"},
      {"blockade-demo", "Rabi oscillation of the target with and without control"},
      {"cnot", "CNOT phase scan, truth table and fidelity"},
      {"entangle", "Bell state, parity scan and fidelity report"},
      {"doppler", "Doppler dephasing factor and fidelity bound"},
  };
  for (const auto& [name, help] : simple) app.add_subcommand(name, help);
  auto* fit = app.add_subcommand("fit", "Fit a CSV data file");
  std::string fit_file;
  std::string fit_model = "damped";
  fit->add_option("file", fit_file, "CSV with x,y[,sigma]")->required();
  fit->add_option("--model", fit_model, "Model")->check(CLI::IsMember({"damped", "parity"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("usage", e.what(), kExitConfig);
  }

  try {
    cli::Context ctx;
    ctx.cfg = cli::load_run_config(config_path);
    if (seed >= 0) ctx.cfg.seed = static_cast<std::uint64_t>(seed);
    if (jobs > 0) ctx.cfg.jobs = static_cast<unsigned>(jobs);
    if (!out_dir.empty()) ctx.cfg.output_dir = out_dir;
    ctx.format = format == "json" ? cli::OutputFormat::json : cli::OutputFormat::csv;

    const std::string name = app.get_subcommands().front()->get_name();
    cli::CommandOutput out;
    if (name == "structure") out = cli::cmd_structure(ctx);
    else if (name == "blockade") out = cli::cmd_blockade(ctx);
    else if (name == "thermal") out = cli::cmd_thermal(ctx);
    else if (name == "blockade-demo") out = cli::cmd_blockade_demo(ctx);
    else if (name == "cnot") out = cli::cmd_cnot(ctx);
    else if (name == "entangle") out = cli::cmd_entangle(ctx);
    else if (name == "doppler") out = cli::cmd_doppler(ctx);
    else out = cli::cmd_fit(ctx, fit_file, fit_model);

    nlohmann::json summary = out.summary;
    summary["files"] = nlohmann::json::array();
    for (const auto& f : out.files) summary["files"].push_back(f.string());
    summary["metadata"] = cli::metadata(ctx, name);
    std::cout << summary.dump(2) << "\n";
    return 0;
  } catch (const ConfigError& e) {
    return report("config", e.what(), kExitConfig);
  } catch (const InvalidInput& e) {
    return report("invalid_input", e.what(), kExitConfig);
  } catch (const DomainError& e) {
    return report("domain", e.what(), kExitConfig);
  } catch (const NumericalError& e) {
    return report("numerical", e.what(), kExitNumerical);
  } catch (const std::exception& e) {
    return report("runtime", e.what(), kExitNumerical);
  }
}
