#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "config.hpp"
#include "json.hpp"

namespace rydgate::cli {

enum class OutputFormat { csv, json };

struct Context {
  RunConfig cfg;
  OutputFormat format = OutputFormat::csv;
};

struct CommandOutput {
  std::vector<std::filesystem::path> files;
  nlohmann::json summary;
};

// Tabular output: cells are JSON scalars so the CSV and JSON writers share
// one representation. Column names carry SI units.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<nlohmann::json>> rows;
};

nlohmann::json metadata(const Context& ctx, const std::string& command);
std::filesystem::path write_table(const Context& ctx, const std::string& command, const Table& table);
std::filesystem::path write_json(const Context& ctx, const std::string& command, const std::string& name,
                                 const nlohmann::json& body);

CommandOutput cmd_structure(const Context& ctx);
CommandOutput cmd_blockade(const Context& ctx);
CommandOutput cmd_thermal(const Context& ctx);
CommandOutput cmd_blockade_demo(const Context& ctx);
CommandOutput cmd_cnot(const Context& ctx);
CommandOutput cmd_entangle(const Context& ctx);
CommandOutput cmd_doppler(const Context& ctx);
// model: "damped" or "parity".
CommandOutput cmd_fit(const Context& ctx, const std::filesystem::path& data, const std::string& model);

}  // namespace rydgate::cli
