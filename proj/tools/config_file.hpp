#pragma once

#include <string>
#include <vector>

namespace stfcn::cli {

struct ConfigEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

/// Reads `key = value` lines. Blank lines and lines starting with '#' are
/// skipped. Throws ConfigError naming the line for anything else.
std::vector<ConfigEntry> read_config_file(const std::string& path);

/// Removes `--config FILE` / `--config=FILE` from args and returns FILE, or
/// an empty string when absent.
std::string extract_config_path(std::vector<std::string>& args);

}  // namespace stfcn::cli
