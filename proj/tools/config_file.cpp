#include "config_file.hpp"

#include <fstream>

#include "stfcn/errors.hpp"

namespace stfcn::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<ConfigEntry> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::vector<ConfigEntry> out;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string text = trim(raw);
    if (text.empty() || text[0] == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line) + ": expected key=value, got '" + text + "'");
    ConfigEntry e{trim(text.substr(0, eq)), trim(text.substr(eq + 1)), line};
    if (e.key.empty()) throw ConfigError(path + ":" + std::to_string(line) + ": empty key");
    out.push_back(std::move(e));
  }
  return out;
}

std::string extract_config_path(std::vector<std::string>& args) {
  std::string path;
  for (std::size_t k = 0; k < args.size();) {
    if (args[k] == "--config") {
      if (k + 1 >= args.size()) throw ConfigError("--config needs a file argument");
      path = args[k + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(k), args.begin() + static_cast<std::ptrdiff_t>(k) + 2);
    } else if (args[k].rfind("--config=", 0) == 0) {
      path = args[k].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(k));
    } else {
      ++k;
    }
  }
  return path;
}

}  // namespace stfcn::cli
