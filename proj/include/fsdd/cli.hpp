#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace fsdd {

/// Exit codes of run().
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

/// `key = value` lines; `#` starts a comment; blank lines are skipped.
struct ConfigFile {
  std::map<std::string, std::string> values;
  std::map<std::string, std::size_t> lines;  ///< 1-based source line per key
  std::string source;

  /// Throws ParseError (file:line) on a malformed line or a repeated key,
  /// IoError when the file cannot be read.
  static ConfigFile load(const std::filesystem::path& path);
  static ConfigFile parse(std::istream& in, const std::string& source);
};

/// Entry point behind the `fsdd` tool. args[0] is the program name, args[1]
/// the command. Keys from `--config FILE` become flags of the same name;
/// explicit flags take precedence. Config keys must name a flag of some
/// command; keys the chosen command does not take are ignored.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fsdd
