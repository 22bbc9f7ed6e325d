#pragma once

// Line-oriented text formats shared by the CLI and the data loaders.
//
// Token-set file:
//   C=<int> M=<int>
//   <M space-separated token indices>      (one multiset per line)
//
// Count-vector file:
//   C=<int> M=<int> [classes=<int>]
//   [<label>:] <C space-separated counts>   (one vector per line)
//
// The optional `classes=` key marks a labeled file; every row then starts
// with its class label followed by a colon.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fsdd/multiset.hpp"

namespace fsdd {

struct TokenFile {
  int codebook_size = 0;
  int cardinality = 0;
  std::vector<TokenMultiset> sets;
  std::vector<std::size_t> lines;  ///< 1-based source line of each set
};

struct CountFile {
  int codebook_size = 0;
  int target_sum = 0;
  int num_classes = 0;  ///< 0 means unlabeled
  std::vector<std::vector<int>> rows;
  std::vector<int> labels;  ///< empty when unlabeled
  std::vector<std::size_t> lines;
};

enum class SumCheck {
  strict,  ///< every row must be a valid CountVector
  raw,     ///< only length and non-negativity are checked (unconstrained samples)
};

void write_token_file(std::ostream& out, int codebook_size, int cardinality,
                      std::span<const TokenMultiset> sets);
TokenFile read_token_file(std::istream& in, const std::string& source);

void write_count_file(std::ostream& out, const CountFile& file);
CountFile read_count_file(std::istream& in, const std::string& source,
                          SumCheck check = SumCheck::strict);

TokenFile load_token_file(const std::filesystem::path& path);
void save_token_file(const std::filesystem::path& path, int codebook_size, int cardinality,
                     std::span<const TokenMultiset> sets);
CountFile load_count_file(const std::filesystem::path& path,
                          SumCheck check = SumCheck::strict);
void save_count_file(const std::filesystem::path& path, const CountFile& file);

/// Writes `contents` to a sibling temporary and renames it over `path`.
void write_file_atomically(const std::filesystem::path& path, const std::string& contents);

}  // namespace fsdd
