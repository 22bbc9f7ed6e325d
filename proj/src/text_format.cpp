#include "fsdd/text_format.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string_view>

#include "fsdd/error.hpp"

namespace fsdd {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

struct Header {
  int c = 0;
  int m = 0;
  int classes = 0;
};

Header parse_header(std::istream& in, const std::string& source, bool allow_classes) {
  std::string line;
  if (!next_line(in, line)) throw ParseError(source, 1, "missing header `C=<int> M=<int>`");
  std::map<std::string, int, std::less<>> kv;
  for (auto field : split_ws(line)) {
    const auto eq = field.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(source, 1, "malformed header field '" + std::string(field) + "'");
    }
    const auto key = field.substr(0, eq);
    const auto value = parse_int(field.substr(eq + 1));
    if (!value) {
      throw ParseError(source, 1, "header value for '" + std::string(key) + "' is not an integer");
    }
    const bool known = key == "C" || key == "M" || (allow_classes && key == "classes");
    if (!known) throw ParseError(source, 1, "unknown header key '" + std::string(key) + "'");
    if (!kv.emplace(std::string(key), *value).second) {
      throw ParseError(source, 1, "duplicate header key '" + std::string(key) + "'");
    }
  }
  if (!kv.contains("C") || !kv.contains("M")) {
    throw ParseError(source, 1, "header must define both C and M");
  }
  Header h{kv["C"], kv["M"], kv.contains("classes") ? kv["classes"] : 0};
  if (h.c <= 0) throw ParseError(source, 1, "C must be positive");
  if (h.m < 0) throw ParseError(source, 1, "M must be non-negative");
  if (h.classes < 0) throw ParseError(source, 1, "classes must be non-negative");
  return h;
}

template <class Range>
void write_row(std::ostream& out, const Range& values) {
  bool first = true;
  for (int v : values) {
    if (!first) out << ' ';
    out << v;
    first = false;
  }
  out << '\n';
}

}  // namespace

void write_token_file(std::ostream& out, int codebook_size, int cardinality,
                      std::span<const TokenMultiset> sets) {
  out << "C=" << codebook_size << " M=" << cardinality << '\n';
  for (const auto& s : sets) {
    if (s.codebook_size() != codebook_size || s.cardinality() != cardinality) {
      throw ValidationError("multiset shape does not match file header");
    }
    write_row(out, s.tokens());
  }
}

TokenFile read_token_file(std::istream& in, const std::string& source) {
  const Header h = parse_header(in, source, false);
  TokenFile file;
  file.codebook_size = h.c;
  file.cardinality = h.m;
  std::string line;
  std::size_t line_no = 1;
  while (next_line(in, line)) {
    ++line_no;
    const auto fields = split_ws(line);
    if (static_cast<int>(fields.size()) != h.m) {
      throw ParseError(source, line_no,
                       "expected " + std::to_string(h.m) + " tokens, found " +
                           std::to_string(fields.size()));
    }
    std::vector<int> tokens;
    tokens.reserve(fields.size());
    for (auto f : fields) {
      const auto v = parse_int(f);
      if (!v) throw ParseError(source, line_no, "token '" + std::string(f) + "' is not an integer");
      if (*v < 0 || *v >= h.c) {
        throw ParseError(source, line_no,
                         "token index " + std::to_string(*v) + " outside [0, " +
                             std::to_string(h.c) + ")");
      }
      tokens.push_back(*v);
    }
    file.sets.emplace_back(std::move(tokens), h.c, h.m);
    file.lines.push_back(line_no);
  }
  return file;
}

void write_count_file(std::ostream& out, const CountFile& file) {
  out << "C=" << file.codebook_size << " M=" << file.target_sum;
  if (file.num_classes > 0) out << " classes=" << file.num_classes;
  out << '\n';
  const bool labeled = file.num_classes > 0;
  if (labeled && file.labels.size() != file.rows.size()) {
    throw ValidationError("labeled count file needs one label per row");
  }
  for (std::size_t i = 0; i < file.rows.size(); ++i) {
    if (static_cast<int>(file.rows[i].size()) != file.codebook_size) {
      throw ValidationError("count row length does not match C");
    }
    if (labeled) out << file.labels[i] << ": ";
    write_row(out, file.rows[i]);
  }
}

CountFile read_count_file(std::istream& in, const std::string& source, SumCheck check) {
  const Header h = parse_header(in, source, true);
  CountFile file;
  file.codebook_size = h.c;
  file.target_sum = h.m;
  file.num_classes = h.classes;
  std::string line;
  std::size_t line_no = 1;
  while (next_line(in, line)) {
    ++line_no;
    std::string_view body = line;
    if (h.classes > 0) {
      const auto colon = body.find(':');
      if (colon == std::string_view::npos) {
        throw ParseError(source, line_no, "labeled row is missing '<label>:' prefix");
      }
      const auto fields = split_ws(body.substr(0, colon));
      const auto label = fields.size() == 1 ? parse_int(fields[0]) : std::nullopt;
      if (!label || *label < 0 || *label >= h.classes) {
        throw ParseError(source, line_no, "class label must be an integer in [0, " +
                                              std::to_string(h.classes) + ")");
      }
      file.labels.push_back(*label);
      body = body.substr(colon + 1);
    }
    const auto fields = split_ws(body);
    if (static_cast<int>(fields.size()) != h.c) {
      throw ParseError(source, line_no,
                       "expected " + std::to_string(h.c) + " counts, found " +
                           std::to_string(fields.size()));
    }
    std::vector<int> row;
    row.reserve(fields.size());
    for (auto f : fields) {
      const auto v = parse_int(f);
      if (!v) throw ParseError(source, line_no, "count '" + std::string(f) + "' is not an integer");
      if (*v < 0) throw ParseError(source, line_no, "negative count " + std::to_string(*v));
      row.push_back(*v);
    }
    if (check == SumCheck::strict && !satisfies_fixed_sum(row, h.m)) {
      throw ParseError(source, line_no,
                       "row violates the fixed-sum constraint (sum " +
                           std::to_string(total(row)) + ", expected " + std::to_string(h.m) +
                           ")");
    }
    file.rows.push_back(std::move(row));
    file.lines.push_back(line_no);
  }
  return file;
}

namespace {

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

}  // namespace

TokenFile load_token_file(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  return read_token_file(in, path.string());
}

void save_token_file(const std::filesystem::path& path, int codebook_size, int cardinality,
                     std::span<const TokenMultiset> sets) {
  std::ostringstream out;
  write_token_file(out, codebook_size, cardinality, sets);
  write_file_atomically(path, out.str());
}

CountFile load_count_file(const std::filesystem::path& path, SumCheck check) {
  auto in = open_for_read(path);
  return read_count_file(in, path.string(), check);
}

void save_count_file(const std::filesystem::path& path, const CountFile& file) {
  std::ostringstream out;
  write_count_file(out, file);
  write_file_atomically(path, out.str());
}

void write_file_atomically(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

}  // namespace fsdd
