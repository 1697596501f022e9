#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "socstatus/error.hpp"

namespace socstatus {

// ---------------------------------------------------------------------------
// Input hashing
// ---------------------------------------------------------------------------

/// 64-bit FNV-1a, incrementally.
class Fnv1a {
 public:
  void update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      h_ ^= c;
      h_ *= 0x100000001b3ULL;
    }
  }
  std::uint64_t value() const { return h_; }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h_));
    return buf;
  }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Formatting
// ---------------------------------------------------------------------------

inline std::string fixed(double x, int precision = 4) {
  if (std::isnan(x)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, x);
  return buf;
}

inline std::string fixed(const std::optional<double>& x, int precision = 4) {
  return x ? fixed(*x, precision) : "NA";
}

inline nlohmann::json json_or_null(const std::optional<double>& x) {
  return x ? nlohmann::json(*x) : nlohmann::json();
}

/// Tab-separated table whose cells are padded so columns line up.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }

  std::string render() const {
    std::vector<std::size_t> width(header.size(), 0);
    auto measure = [&](const std::vector<std::string>& r) {
      for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) width[c] = std::max(width[c], r[c].size());
    };
    measure(header);
    for (const auto& r : rows) measure(r);
    std::string out;
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t c = 0; c < r.size(); ++c) {
        out += r[c];
        if (c + 1 < r.size()) {
          out.append(width[c] - r[c].size(), ' ');
          out += '\t';
        }
      }
      out += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
  }
};

/// `# key: value` provenance lines for text outputs.
inline std::string comment_header(const nlohmann::json& run_config, const std::string& input_hash) {
  return "# run_config: " + run_config.dump() + "\n# input_hash: fnv1a64:" + input_hash + "\n";
}

// ---------------------------------------------------------------------------
// Atomic output
// ---------------------------------------------------------------------------

/// Collects output files in memory and publishes them together: each file is
/// written to a temporary sibling and renamed into place only after every
/// file was written successfully.
class OutputSet {
 public:
  void add(std::string name, std::string content) { files_.push_back({std::move(name), std::move(content)}); }
  const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

  void commit(const std::filesystem::path& dir) const {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create output directory " + dir.string() + ": " + ec.message());
    const std::string suffix = ".tmp." + std::to_string(::getpid());
    std::vector<fs::path> temps;
    auto cleanup = [&] {
      for (const auto& t : temps) fs::remove(t, ec);
    };
    for (const auto& [name, content] : files_) {
      const fs::path tmp = dir / ("." + name + suffix);
      temps.push_back(tmp);
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << content;
      out.close();
      if (!out) {
        cleanup();
        throw Error(ErrorKind::Io, "cannot write " + tmp.string());
      }
    }
    for (std::size_t i = 0; i < files_.size(); ++i) {
      fs::rename(temps[i], dir / files_[i].first, ec);
      if (ec) {
        cleanup();
        throw Error(ErrorKind::Io, "cannot publish " + files_[i].first + ": " + ec.message());
      }
    }
  }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

}  // namespace socstatus
