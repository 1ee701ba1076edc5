#pragma once

// Output plumbing: CSV text for every experiment table, atomic file writes,
// SHA-256 digests and the run manifest. Link OpenSSL::Crypto when using the
// hashing helpers.

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <unistd.h>

#include "nsflows/config.hpp"
#include "nsflows/eval.hpp"

namespace nsflows {

inline constexpr const char* kToolVersion = "0.1.0";

/// Shortest decimal that reads back to the same double.
[[nodiscard]] inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), res.ptr};
}

/// Inverse of format_double; accepts subnormals, unlike std::stod.
[[nodiscard]] inline double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw InvalidArgument("not a number: '" + s + "'");
  return v;
}

// ---------------------------------------------------------------------------
// CSV tables

[[nodiscard]] inline std::string particles_csv(const FlowComparison& cmp) {
  std::ostringstream out;
  out << "mode,atom_index,x0,x1,weight\n";
  for (const auto& m : cmp.modes) {
    const auto& mu = m.final_measure;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      out << to_string(m.mode) << ',' << i << ',' << format_double(mu.atoms()(0, i)) << ','
          << format_double(mu.atoms()(1, i)) << ',' << format_double(mu.weight(i)) << '\n';
    }
  }
  return out.str();
}

[[nodiscard]] inline std::string init_csv(const ParticleMeasure& init) {
  std::ostringstream out;
  out << "atom_index,x0,x1,weight\n";
  for (Eigen::Index i = 0; i < init.size(); ++i) {
    out << i << ',' << format_double(init.atoms()(0, i)) << ',' << format_double(init.atoms()(1, i)) << ','
        << format_double(init.weight(i)) << '\n';
  }
  return out.str();
}

[[nodiscard]] inline std::string w2_csv(const FlowComparison& cmp) {
  std::ostringstream out;
  out << "mode,w2\n";
  for (const auto& m : cmp.modes) out << to_string(m.mode) << ',' << format_double(m.w2) << '\n';
  return out.str();
}

[[nodiscard]] inline std::string replicates_csv(const ExperimentResult& r) {
  std::ostringstream out;
  out << "n,arm,replicate,seed,w2\n";
  for (const auto& row : r.rows) {
    out << row.n << ',' << row.arm << ',' << row.replicate << ',' << row.seed << ',' << format_double(row.w2) << '\n';
  }
  return out.str();
}

[[nodiscard]] inline std::string bands_csv(const ExperimentResult& r) {
  std::ostringstream out;
  out << "n,arm,mean,lower,upper\n";
  for (const auto& b : r.bands) {
    out << b.n << ',' << b.arm << ',' << format_double(b.band.mean) << ',' << format_double(b.band.lower) << ','
        << format_double(b.band.upper) << '\n';
  }
  return out.str();
}

/// Per-step trace of a single flow: observation and ESS.
[[nodiscard]] inline std::string trace_csv(const FlowRun& run) {
  std::ostringstream out;
  out << "step,obs0,obs1,ess\n";
  for (const auto& rec : run.trace) {
    out << rec.step << ',' << format_double(rec.observation[0]) << ',' << format_double(rec.observation[1]) << ','
        << format_double(rec.ess) << '\n';
  }
  return out.str();
}

/// Minimal CSV reader for the files this library writes (no quoting).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw InvalidArgument("csv: missing column " + name);
  }
};

[[nodiscard]] inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument(path.string() + ": empty file");
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    t.rows.push_back(split(line));
    if (t.rows.back().size() != t.header.size()) throw InvalidArgument(path.string() + ": ragged row");
  }
  return t;
}

// ---------------------------------------------------------------------------
// Files and hashes

[[nodiscard]] inline std::string sha256_hex(const std::string& data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256: digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xF]);
  }
  return out;
}

/// Writes via a sibling temporary file and rename, so readers never see a
/// partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error("write failed for " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

/// Collects outputs in memory; nothing touches the disk until commit(), which
/// writes every file atomically and then the manifest.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void add(const std::string& name, std::string content) { files_[name] = std::move(content); }

  [[nodiscard]] const std::map<std::string, std::string>& files() const { return files_; }

  /// Writes the files and a manifest.json recording hashes, the config
  /// snapshot and the seed scheme. Returns the manifest.
  Json commit(const std::string& subcommand, const Config& cfg, double wall_seconds) const {
    Json manifest;
    manifest["tool"] = "nsflows";
    manifest["version"] = kToolVersion;
    manifest["subcommand"] = subcommand;
    manifest["master_seed"] = cfg.experiment.seed;
    manifest["seed_scheme"] =
        "splitmix64: derive(s, k) = splitmix64(splitmix64(s) ^ splitmix64(k + 0x632BE59BD9B4E019)); replicate seed = derive(derive(master, n), b); "
        "streams per replicate: data=1, init=2, reference=3, flow=4, bootstrap=5";
    manifest["config"] = serialise_config(cfg);
    Json hashes = Json::object();
    for (const auto& [name, content] : files_) hashes[name] = sha256_hex(content);
    manifest["files"] = hashes;
    manifest["wall_seconds"] = wall_seconds;
    for (const auto& [name, content] : files_) write_file_atomic(dir_ / name, content);
    write_file_atomic(dir_ / "manifest.json", manifest.dump(2) + "\n");
    return manifest;
  }

 private:
  std::filesystem::path dir_;
  std::map<std::string, std::string> files_;
};

}  // namespace nsflows
