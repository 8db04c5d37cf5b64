#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "rwevade/trace.hpp"

namespace rwevade {

// One behavioral class of benign processes.
struct BenignClassSpec {
  OpSet ops;                         // main ops the class performs
  double prevalence = 0.0;           // percent of benign processes
  std::array<double, 4> ratio{};     // DL:RD:WT:RN
  double rd_entropy = 0.0;
  double wt_entropy = 0.0;
  double file_access_fraction = 0.0;
};

// Benign processes that sweep files in traversal order: indexers, scanners,
// backup and sync clients, archivers. Each touches a uniform fraction of the
// census in [min_fraction, max_fraction] and is drawn from within the benign
// class with the same ops.
struct BulkSpec {
  OpSet ops;
  double share = 0.0;  // fraction of all benign traces, taken from its class
  std::array<double, 4> ratio{};
  double rd_entropy = 0.0;
  double wt_entropy = 0.0;
  double min_fraction = 0.05;  // of census files touched
  double max_fraction = 1.0;
};

std::vector<BulkSpec> default_bulk_processes();

// The fifteen classes observed on real benign processes, with their op
// ratios, payload entropies and file-access fractions.
std::vector<BenignClassSpec> default_benign_classes();

struct GenConfig {
  std::uint64_t seed = 1;

  // census
  std::size_t n_files = 3000;
  std::size_t n_dirs = 150;
  std::map<std::string, double> ext_mix;  // probabilities
  double size_median = 65536.0;
  double size_sigma = 1.5;

  // benign population
  std::size_t n_benign = 2000;
  std::vector<BenignClassSpec> benign_classes;
  std::vector<BulkSpec> bulk;
  double file_budget_noise = 0.2;  // uniform relative jitter on files touched
  double ops_mu = 0.0;             // log-normal op volume per file touched
  double ops_sigma = 0.5;
  double entropy_concentration = 50.0;
  // Per-trace spread of the class entropy mean; 0 pins every trace to it.
  double trace_entropy_concentration = 6.0;
  double benign_fast_share = 0.3;
  std::int64_t session_us = 60'000'000;

  // ransomware
  std::size_t n_ransomware = 66;
  double ransomware_wt_entropy = 0.88;
  double ransomware_rd_entropy = 0.55;
  double ransomware_fast_share = 0.6;
  // Share of samples that rename a folder's files after encrypting all of
  // them instead of right after each file.
  double ransomware_batch_rename_share = 0.3;
  std::uint64_t chunk_min = 65536;
  int max_chunks = 8;
  std::int64_t per_file_us = 20'000;  // median encryption time per file

  static GenConfig defaults();
  // Throws std::invalid_argument when a mix does not sum to 1 (classes: 100),
  // bulk shares exceed their class, or n_files < n_dirs.
  void validate() const;
};

GenConfig load_config(std::istream& in);
GenConfig load_config_file(const std::filesystem::path& path);
void save_config(const GenConfig& config, std::ostream& out);

FileCensus gen_census(const GenConfig& config);

// Trace i depends only on (config.seed, i).
Trace gen_benign_trace(const FileCensus& census, const GenConfig& config, std::size_t index);
std::vector<Trace> gen_benign(const FileCensus& census, const GenConfig& config);

Trace gen_ransomware_trace(const FileCensus& census, const GenConfig& config, std::size_t index);
std::vector<Trace> gen_ransomware(const FileCensus& census, const GenConfig& config);

}  // namespace rwevade
