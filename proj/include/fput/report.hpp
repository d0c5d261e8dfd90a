#pragma once

// CSV emitters for every figure-analog table. Each file opens with '#'
// provenance lines: artifact version, command, the config key/values and
// their hash. No timestamps are written, so identical runs produce
// identical bytes.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "fput/estimators.hpp"
#include "fput/pca.hpp"
#include "fput/tsne.hpp"

namespace fput {

/// 17 significant digits, round-trip exact.
std::string format_double(double value);

class Provenance {
 public:
  explicit Provenance(std::string command) : command_(std::move(command)) {}

  Provenance& set(const std::string& key, const std::string& value);
  Provenance& set(const std::string& key, double value);
  Provenance& set(const std::string& key, std::int64_t value);

  const std::string& command() const { return command_; }
  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }
  /// FNV-1a over "command\nkey=value\n..." in insertion order.
  std::uint64_t hash() const;
  std::string hash_hex() const;
  void write(std::ostream& out) const;

 private:
  std::string command_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// component,lambda,explained_cum
void write_spectrum_csv(std::ostream& out, const EigenSpectrum& spectrum,
                        const Provenance& provenance);

/// m,J_m_percent for m = 0..n.
void write_curve_csv(std::ostream& out, const ReconstructionCurve& curve,
                     const Provenance& provenance);

struct EstimateRow {
  double beta = 0.0;
  int k = 0;
  IdMethod method = IdMethod::participation_ratio;
  int m_star = 0;
  double raw = 0.0;
};

std::vector<EstimateRow> estimate_rows(double beta, int k,
                                       const EstimateSet& set);

inline constexpr char kEstimatesHeader[] = "beta,k,method,m_star,raw";

/// beta,k,method,m_star,raw. Failed methods appear as comment lines.
void write_estimates_csv(std::ostream& out,
                         const std::vector<EstimateRow>& rows,
                         const Provenance& provenance,
                         const std::vector<std::string>& notes = {});

/// Reads the data rows of an estimates CSV, skipping comments and header.
std::vector<EstimateRow> read_estimates_csv(std::istream& in);

/// index,t,y1,y2 with t = index * time_step.
void write_embedding_csv(std::ostream& out, const Embedding& embedding,
                         double time_step, const Provenance& provenance);

/// iter,kl
void write_kl_csv(std::ostream& out, const Embedding& embedding,
                  const Provenance& provenance);

}  // namespace fput
