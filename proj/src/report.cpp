#include "fput/report.hpp"

#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "fput/errors.hpp"
#include "fput/trajectory.hpp"

namespace fput {

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

Provenance& Provenance::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return *this;
    }
  }
  entries_.emplace_back(key, value);
  return *this;
}

Provenance& Provenance::set(const std::string& key, double value) {
  return set(key, format_double(value));
}

Provenance& Provenance::set(const std::string& key, std::int64_t value) {
  return set(key, std::to_string(value));
}

std::uint64_t Provenance::hash() const {
  std::string text = command_ + "\n";
  for (const auto& [k, v] : entries_) text += k + "=" + v + "\n";
  return fnv1a64(std::span<const unsigned char>(
      reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

std::string Provenance::hash_hex() const {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, hash());
  return buf;
}

void Provenance::write(std::ostream& out) const {
  out << "# fput " << FPUT_VERSION << " " << command_
      << " config_hash=" << hash_hex() << "\n";
  for (const auto& [k, v] : entries_) out << "# " << k << "=" << v << "\n";
}

void write_spectrum_csv(std::ostream& out, const EigenSpectrum& spectrum,
                        const Provenance& provenance) {
  provenance.write(out);
  out << "component,lambda,explained_cum\n";
  for (std::size_t i = 0; i < spectrum.values.size(); ++i) {
    out << i + 1 << "," << format_double(spectrum.values[i]) << ","
        << format_double(explained_variance(spectrum, i + 1)) << "\n";
  }
}

void write_curve_csv(std::ostream& out, const ReconstructionCurve& curve,
                     const Provenance& provenance) {
  provenance.write(out);
  out << "m,J_m_percent\n";
  for (std::size_t m = 0; m < curve.percent.size(); ++m) {
    out << m << "," << format_double(curve.percent[m]) << "\n";
  }
}

std::vector<EstimateRow> estimate_rows(double beta, int k,
                                       const EstimateSet& set) {
  std::vector<EstimateRow> rows;
  for (const auto& e : set.estimates) {
    rows.push_back({beta, k, e.method, e.m_star, e.raw});
  }
  return rows;
}

void write_estimates_csv(std::ostream& out,
                         const std::vector<EstimateRow>& rows,
                         const Provenance& provenance,
                         const std::vector<std::string>& notes) {
  provenance.write(out);
  for (const auto& note : notes) out << "# " << note << "\n";
  out << kEstimatesHeader << "\n";
  for (const auto& r : rows) {
    out << format_double(r.beta) << "," << r.k << "," << method_tag(r.method)
        << "," << r.m_star << "," << format_double(r.raw) << "\n";
  }
}

namespace {

double parse_double_field(const std::string& field) {
  double value = 0.0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw FormatError("estimates CSV: bad number '" + field + "'");
  }
  return value;
}

}  // namespace

std::vector<EstimateRow> read_estimates_csv(std::istream& in) {
  std::vector<EstimateRow> rows;
  std::string line;
  bool seen_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!seen_header) {
      if (line != kEstimatesHeader) {
        throw FormatError("estimates CSV: unexpected header '" + line + "'");
      }
      seen_header = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 5) {
      throw FormatError("estimates CSV: expected 5 fields in '" + line + "'");
    }
    EstimateRow r;
    r.beta = parse_double_field(fields[0]);
    r.k = static_cast<int>(parse_double_field(fields[1]));
    r.method = parse_method_tag(fields[2]);
    r.m_star = static_cast<int>(parse_double_field(fields[3]));
    r.raw = parse_double_field(fields[4]);
    rows.push_back(r);
  }
  return rows;
}

void write_embedding_csv(std::ostream& out, const Embedding& embedding,
                         double time_step, const Provenance& provenance) {
  provenance.write(out);
  out << "index,t,y1,y2\n";
  for (Eigen::Index i = 0; i < embedding.y.rows(); ++i) {
    out << i << "," << format_double(static_cast<double>(i) * time_step) << ","
        << format_double(embedding.y(i, 0)) << ","
        << format_double(embedding.y(i, 1)) << "\n";
  }
}

void write_kl_csv(std::ostream& out, const Embedding& embedding,
                  const Provenance& provenance) {
  provenance.write(out);
  out << "iter,kl\n";
  for (const auto& s : embedding.kl_trace) {
    out << s.iteration << "," << format_double(s.kl) << "\n";
  }
}

}  // namespace fput
