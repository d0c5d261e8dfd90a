#include "fput/trajectory.hpp"

#include <algorithm>
#include <bit>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>

#include "fput/errors.hpp"

namespace fput {

namespace {

static_assert(std::numeric_limits<double>::is_iec559);

template <typename T>
void put_le(unsigned char* out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xffU);
  }
}

template <typename T>
T get_le(const unsigned char* in) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bits |= static_cast<U>(in[i]) << (8 * i);
  }
  return std::bit_cast<T>(bits);
}

void encode_doubles(std::span<const double> values, unsigned char* out) {
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out, values.data(), values.size_bytes());
  } else {
    for (std::size_t i = 0; i < values.size(); ++i) {
      put_le(out + 8 * i, values[i]);
    }
  }
}

void decode_doubles(const unsigned char* in, std::span<double> values) {
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(values.data(), in, values.size_bytes());
  } else {
    for (std::size_t i = 0; i < values.size(); ++i) {
      values[i] = get_le<double>(in + 8 * i);
    }
  }
}

constexpr std::size_t kIoBufferBytes = 1 << 20;

std::string describe(const std::filesystem::path& path) {
  return "'" + path.string() + "'";
}

}  // namespace

// ---------------------------------------------------------------------------
// Header

TrajectoryHeader TrajectoryHeader::from_run(const ModelParams& params,
                                            const InitialCondition& ic,
                                            std::uint64_t n_samples) {
  TrajectoryHeader header;
  header.n_samples = n_samples;
  header.n_columns = static_cast<std::uint32_t>(params.phase_dimension());
  header.beta = params.beta;
  header.mode = static_cast<std::uint32_t>(ic.mode);
  header.amplitude = ic.amplitude;
  header.h = params.h;
  header.stride = static_cast<std::uint32_t>(params.stride);
  return header;
}

std::array<unsigned char, kTrajectoryHeaderBytes> TrajectoryHeader::encode()
    const {
  std::array<unsigned char, kTrajectoryHeaderBytes> out{};
  std::memcpy(out.data(), kTrajectoryMagic.data(), kTrajectoryMagic.size());
  put_le(out.data() + 8, version);
  put_le(out.data() + 12, n_samples);
  put_le(out.data() + 20, n_columns);
  put_le(out.data() + 24, beta);
  put_le(out.data() + 32, mode);
  put_le(out.data() + 36, amplitude);
  put_le(out.data() + 44, h);
  put_le(out.data() + 52, stride);
  return out;
}

TrajectoryHeader TrajectoryHeader::decode(
    std::span<const unsigned char, kTrajectoryHeaderBytes> bytes) {
  if (!std::equal(kTrajectoryMagic.begin(), kTrajectoryMagic.end(),
                  bytes.begin(), [](char a, unsigned char b) {
                    return static_cast<unsigned char>(a) == b;
                  })) {
    throw FormatError("not a trajectory file (bad magic)");
  }
  TrajectoryHeader header;
  header.version = get_le<std::uint32_t>(bytes.data() + 8);
  header.n_samples = get_le<std::uint64_t>(bytes.data() + 12);
  header.n_columns = get_le<std::uint32_t>(bytes.data() + 20);
  header.beta = get_le<double>(bytes.data() + 24);
  header.mode = get_le<std::uint32_t>(bytes.data() + 32);
  header.amplitude = get_le<double>(bytes.data() + 36);
  header.h = get_le<double>(bytes.data() + 44);
  header.stride = get_le<std::uint32_t>(bytes.data() + 52);
  if (header.version != kTrajectoryVersion) {
    throw FormatError("unsupported trajectory version " +
                      std::to_string(header.version));
  }
  return header;
}

// ---------------------------------------------------------------------------
// Checksum

void Fnv1a64::update(std::span<const unsigned char> bytes) noexcept {
  std::uint64_t hash = hash_;
  for (unsigned char b : bytes) {
    hash ^= b;
    hash *= kPrime;
  }
  hash_ = hash;
}

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) noexcept {
  Fnv1a64 h;
  h.update(bytes);
  return h.value();
}

// ---------------------------------------------------------------------------
// Sources

void MatrixSource::for_each_block(std::size_t chunk_rows,
                                  const BlockVisitor& visit) const {
  if (chunk_rows == 0) throw DomainError("chunk size must be positive");
  const std::size_t cols = matrix_.n_columns;
  for (std::uint64_t first = 0; first < matrix_.n_samples;
       first += chunk_rows) {
    const std::size_t rows = static_cast<std::size_t>(
        std::min<std::uint64_t>(chunk_rows, matrix_.n_samples - first));
    RowBlock block{first, rows, cols,
                   std::span<const double>(matrix_.values)
                       .subspan(first * cols, rows * cols)};
    visit(block);
  }
}

TrajectoryMatrix simulate_to_matrix(const InitialCondition& ic,
                                    const ModelParams& params,
                                    std::uint64_t n_samples) {
  TrajectoryMatrix matrix(n_samples,
                          static_cast<std::size_t>(params.phase_dimension()));
  matrix.meta = TrajectoryHeader::from_run(params, ic, n_samples);
  std::uint64_t next = 0;
  integrate(ic, params, n_samples, [&](std::span<const double> row, double) {
    std::copy(row.begin(), row.end(), matrix.row(next++).begin());
  });
  return matrix;
}

SimulationSource::SimulationSource(InitialCondition ic, ModelParams params,
                                   std::uint64_t n_samples)
    : ic_(ic), params_(params), n_samples_(n_samples) {
  params_.validate();
  if (n_samples_ < 1) throw DomainError("simulation source: need >= 1 sample");
}

std::size_t SimulationSource::columns() const {
  return static_cast<std::size_t>(params_.phase_dimension());
}

void SimulationSource::for_each_block(std::size_t chunk_rows,
                                      const BlockVisitor& visit) const {
  if (chunk_rows == 0) throw DomainError("chunk size must be positive");
  const std::size_t cols = columns();
  std::vector<double> buffer(chunk_rows * cols);
  std::size_t filled = 0;
  std::uint64_t first = 0;
  const bool observe = passes_ == 0 && static_cast<bool>(observer_);
  auto flush = [&] {
    if (filled == 0) return;
    visit(RowBlock{first, filled, cols,
                   std::span<const double>(buffer).first(filled * cols)});
    first += filled;
    filled = 0;
  };
  summary_ = integrate(ic_, params_, n_samples_,
                       [&](std::span<const double> row, double t) {
                         if (observe) observer_(row, t);
                         std::copy(row.begin(), row.end(),
                                   buffer.begin() + filled * cols);
                         if (++filled == chunk_rows) flush();
                       });
  flush();
  ++passes_;
}

// ---------------------------------------------------------------------------
// Writer

TrajectoryWriter::TrajectoryWriter(std::filesystem::path path,
                                   TrajectoryHeader meta)
    : path_(std::move(path)), meta_(meta) {
  if (meta_.n_columns == 0) {
    throw DomainError("trajectory writer: column count must be positive");
  }
  out_.open(path_, std::ios::binary | std::ios::trunc);
  if (!out_) {
    throw IoError("cannot open " + describe(path_) + " for writing: " +
                  std::strerror(errno));
  }
  const auto header = meta_.encode();
  out_.write(reinterpret_cast<const char*>(header.data()), header.size());
  buffer_.reserve(kIoBufferBytes);
}

TrajectoryWriter::~TrajectoryWriter() {
  if (!finalized_) {
    out_.close();
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
}

void TrajectoryWriter::append(std::span<const double> row) {
  if (finalized_) throw IoError("trajectory writer already finalized");
  if (row.size() != meta_.n_columns) {
    throw DomainError("trajectory writer: row has " +
                      std::to_string(row.size()) + " values, expected " +
                      std::to_string(meta_.n_columns));
  }
  for (double x : row) {
    if (!std::isfinite(x)) {
      throw DomainError("trajectory writer: non-finite value in row " +
                        std::to_string(rows_));
    }
  }
  const std::size_t offset = buffer_.size();
  buffer_.resize(offset + row.size_bytes());
  encode_doubles(row, buffer_.data() + offset);
  ++rows_;
  if (buffer_.size() >= kIoBufferBytes) flush_buffer();
}

void TrajectoryWriter::flush_buffer() {
  checksum_.update(buffer_);
  out_.write(reinterpret_cast<const char*>(buffer_.data()),
             static_cast<std::streamsize>(buffer_.size()));
  buffer_.clear();
  if (!out_) throw IoError("write failed on " + describe(path_));
}

WriteSummary TrajectoryWriter::finalize() {
  if (finalized_) throw IoError("trajectory writer already finalized");
  if (rows_ == 0) throw DomainError("empty trajectory");
  if (meta_.n_samples != 0 && meta_.n_samples != rows_) {
    throw FormatError("header/payload length mismatch: header declares " +
                      std::to_string(meta_.n_samples) + " rows, wrote " +
                      std::to_string(rows_));
  }
  flush_buffer();
  std::array<unsigned char, kTrajectoryFooterBytes> footer{};
  put_le(footer.data(), checksum_.value());
  out_.write(reinterpret_cast<const char*>(footer.data()), footer.size());

  meta_.n_samples = rows_;
  const auto header = meta_.encode();
  out_.seekp(0);
  out_.write(reinterpret_cast<const char*>(header.data()), header.size());
  out_.close();
  if (!out_) throw IoError("failed to finalize " + describe(path_));
  finalized_ = true;

  WriteSummary summary;
  summary.rows = rows_;
  summary.checksum = checksum_.value();
  summary.bytes = kTrajectoryHeaderBytes + rows_ * meta_.n_columns * 8 +
                  kTrajectoryFooterBytes;
  return summary;
}

WriteSummary write_trajectory(const std::filesystem::path& path,
                              const TrajectoryMatrix& matrix) {
  TrajectoryHeader meta = matrix.meta;
  meta.n_samples = matrix.n_samples;
  meta.n_columns = static_cast<std::uint32_t>(matrix.n_columns);
  TrajectoryWriter writer(path, meta);
  for (std::uint64_t i = 0; i < matrix.n_samples; ++i) {
    writer.append(matrix.row(i));
  }
  return writer.finalize();
}

// ---------------------------------------------------------------------------
// Reader

TrajectoryReader::TrajectoryReader(std::filesystem::path path)
    : path_(std::move(path)) {
  std::ifstream in(path_, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + describe(path_) + ": " +
                  std::strerror(errno));
  }
  std::error_code ec;
  const std::uint64_t file_size = std::filesystem::file_size(path_, ec);
  if (ec) throw IoError("cannot stat " + describe(path_));
  if (file_size < kTrajectoryHeaderBytes + kTrajectoryFooterBytes) {
    throw FormatError(describe(path_) + " is truncated (" +
                      std::to_string(file_size) + " bytes)");
  }
  std::array<unsigned char, kTrajectoryHeaderBytes> raw{};
  in.read(reinterpret_cast<char*>(raw.data()), raw.size());
  try {
    header_ = TrajectoryHeader::decode(raw);
  } catch (const FormatError& e) {
    throw FormatError(describe(path_) + ": " + e.what());
  }
  if (header_.n_columns == 0 || header_.n_samples == 0) {
    throw FormatError(describe(path_) + ": empty trajectory");
  }
  const std::uint64_t payload = header_.n_samples * header_.n_columns * 8;
  const std::uint64_t expected =
      kTrajectoryHeaderBytes + payload + kTrajectoryFooterBytes;
  if (file_size < expected) {
    throw FormatError(describe(path_) + " is truncated: expected " +
                      std::to_string(expected) + " bytes, found " +
                      std::to_string(file_size));
  }
  if (file_size > expected) {
    throw FormatError(describe(path_) + " has " +
                      std::to_string(file_size - expected) +
                      " unexpected trailing bytes");
  }

  Fnv1a64 hash;
  std::vector<unsigned char> buffer(kIoBufferBytes);
  std::uint64_t remaining = payload;
  while (remaining > 0) {
    const std::size_t n =
        static_cast<std::size_t>(std::min<std::uint64_t>(remaining, buffer.size()));
    in.read(reinterpret_cast<char*>(buffer.data()),
            static_cast<std::streamsize>(n));
    if (!in) throw FormatError(describe(path_) + ": short read in payload");
    hash.update(std::span<const unsigned char>(buffer).first(n));
    remaining -= n;
  }
  std::array<unsigned char, kTrajectoryFooterBytes> footer{};
  in.read(reinterpret_cast<char*>(footer.data()), footer.size());
  if (!in) throw FormatError(describe(path_) + ": missing checksum footer");
  checksum_ = get_le<std::uint64_t>(footer.data());
  if (checksum_ != hash.value()) {
    std::ostringstream msg;
    msg << "checksum mismatch in " << describe(path_) << ": footer 0x"
        << std::hex << checksum_ << ", payload 0x" << hash.value();
    throw ChecksumError(msg.str());
  }
}

TrajectoryReader::BlockStream::BlockStream(const TrajectoryReader& reader,
                                           std::size_t chunk_rows)
    : in_(reader.path(), std::ios::binary),
      chunk_rows_(chunk_rows),
      columns_(reader.header().n_columns),
      total_rows_(reader.header().n_samples) {
  if (chunk_rows_ == 0) throw DomainError("chunk size must be positive");
  if (!in_) throw IoError("cannot reopen " + describe(reader.path()));
  in_.seekg(static_cast<std::streamoff>(kTrajectoryHeaderBytes));
}

std::optional<RowBlock> TrajectoryReader::BlockStream::next() {
  if (next_row_ >= total_rows_) return std::nullopt;
  const std::size_t rows = static_cast<std::size_t>(
      std::min<std::uint64_t>(chunk_rows_, total_rows_ - next_row_));
  const std::size_t count = rows * columns_;
  raw_.resize(count * 8);
  values_.resize(count);
  in_.read(reinterpret_cast<char*>(raw_.data()),
           static_cast<std::streamsize>(raw_.size()));
  if (!in_) throw FormatError("trajectory truncated while streaming rows");
  decode_doubles(raw_.data(), values_);
  RowBlock block{next_row_, rows, columns_, values_};
  next_row_ += rows;
  return block;
}

TrajectoryReader::BlockStream TrajectoryReader::stream_rows(
    std::size_t chunk_rows) const {
  return BlockStream(*this, chunk_rows);
}

TrajectoryMatrix TrajectoryReader::read_all() const {
  TrajectoryMatrix matrix(header_.n_samples, header_.n_columns);
  matrix.meta = header_;
  auto stream = stream_rows(4096);
  while (auto block = stream.next()) {
    std::copy(block->values.begin(), block->values.end(),
              matrix.values.begin() + block->first_row * block->columns);
  }
  return matrix;
}

void FileSource::for_each_block(std::size_t chunk_rows,
                                const BlockVisitor& visit) const {
  auto stream = reader_.stream_rows(chunk_rows);
  while (auto block = stream.next()) visit(*block);
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> column_names(std::size_t columns) {
  std::vector<std::string> names;
  names.reserve(columns);
  if (columns % 2 == 0) {
    const std::size_t n = columns / 2;
    for (std::size_t i = 1; i <= n; ++i) names.push_back("q" + std::to_string(i));
    for (std::size_t i = 1; i <= n; ++i) names.push_back("p" + std::to_string(i));
  } else {
    for (std::size_t i = 1; i <= columns; ++i) {
      names.push_back("x" + std::to_string(i));
    }
  }
  return names;
}

}  // namespace

std::uint64_t export_csv(const RowSource& source, std::ostream& out,
                         std::uint64_t row_stride) {
  if (row_stride == 0) throw DomainError("csv export: stride must be >= 1");
  const auto names = column_names(source.columns());
  for (std::size_t c = 0; c < names.size(); ++c) {
    out << (c ? "," : "") << names[c];
  }
  out << '\n';
  std::uint64_t written = 0;
  char buf[32];
  std::string line;
  source.for_each_block(4096, [&](const RowBlock& block) {
    for (std::size_t r = 0; r < block.rows; ++r) {
      if ((block.first_row + r) % row_stride != 0) continue;
      line.clear();
      const auto row = block.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) {
        const int len = std::snprintf(buf, sizeof buf, "%.17g", row[c]);
        if (c) line.push_back(',');
        line.append(buf, static_cast<std::size_t>(len));
      }
      line.push_back('\n');
      out << line;
      ++written;
    }
  });
  if (!out) throw IoError("csv export: write failed");
  return written;
}

WriteSummary import_csv(std::istream& in, const std::filesystem::path& path,
                        TrajectoryHeader meta) {
  std::string line;
  std::vector<double> row;
  std::optional<TrajectoryWriter> writer;
  std::uint64_t line_no = 0;
  meta.n_samples = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (std::isalpha(static_cast<unsigned char>(line[0]))) {
      // Column header.
      const auto columns =
          static_cast<std::uint32_t>(std::count(line.begin(), line.end(), ',') + 1);
      if (meta.n_columns == 0) meta.n_columns = columns;
      if (columns != meta.n_columns) {
        throw FormatError("csv import: header has " + std::to_string(columns) +
                          " columns, expected " + std::to_string(meta.n_columns));
      }
      continue;
    }
    row.clear();
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p < end) {
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(p, end, value);
      if (ec != std::errc()) {
        throw FormatError("csv import: bad number on line " +
                          std::to_string(line_no));
      }
      row.push_back(value);
      p = ptr;
      if (p < end && *p == ',') ++p;
      while (p < end && (*p == '\r' || *p == ' ')) ++p;
    }
    if (!writer) {
      if (meta.n_columns == 0) meta.n_columns = static_cast<std::uint32_t>(row.size());
      writer.emplace(path, meta);
    }
    writer->append(row);
  }
  if (!writer) throw DomainError("empty trajectory");
  return writer->finalize();
}

}  // namespace fput
