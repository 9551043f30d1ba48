#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "loceq/errors.hpp"
#include "loceq/sparse.hpp"

namespace loceq {

/// Malformed or inconsistent file contents.
class FormatError : public DomainError {
 public:
  using DomainError::DomainError;
};

std::string_view code_version();

// Matrix file layout, all little endian:
//   char[8] magic "LOCEQSH\0", u32 version, u32 flags (bit 0: norm_hint set),
//   u64 N, u64 entry count, f64 norm_hint,
//   then per entry u64 row, u64 col, f64 re, f64 im (upper triangle, sorted).
inline constexpr char kMatrixMagic[8] = {'L', 'O', 'C', 'E', 'Q', 'S', 'H', '\0'};
inline constexpr std::uint32_t kMatrixVersion = 1;

void write_matrix(std::ostream& out, const SparseHermitian& h);
void write_matrix(const std::filesystem::path& path, const SparseHermitian& h);

/// Strict reader: rejects bad magic or version, truncation, out-of-range or
/// lower-triangle coordinates (Hermiticity), complex diagonal entries,
/// unsorted or duplicate coordinates and non-finite values.
SparseHermitian read_matrix(std::istream& in);
SparseHermitian read_matrix(const std::filesystem::path& path);

/// Ordered key = value text, one pair per line; '#' starts a comment line.
using Metadata = std::map<std::string, std::string>;

void write_metadata(const std::filesystem::path& path, const Metadata& meta);
Metadata read_metadata(const std::filesystem::path& path);

/// Sidecar path of a matrix file: "<path>.meta".
std::filesystem::path metadata_path(const std::filesystem::path& matrix);

/// Checks a matrix against its sidecar (dimension, entry count, and the
/// locality fields when present). Throws FormatError on mismatch.
void check_against_metadata(const SparseHermitian& h, const Metadata& meta);

/// 64-bit FNV-1a of the canonical "key=value\n" rendering, as 16 hex digits.
std::string config_hash(const Metadata& config);

/// Minimal CSV writer: a provenance comment line, then a header row.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const std::vector<std::string>& columns,
            const std::string& provenance);
  /// Appends one row; the cell count must match the header.
  void row(const std::vector<std::string>& cells);

 private:
  std::ostream& out_;
  std::size_t columns_;
};

/// Shortest round-trip decimal form of a double ("" for NaN).
std::string format_double(double value);

/// Exclusive advisory lock on `path` (created if missing), released on
/// destruction.
class FileLock {
 public:
  explicit FileLock(const std::filesystem::path& path);
  ~FileLock();
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace loceq
