#include "loceq/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

namespace loceq {

namespace {

template <class T>
void put_le(std::ostream& out, T value) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  auto bits = std::bit_cast<U>(value);
  std::array<char, sizeof(T)> buf;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<char>(bits & 0xffu);
    bits >>= 8;
  }
  out.write(buf.data(), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  std::array<unsigned char, sizeof(T)> buf;
  if (!in.read(reinterpret_cast<char*>(buf.data()), sizeof(T))) {
    throw FormatError("matrix file truncated");
  }
  U bits = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) bits = (bits << 8) | buf[i];
  return std::bit_cast<T>(bits);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::string_view code_version() { return LOCEQ_VERSION; }

void write_matrix(std::ostream& out, const SparseHermitian& h) {
  out.write(kMatrixMagic, sizeof kMatrixMagic);
  put_le<std::uint32_t>(out, kMatrixVersion);
  put_le<std::uint32_t>(out, h.norm_hint() ? 1u : 0u);
  put_le<std::uint64_t>(out, h.dim());
  put_le<std::uint64_t>(out, h.entries().size());
  put_le<double>(out, h.norm_hint().value_or(0.0));
  for (const auto& e : h.entries()) {
    put_le<std::uint64_t>(out, e.row);
    put_le<std::uint64_t>(out, e.col);
    put_le<double>(out, e.value.real());
    put_le<double>(out, e.value.imag());
  }
  if (!out) throw DomainError("failed writing matrix");
}

void write_matrix(const std::filesystem::path& path, const SparseHermitian& h) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DomainError("cannot open " + path.string() + " for writing");
  write_matrix(out, h);
}

SparseHermitian read_matrix(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) ||
      std::memcmp(magic, kMatrixMagic, sizeof magic) != 0) {
    throw FormatError("not a loceq matrix file (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kMatrixVersion) {
    throw FormatError("unsupported matrix file version " + std::to_string(version));
  }
  const auto flags = get_le<std::uint32_t>(in);
  const auto dim = get_le<std::uint64_t>(in);
  const auto count = get_le<std::uint64_t>(in);
  const auto hint = get_le<double>(in);
  if (count > dim * (dim + 1) / 2) throw FormatError("entry count exceeds N(N+1)/2");

  std::vector<MatrixEntry> entries;
  entries.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    MatrixEntry e;
    e.row = get_le<std::uint64_t>(in);
    e.col = get_le<std::uint64_t>(in);
    const double re = get_le<double>(in);
    const double im = get_le<double>(in);
    if (e.row >= dim || e.col >= dim) {
      throw FormatError("entry " + std::to_string(i) + " out of range");
    }
    if (e.row > e.col) {
      throw FormatError("Hermiticity violated: entry " + std::to_string(i) +
                        " lies below the diagonal");
    }
    if (!std::isfinite(re) || !std::isfinite(im)) {
      throw FormatError("entry " + std::to_string(i) + " is not finite");
    }
    if (e.row == e.col && std::abs(im) > kStructuralZero) {
      throw FormatError("Hermiticity violated: diagonal entry " +
                        std::to_string(e.row) + " is complex");
    }
    if (!entries.empty()) {
      const auto& p = entries.back();
      if (std::tie(p.row, p.col) >= std::tie(e.row, e.col)) {
        throw FormatError("entries not strictly sorted at " + std::to_string(i));
      }
    }
    e.value = Complex(re, im);
    entries.push_back(e);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("trailing bytes after matrix entries");
  }
  std::optional<double> norm_hint;
  if (flags & 1u) norm_hint = hint;
  return SparseHermitian::from_upper(dim, std::move(entries), norm_hint);
}

SparseHermitian read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open " + path.string());
  return read_matrix(in);
}

void write_metadata(const std::filesystem::path& path, const Metadata& meta) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot open " + path.string() + " for writing");
  for (const auto& [k, v] : meta) out << k << " = " << v << '\n';
}

Metadata read_metadata(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open " + path.string());
  Metadata meta;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": expected key = value");
    }
    meta[trim(std::string_view(t).substr(0, eq))] =
        trim(std::string_view(t).substr(eq + 1));
  }
  return meta;
}

std::filesystem::path metadata_path(const std::filesystem::path& matrix) {
  auto p = matrix;
  p += ".meta";
  return p;
}

void check_against_metadata(const SparseHermitian& h, const Metadata& meta) {
  auto expect = [&](const char* key, std::uint64_t actual) {
    const auto it = meta.find(key);
    if (it == meta.end()) return;
    std::uint64_t v = 0;
    const auto& s = it->second;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
      throw FormatError(std::string("metadata field ") + key + " is not an integer");
    }
    if (v != actual) {
      throw FormatError(std::string("metadata ") + key + " = " + s +
                        " does not match the matrix (" + std::to_string(actual) + ")");
    }
  };
  expect("dim", h.dim());
  expect("stored_entries", h.entries().size());
  expect("nonzeros", h.nonzero_count());
  if (const auto it = meta.find("L"); it != meta.end()) {
    if (std::uint64_t{1} << std::stoi(it->second) != h.dim()) {
      throw FormatError("metadata L does not match the matrix dimension");
    }
  }
}

std::string config_hash(const Metadata& config) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& [k, v] : config) {
    mix(k);
    mix("=");
    mix(v);
    mix("\n");
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

CsvWriter::CsvWriter(std::ostream& out, const std::vector<std::string>& columns,
                     const std::string& provenance)
    : out_(out), columns_(columns.size()) {
  out_ << "# " << provenance << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) {
    out_ << (i ? "," : "") << columns[i];
  }
  out_ << '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw DomainError("CSV row has the wrong width");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    out_ << (i ? "," : "") << cells[i];
  }
  out_ << '\n';
}

std::string format_double(double value) {
  if (std::isnan(value)) return "";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

FileLock::FileLock(const std::filesystem::path& path) {
  fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
  if (fd_ < 0) throw DomainError("cannot open lock file " + path.string());
  if (::flock(fd_, LOCK_EX) != 0) {
    ::close(fd_);
    throw DomainError("cannot lock " + path.string());
  }
}

FileLock::~FileLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

}  // namespace loceq
