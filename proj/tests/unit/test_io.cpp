#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "loceq/ensembles.hpp"
#include "loceq/io.hpp"

using namespace loceq;

namespace {

std::string serialise(const SparseHermitian& h) {
  std::ostringstream out(std::ios::binary);
  write_matrix(out, h);
  return out.str();
}

SparseHermitian parse(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return read_matrix(in);
}

void put_u64(std::string& s, std::size_t at, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) s[at + i] = static_cast<char>((v >> (8 * i)) & 0xffu);
}

void put_f64(std::string& s, std::size_t at, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(s, at, bits);
}

constexpr std::size_t kHeader = 40;
constexpr std::size_t kRecord = 32;

SparseHermitian small() {
  return SparseHermitian::from_upper(
      3, {{0, 0, {1.5, 0}}, {0, 2, {0.25, -0.5}}, {1, 2, {-2, 1}}}, 1.0);
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("matrix round trip") {
  const auto h = small();
  const auto bytes = serialise(h);
  CHECK(bytes.size() == kHeader + 3 * kRecord);
  CHECK(bytes.substr(0, 7) == "LOCEQSH");
  CHECK(parse(bytes) == h);
  const auto s = draw({Variant::kBrf, {6, 2, 1}, ObservableMode::kRandomised, 3}, WeightModel{});
  CHECK(parse(serialise(s.hamiltonian)) == s.hamiltonian);
  const auto nohint = SparseHermitian::from_upper(2, {{0, 1, {1, 0}}});
  CHECK_FALSE(parse(serialise(nohint)).norm_hint().has_value());
}

TEST_CASE("corrupted matrices are rejected") {
  const auto good = serialise(small());
  auto expect_error = [](const std::string& bytes, const char* fragment) {
    try {
      parse(bytes);
      FAIL("accepted a corrupted file");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find(fragment) != std::string::npos);
    }
  };
  auto bad_magic = good;
  bad_magic[0] = 'X';
  expect_error(bad_magic, "magic");
  auto bad_version = good;
  bad_version[8] = 9;
  expect_error(bad_version, "version");
  expect_error(good.substr(0, good.size() - 5), "truncated");
  expect_error(good + "x", "trailing");
  auto lower = good;  // swap row/col of the (0, 2) record
  put_u64(lower, kHeader + kRecord, 2);
  put_u64(lower, kHeader + kRecord + 8, 0);
  expect_error(lower, "Hermiticity");
  auto complex_diag = good;
  put_f64(complex_diag, kHeader + 24, 0.5);
  expect_error(complex_diag, "Hermiticity");
  auto range = good;
  put_u64(range, kHeader + 2 * kRecord + 8, 3);
  expect_error(range, "out of range");
  auto unsorted = good;
  put_u64(unsorted, kHeader + 2 * kRecord, 0);
  put_u64(unsorted, kHeader + 2 * kRecord + 8, 1);
  expect_error(unsorted, "sorted");
  auto nan = good;
  put_f64(nan, kHeader + kRecord + 16, std::numeric_limits<double>::quiet_NaN());
  expect_error(nan, "finite");
}

TEST_CASE("metadata sidecar") {
  const auto dir = std::filesystem::temp_directory_path() / "loceq_io_test";
  std::filesystem::create_directories(dir);
  const auto m = dir / "h.bin";
  CHECK(metadata_path(m).filename() == "h.bin.meta");
  const auto h = small();
  write_matrix(m, h);
  Metadata meta = {{"dim", "3"}, {"stored_entries", "3"}, {"nonzeros", "5"},
                   {"variant", "exh"}};
  write_metadata(metadata_path(m), meta);
  const auto back = read_metadata(metadata_path(m));
  CHECK(back == meta);
  CHECK_NOTHROW(check_against_metadata(read_matrix(m), back));
  meta["nonzeros"] = "4";
  CHECK_THROWS_AS(check_against_metadata(h, meta), FormatError);
  meta["nonzeros"] = "5";
  meta["L"] = "3";
  CHECK_THROWS_AS(check_against_metadata(h, meta), FormatError);
  {
    std::ofstream out(dir / "bad.meta");
    out << "# comment\nkey = value\nnot a pair\n";
  }
  CHECK_THROWS_AS(read_metadata(dir / "bad.meta"), FormatError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("config hash is FNV-1a of the canonical rendering") {
  // Reference digests computed independently in Python.
  CHECK(config_hash({}) == "cbf29ce484222325");
  CHECK(config_hash({{"L", "6"}, {"n", "2"}}) == "605f22ed1ca471d3");
  CHECK(config_hash({{"n", "2"}, {"L", "6"}}) == "605f22ed1ca471d3");
}

TEST_CASE("csv writer and number formatting") {
  std::ostringstream out;
  CsvWriter w(out, {"a", "b"}, "hash=1 seed=2");
  w.row({"1", format_double(0.1)});
  CHECK(out.str() == "# hash=1 seed=2\na,b\n1,0.1\n");
  CHECK_THROWS(w.row({"1"}));
  CHECK(format_double(std::nan("")) == "");
  for (double v : {1.0 / 3.0, 1e-300, -2.5e10, 123456.789}) {
    const auto s = format_double(v);
    CHECK(std::stod(s) == v);
  }
}

TEST_CASE("file lock is reentrant across objects in sequence") {
  const auto p = std::filesystem::temp_directory_path() / "loceq_lock_test.lock";
  { FileLock a(p); }
  { FileLock b(p); }
  CHECK(std::filesystem::exists(p));
  std::filesystem::remove(p);
}

}
