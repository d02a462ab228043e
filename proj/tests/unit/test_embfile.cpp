#include "causalmask/embfile.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>

#include "causalmask/errors.hpp"
#include "causalmask/fileio.hpp"
#include "causalmask/scm.hpp"
#include "doctest.h"

using namespace causalmask;

namespace {

// Test-local serializer so the layout pin is independent of the implementation.
void push_u32(std::string& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) {
    out.push_back(static_cast<char>((v >> shift) & 0xff));
  }
}

void push_f32(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof(bits));
  push_u32(out, bits);
}

LabeledBatch tiny_batch() {
  LabeledBatch batch;
  batch.embeddings = DenseMatrix::from_rows({{1.5, -2.25, 0.0}, {3.5, 65504.0, -0.5}});
  batch.labels = {1.0, 0.0};
  batch.ground_truth = {2};
  return batch;
}

std::string golden_tiny_bytes() {
  std::string expected = "EMB1";
  push_u32(expected, 1);  // version
  push_u32(expected, 2);  // n
  push_u32(expected, 3);  // d
  push_u32(expected, 3);  // flags: labels + truth mask
  push_f32(expected, 1.5f);
  push_f32(expected, -2.25f);
  push_f32(expected, 0.0f);
  push_f32(expected, 3.5f);
  push_f32(expected, 65504.0f);
  push_f32(expected, -0.5f);
  expected += std::string("\x01\x00", 2);          // labels
  expected += std::string("\x00\x00\x01", 3);      // truth mask
  return expected;
}

void expect_format_error(const std::string& bytes, std::size_t expected_offset,
                         const char* needle) {
  const std::string path = "emb_corrupt_case.emb";
  write_file_atomic(path, bytes);
  try {
    read_emb(path);
    FAIL("expected FormatError for ", needle);
  } catch (const FormatError& e) {
    INFO("message: ", e.what());
    CHECK(e.offset() == expected_offset);
    CHECK(std::string(e.what()).find(needle) != std::string::npos);
  }
  std::remove(path.c_str());
}

}  // namespace

TEST_CASE("emb file: golden byte layout") {
  const std::string path = "emb_golden.emb";
  write_emb(path, tiny_batch());
  CHECK(read_file_bytes(path) == golden_tiny_bytes());
  CHECK_THROWS_AS(read_file_bytes(path + ".tmp"), IoError);  // temp renamed away
  std::remove(path.c_str());
}

TEST_CASE("emb file: round-trip at 32-bit precision reproduces every byte") {
  const std::string path_a = "emb_round_a.emb";
  const std::string path_b = "emb_round_b.emb";
  const LabeledBatch batch = tiny_batch();
  write_emb(path_a, batch);
  const LabeledBatch back = read_emb(path_a);
  REQUIRE(back.embeddings.rows == 2);
  REQUIRE(back.embeddings.cols == 3);
  for (std::size_t i = 0; i < batch.embeddings.data.size(); ++i) {
    CHECK(back.embeddings.data[i] ==
          static_cast<double>(static_cast<float>(batch.embeddings.data[i])));
  }
  CHECK(back.labels == batch.labels);
  CHECK(back.ground_truth == batch.ground_truth);
  CHECK(back.domain_id == 0);

  write_emb(path_b, back);
  CHECK(read_file_bytes(path_a) == read_file_bytes(path_b));
  std::remove(path_a.c_str());
  std::remove(path_b.c_str());
}

TEST_CASE("emb file: canonical benchmark batch round-trips byte-identically") {
  const std::string path_a = "emb_bench_a.emb";
  const std::string path_b = "emb_bench_b.emb";
  const Benchmark bench = make_benchmark(7);
  write_emb(path_a, bench.val);
  const LabeledBatch back = read_emb(path_a);
  write_emb(path_b, back);
  CHECK(read_file_bytes(path_a) == read_file_bytes(path_b));
  CHECK(back.labels == bench.val.labels);
  CHECK(back.ground_truth == bench.val.ground_truth);
  std::remove(path_a.c_str());
  std::remove(path_b.c_str());
}

TEST_CASE("emb file: empty dataset and optional sections") {
  const std::string path = "emb_empty.emb";
  LabeledBatch empty;
  empty.embeddings = DenseMatrix(0, 5);
  write_emb(path, empty);
  CHECK(read_file_bytes(path).size() == 20);
  const LabeledBatch back = read_emb(path);
  CHECK(back.embeddings.rows == 0);
  CHECK(back.embeddings.cols == 5);
  CHECK(back.labels.empty());
  CHECK(back.ground_truth.empty());

  LabeledBatch unlabeled;
  unlabeled.embeddings = DenseMatrix::from_rows({{1.0, 2.0}});
  write_emb(path, unlabeled);
  const LabeledBatch unlabeled_back = read_emb(path);
  CHECK(unlabeled_back.labels.empty());
  CHECK(read_file_bytes(path).size() == 20 + 8);
  std::remove(path.c_str());
}

TEST_CASE("emb file: corruption errors carry exact byte offsets") {
  const std::string good = golden_tiny_bytes();
  REQUIRE(good.size() == 49);  // 20 + 24 + 2 + 3

  expect_format_error(good.substr(0, 10), 10, "truncated header");

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  expect_format_error(bad_magic, 0, "bad magic");

  std::string bad_version = good;
  bad_version[4] = '\x02';
  expect_format_error(bad_version, 4, "unsupported version");

  std::string bad_flags = good;
  bad_flags[16] = '\x07';
  expect_format_error(bad_flags, 16, "unknown flag bits");

  // cut inside float 3 (bytes 32..35): first missing float is index 3
  expect_format_error(good.substr(0, 20 + 4 * 3 + 2), 20 + 4 * 3, "truncated embedding payload");
  // payload fully absent: first missing float is index 0
  expect_format_error(good.substr(0, 20), 20, "truncated embedding payload");

  expect_format_error(good.substr(0, 45), 45, "truncated label section");
  expect_format_error(good.substr(0, 48), 48, "truncated truth-mask section");
  expect_format_error(good + std::string(1, '\x00'), 49, "length mismatch");

  std::string bad_label = good;
  bad_label[44] = '\x02';
  expect_format_error(bad_label, 44, "label byte");

  std::string bad_truth = good;
  bad_truth[47] = '\x05';
  expect_format_error(bad_truth, 47, "truth-mask byte");
}

TEST_CASE("emb file: writer-side validation") {
  const std::string path = "emb_invalid.emb";
  LabeledBatch batch = tiny_batch();
  batch.embeddings.at(0, 1) = std::nan("");
  CHECK_THROWS_AS(write_emb(path, batch), PoisonedError);

  batch = tiny_batch();
  batch.labels = {0.5, 0.0};
  CHECK_THROWS_AS(write_emb(path, batch), ConfigError);

  batch = tiny_batch();
  batch.labels = {1.0, 0.0, 1.0};
  CHECK_THROWS_AS(write_emb(path, batch), DimensionError);

  batch = tiny_batch();
  batch.ground_truth = {3};
  CHECK_THROWS_AS(write_emb(path, batch), DimensionError);

  CHECK_THROWS_AS(read_emb("no_such_file.emb"), IoError);
}
