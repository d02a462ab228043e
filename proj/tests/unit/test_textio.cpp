#include "causalmask/textio.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "causalmask/errors.hpp"
#include "causalmask/fileio.hpp"
#include "causalmask/noise.hpp"
#include "doctest.h"

using namespace causalmask;

TEST_CASE("textio: serialize then parse preserves schema, order, and values") {
  TextDoc doc;
  doc.schema = "causalmask.config.v1";
  doc.set("alpha", "0.1");
  doc.set("name", "canonical benchmark run");
  doc.set_u64("seed", 12345678901234567ull);
  doc.set_bool("resume", true);
  doc.set_double("tau", 5.0);

  const std::string text = serialize_text_doc(doc);
  const TextDoc back = parse_text_doc(text);
  CHECK(back.schema == doc.schema);
  REQUIRE(back.entries.size() == doc.entries.size());
  for (std::size_t i = 0; i < doc.entries.size(); ++i) {
    CHECK(back.entries[i].first == doc.entries[i].first);
    CHECK(back.entries[i].second == doc.entries[i].second);
  }
  CHECK(back.require_u64("seed") == 12345678901234567ull);
  CHECK(back.require_bool("resume") == true);
  CHECK(back.require_double("tau") == 5.0);
  CHECK(back.require("name") == "canonical benchmark run");
}

TEST_CASE("textio: set replaces an existing key in place") {
  TextDoc doc;
  doc.schema = "s.v1";
  doc.set("a", "1");
  doc.set("b", "2");
  doc.set("a", "3");
  REQUIRE(doc.entries.size() == 2);
  CHECK(doc.entries[0].first == "a");
  CHECK(doc.entries[0].second == "3");
  CHECK(doc.require("a") == "3");
}

TEST_CASE("textio: doubles round-trip bit-exactly through %.17g") {
  NoiseSource noise(99);
  TextDoc doc;
  doc.schema = "roundtrip.v1";
  for (int i = 0; i < 1000; ++i) {
    const double scale = std::pow(10.0, -300.0 + 600.0 * noise.uniform());
    const double v = (noise.uniform() - 0.5) * scale;
    doc.set_double("v", v);
    const TextDoc back = parse_text_doc(serialize_text_doc(doc));
    const double parsed = back.require_double("v");
    CHECK(parsed == v);
  }
  const double specials[] = {0.0,
                             -0.0,
                             1.0,
                             -1.0,
                             3.141592653589793,
                             std::numeric_limits<double>::denorm_min(),
                             std::numeric_limits<double>::min(),
                             std::numeric_limits<double>::max(),
                             -std::numeric_limits<double>::max(),
                             5e-324,
                             1e308};
  for (double v : specials) {
    doc.set_double("v", v);
    const double parsed = parse_text_doc(serialize_text_doc(doc)).require_double("v");
    CHECK(parsed == v);
    CHECK(std::signbit(parsed) == std::signbit(v));
  }
}

TEST_CASE("textio: comments, blank lines, and CRLF are tolerated") {
  const std::string text =
      "# leading comment\r\n"
      "\r\n"
      "demo.v1\r\n"
      "  key.one   =   value with spaces   \r\n"
      "# interior comment\n"
      "\n"
      "key.two=7";
  const TextDoc doc = parse_text_doc(text);
  CHECK(doc.schema == "demo.v1");
  CHECK(doc.require("key.one") == "value with spaces");
  CHECK(doc.require_u64("key.two") == 7);
}

TEST_CASE("textio: parse errors carry the offending byte offset") {
  CHECK_THROWS_AS(parse_text_doc(""), FormatError);
  CHECK_THROWS_AS(parse_text_doc("# only comments\n\n"), FormatError);
  CHECK_THROWS_AS(parse_text_doc("bad schema line!\nk = v\n"), FormatError);
  CHECK_THROWS_AS(parse_text_doc("s.v1\nno equals sign\n"), FormatError);
  CHECK_THROWS_AS(parse_text_doc("s.v1\nbad key! = v\n"), FormatError);
  CHECK_THROWS_AS(parse_text_doc("s.v1\n = v\n"), FormatError);
  CHECK_THROWS_AS(parse_text_doc("s.v1\na = 1\na = 2\n"), FormatError);

  try {
    parse_text_doc("s.v1\nok = 1\nbroken line\n");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 12);  // start of "broken line"
  }
}

TEST_CASE("textio: typed getters reject absent keys and malformed values") {
  const TextDoc doc = parse_text_doc("s.v1\nnum = 1.5\ntext = abc\nneg = -3\nflag = 2\n");
  CHECK(doc.require_double("num") == 1.5);
  CHECK_THROWS_WITH_AS(doc.require("missing"), doctest::Contains("missing"), FormatError);
  CHECK_THROWS_AS(doc.require_double("text"), FormatError);
  CHECK_THROWS_AS(doc.require_u64("text"), FormatError);
  CHECK_THROWS_AS(doc.require_u64("neg"), FormatError);
  CHECK_THROWS_AS(doc.require_u64("num"), FormatError);
  CHECK_THROWS_AS(doc.require_bool("flag"), FormatError);
  CHECK(doc.has("num"));
  CHECK(!doc.has("absent"));
}

TEST_CASE("textio: writer-side validation") {
  TextDoc doc;
  doc.schema = "s.v1";
  CHECK_THROWS_AS(doc.set("bad key", "v"), ConfigError);
  CHECK_THROWS_AS(doc.set("", "v"), ConfigError);
  CHECK_THROWS_AS(doc.set("k", "line1\nline2"), ConfigError);
  doc.set("k", "fine");
  doc.schema = "white space";
  CHECK_THROWS_AS(serialize_text_doc(doc), ConfigError);
}

TEST_CASE("textio: file round-trip is atomic and replaces prior content") {
  const std::string path = "textio_test_doc.txt";
  TextDoc doc;
  doc.schema = "file.v1";
  doc.set_double("x", 0.1);
  write_text_doc(path, doc);
  doc.set_double("x", 0.2);
  write_text_doc(path, doc);

  const TextDoc back = read_text_doc(path);
  CHECK(back.require_double("x") == 0.2);
  CHECK_THROWS_AS(read_file_bytes(path + ".tmp"), IoError);
  CHECK_THROWS_AS(read_text_doc("definitely_not_here.txt"), IoError);
  std::remove(path.c_str());
}
