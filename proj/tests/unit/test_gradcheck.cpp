#include "causalmask/gradcheck.hpp"

#include <cmath>
#include <vector>

#include "causalmask/errors.hpp"
#include "doctest.h"

using namespace causalmask;

TEST_CASE("relative error conventions") {
  CHECK(relative_error(0.0, 0.0) == 0.0);
  CHECK(relative_error(2.0, 1.0) == 0.5);
  CHECK(relative_error(1.0, 2.0) == 0.5);
  // floor forgives sub-1e-10 absolute noise
  CHECK(relative_error(1e-11, 0.0) < 1e-4);
  CHECK(relative_error(1e-3, 0.0) == 1.0);
}

TEST_CASE("quadratic loss checks to near machine precision") {
  std::vector<double> w{0.5, -1.25, 2.0, 0.0, 3.5};
  auto loss = [](std::span<const double> x) {
    double acc = 0.0;
    for (double v : x) {
      acc += v * v;
    }
    return 0.5 * acc;
  };
  // analytic gradient of ||w||^2/2 is w itself
  auto result = finite_diff_check(loss, w, w, 1e-5);
  CHECK(result.max_rel_error < 1e-8);
}

TEST_CASE("constant loss yields error defined as zero") {
  std::vector<double> w{1.0, 2.0};
  std::vector<double> zero{0.0, 0.0};
  auto loss = [](std::span<const double>) { return 42.0; };
  auto result = finite_diff_check(loss, w, zero, 1e-5);
  CHECK(result.max_rel_error == 0.0);
}

TEST_CASE("a wrong analytic gradient is flagged") {
  std::vector<double> w{1.0};
  std::vector<double> wrong{3.0};  // true gradient is 2w = 2
  auto loss = [](std::span<const double> x) { return x[0] * x[0]; };
  auto result = finite_diff_check(loss, w, wrong, 1e-5);
  CHECK(result.max_rel_error > 0.3);
  CHECK(result.worst_index == 0);
  CHECK(result.analytic_at_worst == 3.0);
  CHECK(result.numeric_at_worst == doctest::Approx(2.0).epsilon(1e-7));
}

TEST_CASE("non-finite losses and bad arguments are rejected") {
  std::vector<double> w{1.0};
  std::vector<double> g{2.0};
  auto bad_loss = [](std::span<const double> x) { return std::log(-1.0 * x[0] * x[0]); };
  CHECK_THROWS_AS(finite_diff_check(bad_loss, w, g, 1e-5), PoisonedError);

  auto ok_loss = [](std::span<const double> x) { return x[0]; };
  std::vector<double> mismatched{1.0, 2.0};
  CHECK_THROWS_AS(finite_diff_check(ok_loss, w, mismatched, 1e-5), DimensionError);
  CHECK_THROWS_AS(finite_diff_check(ok_loss, w, g, 0.0), ConfigError);
}
