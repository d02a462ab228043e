#include "causalmask/noise.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "causalmask/errors.hpp"

namespace causalmask {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kUniformScale = 0x1.0p-53;
}  // namespace

double gumbel_from_uniform(double u) {
  u = std::clamp(u, 1e-12, 1.0 - 1e-12);
  return -std::log(-std::log(u));
}

double NoiseSource::uniform() {
  return static_cast<double>(engine_() >> 11) * kUniformScale;
}

double NoiseSource::gumbel() { return gumbel_from_uniform(uniform()); }

double NoiseSource::gaussian() {
  const double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

double NoiseSource::bernoulli(double p) {
  if (p < 0.0 || p > 1.0) {
    throw ConfigError("bernoulli: p = " + std::to_string(p) + " outside [0,1]");
  }
  return uniform() < p ? 1.0 : 0.0;
}

void NoiseSource::shuffle(std::vector<std::size_t>& indices) {
  if (indices.size() < 2) {
    return;
  }
  for (std::size_t i = indices.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(engine_() % (i + 1));
    std::swap(indices[i], indices[j]);
  }
}

std::string NoiseSource::serialize() const {
  std::ostringstream out;
  out << engine_;
  return out.str();
}

NoiseSource NoiseSource::deserialize(const std::string& text) {
  NoiseSource source(0);
  std::istringstream in(text);
  in >> source.engine_;
  if (in.fail()) {
    throw FormatError("NoiseSource::deserialize: malformed engine state", 0);
  }
  return source;
}

DenseMatrix sample_gumbel(NoiseSource& noise, std::size_t rows, std::size_t cols) {
  DenseMatrix m(rows, cols);
  for (double& v : m.data) {
    v = noise.gumbel();
  }
  return m;
}

DenseMatrix sample_gaussian(NoiseSource& noise, std::size_t rows, std::size_t cols) {
  DenseMatrix m(rows, cols);
  for (double& v : m.data) {
    v = noise.gaussian();
  }
  return m;
}

DenseMatrix sample_bernoulli(NoiseSource& noise, std::size_t rows, std::size_t cols, double p) {
  DenseMatrix m(rows, cols);
  for (double& v : m.data) {
    v = noise.bernoulli(p);
  }
  return m;
}

}  // namespace causalmask
