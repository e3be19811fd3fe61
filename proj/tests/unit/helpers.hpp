#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "cvsig/preprocess.hpp"

namespace testing {

inline std::filesystem::path tmp_dir(const std::string& name) {
  const auto dir = std::filesystem::path(CVSIG_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline cvsig::Tensor random_tensor(cvsig::Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  cvsig::Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& v : t.data()) v = u(rng);
  return t;
}

// A preprocessed series with random activity and heart rate; `missing`
// minutes are masked out.
inline cvsig::data::PreprocessedSeries random_series(std::size_t T, std::uint64_t seed, double missing = 0.1,
                                                     const std::string& id = "P00000") {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  cvsig::data::PreprocessedSeries s;
  s.person_id = id;
  s.window_label = "w";
  s.activity = cvsig::Tensor({3, T});
  s.hr = cvsig::Tensor({1, T});
  s.loss_mask = cvsig::Tensor({T}, 1.0);
  for (std::size_t t = 0; t < T; ++t) {
    const double r = u(rng);
    if (r < 0.3) {
      s.activity.at(1, t) = 1.0;
    } else if (r < 0.35) {
      s.activity.at(2, t) = 1.0;
    } else {
      s.activity.at(0, t) = u(rng) < 0.5 ? 0.0 : u(rng);
    }
    s.hr[t] = n(rng);
    if (u(rng) < missing) s.loss_mask[t] = 0.0;
  }
  return s;
}

}  // namespace testing
