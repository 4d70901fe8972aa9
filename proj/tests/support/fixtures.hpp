#pragma once

#include <filesystem>
#include <string>

#include "coc/distributions.hpp"

namespace coc::testing {

inline JobClass iid_class(int d, int k, const SizeDistribution& law) {
  return JobClass::make(d, k, JointSizeLaw::iid(law, d));
}

inline JobClass exp_class(int d, int k, double rate = 1.0) {
  return iid_class(d, k, SizeDistribution::exponential(rate));
}

inline ClassMix exp_mix(int d, int k, double lambda) { return ClassMix::single(exp_class(d, k), lambda); }

inline std::string source_path(const std::string& rel) {
  return (std::filesystem::path(COC_SOURCE_DIR) / rel).string();
}

// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("coc_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace coc::testing
