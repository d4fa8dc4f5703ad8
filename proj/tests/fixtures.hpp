#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "rounds/case_model.hpp"

namespace rounds::fixtures {

// A worked acute myocarditis case with five auxiliary exams.
StructuredCase myocarditis_case();

// The same case as a model would write it during structuring.
std::string myocarditis_structured_reply();

// Valid, leakage-free case with 3 to 6 auxiliary exams. Deterministic in
// (index, seed).
StructuredCase synthetic_case(std::size_t index, std::uint64_t seed);
StructuredCase synthetic_case(std::size_t index, std::uint64_t seed, SystemCategory category);

// `n` synthetic cases spread round-robin over the six core systems.
Cohort synthetic_cohort(std::size_t n, std::uint64_t seed = 1);

// Fresh directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// splitmix64, fixed across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }
  bool coin() { return (next() & 1) != 0; }

 private:
  std::uint64_t state_;
};

}  // namespace rounds::fixtures
