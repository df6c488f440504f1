#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "liri/encoder.hpp"
#include "liri/types.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("liri-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Row-major float matrix from nested lists.
inline liri::TokenMatrix matrix(std::initializer_list<std::initializer_list<float>> rows) {
  liri::TokenMatrix m;
  std::uint32_t b = 0;
  for (const auto& r : rows) {
    m.dim = static_cast<std::uint32_t>(r.size());
    m.data.insert(m.data.end(), r.begin(), r.end());
    m.bucket_ids.push_back(b++);
  }
  return m;
}

inline liri::TokenMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::uint32_t dim) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  liri::TokenMatrix m;
  m.dim = dim;
  for (std::size_t i = 0; i < rows * dim; ++i) m.data.push_back(u(rng));
  for (std::size_t i = 0; i < rows; ++i) m.bucket_ids.push_back(static_cast<std::uint32_t>(i));
  return m;
}

inline std::vector<std::vector<double>> to_rows(const liri::TokenMatrix& m) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    out.emplace_back(r.begin(), r.end());
  }
  return out;
}

inline std::string random_word(std::mt19937_64& rng, std::size_t vocab) {
  return "w" + std::to_string(std::uniform_int_distribution<std::size_t>(0, vocab - 1)(rng));
}

}  // namespace testing
