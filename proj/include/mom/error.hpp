#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mom {

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when the sample is too small for the requested confidence level.
class SampleTooSmall : public InvalidArgument {
 public:
  SampleTooSmall(std::size_t n, std::size_t minimal_n)
      : InvalidArgument("sample of size " + std::to_string(n) +
                        " is too small; need n >= " +
                        std::to_string(minimal_n)),
        n_(n),
        minimal_n_(minimal_n) {}

  std::size_t n() const noexcept { return n_; }
  std::size_t minimal_n() const noexcept { return minimal_n_; }

 private:
  std::size_t n_;
  std::size_t minimal_n_;
};

// Enumeration would exceed the configured number of kernel evaluations.
class BudgetExceeded : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// A kernel returned NaN or an infinity. `tuple` holds the sample indices of
// the offending evaluation, `blocks` the block tuple when one applies.
class PoisonedValue : public std::runtime_error {
 public:
  PoisonedValue(std::vector<std::size_t> tuple, std::vector<std::size_t> blocks,
                double value)
      : std::runtime_error(describe(tuple, blocks, value)),
        tuple_(std::move(tuple)),
        blocks_(std::move(blocks)),
        value_(value) {}

  const std::vector<std::size_t>& tuple() const noexcept { return tuple_; }
  const std::vector<std::size_t>& blocks() const noexcept { return blocks_; }
  double value() const noexcept { return value_; }

 private:
  static std::string join(const std::vector<std::size_t>& v) {
    std::string s = "(";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(v[i]);
    }
    return s + ")";
  }
  static std::string describe(const std::vector<std::size_t>& tuple,
                              const std::vector<std::size_t>& blocks,
                              double value) {
    std::string s = "non-finite kernel value " + std::to_string(value) +
                    " at sample indices " + join(tuple);
    if (!blocks.empty()) s += " in blocks " + join(blocks);
    return s;
  }

  std::vector<std::size_t> tuple_;
  std::vector<std::size_t> blocks_;
  double value_;
};

}  // namespace mom
