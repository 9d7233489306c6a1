#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace tclsta {

// Exception carrying a stable machine-readable category ("shape-mismatch",
// "corrupt-file", ...) next to the human-readable detail. The CLI prints the
// category on one line and maps it to an exit code.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& detail)
      : std::runtime_error(category + ": " + detail), category_(std::move(category)) {}

  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

[[noreturn]] inline void fail(const std::string& category, const std::string& detail) {
  throw Error(category, detail);
}

}  // namespace tclsta
