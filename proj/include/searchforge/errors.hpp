#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace searchforge {

// Base for all typed failures. `code()` is the stable machine-readable name
// (e.g. "IndexMissing"); what() carries the human detail.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& detail)
      : std::runtime_error(code + ": " + detail), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

#define SEARCHFORGE_ERROR(Name)                                   \
  class Name : public ::searchforge::Error {                      \
   public:                                                        \
    explicit Name(const std::string& detail = "")                 \
        : ::searchforge::Error(#Name, detail) {}                  \
  }

}  // namespace searchforge
