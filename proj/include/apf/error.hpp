#pragma once

#include <stdexcept>
#include <string>

namespace apf {

enum class ErrorKind {
  InvalidArgument,  // precondition violated by the caller
  Config,           // configuration rejected
  Io,               // file missing, unreadable, or unwritable
  Corrupt,          // malformed cache or image data
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace apf
