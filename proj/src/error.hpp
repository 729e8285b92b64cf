#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace loga {

// Error taxonomy shared by the core and the C API. Each code maps 1:1 to a
// LOGA_E_* status in include/loga/loga.h.
enum class ErrCode {
  invalid_arg,
  dim,         // tensor shape mismatch
  config,      // bad configuration value
  data,        // bad runtime data (labels, empty tracklet, ...)
  validation,  // inconsistent manifest
  io,
  version,     // unknown container/checkpoint version
  checksum,
  truncated,
  contract,    // API contract violation (e.g. non-scalar backward root)
  lookup,
  numeric,     // non-finite loss
  internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrCode code, std::string msg) : std::runtime_error(std::move(msg)), code_(code) {}
  ErrCode code() const { return code_; }

 private:
  ErrCode code_;
};

namespace detail {
inline void format_into(std::ostringstream&) {}
template <class A, class... Rest>
void format_into(std::ostringstream& os, const A& a, const Rest&... rest) {
  os << a;
  format_into(os, rest...);
}
}  // namespace detail

template <class... Args>
[[noreturn]] void raise(ErrCode code, const Args&... args) {
  std::ostringstream os;
  detail::format_into(os, args...);
  throw Error(code, os.str());
}

template <class... Args>
void require(bool cond, ErrCode code, const Args&... args) {
  if (!cond) raise(code, args...);
}

}  // namespace loga
