#ifndef SCRNET_ERROR_HPP
#define SCRNET_ERROR_HPP

#include <stdexcept>
#include <string>

namespace scrnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument or violated precondition (shapes, ranges, config values).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// File could not be read, written or decoded.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace scrnet

#endif  // SCRNET_ERROR_HPP
