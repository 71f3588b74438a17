#ifndef DGNET_ERROR_H_
#define DGNET_ERROR_H_

#include <stdexcept>
#include <string>

namespace dgnet {

// Invalid arguments, configs or inputs. The CLI maps this to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Tensor shapes that do not conform to an op's contract.
class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A forward op produced NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem and format failures. The CLI maps this to exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dgnet

#endif  // DGNET_ERROR_H_
