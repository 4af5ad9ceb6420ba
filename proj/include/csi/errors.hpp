#pragma once

#include <stdexcept>
#include <string>

namespace csi {

// Shapes or indices that do not line up (tensor dims, state ids, file schema).
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Inconsistent user configuration (K > N, d_max < 1, missing inputs).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Truncation horizon too short for the requested quantity.
class HorizonError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Probabilities that cannot come from a valid model.
class ModelInconsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace csi
