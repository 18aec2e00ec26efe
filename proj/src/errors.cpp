#include "cconn/errors.hpp"

#include <iostream>

namespace cconn {

int exit_code(const Error& e) {
  if (dynamic_cast<const DataError*>(&e)) return 3;
  if (dynamic_cast<const NumericalError*>(&e)) return 4;
  if (dynamic_cast<const GeometryError*>(&e)) return 4;
  return 2;
}

void warn(const std::string& message) { std::clog << "warning: " << message << '\n'; }

}  // namespace cconn
