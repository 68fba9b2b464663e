#include "labeltune/errors.hpp"

#include <sstream>

namespace labeltune {

DivergenceError::DivergenceError(std::size_t step, double learning_rate)
    : std::runtime_error([&] {
          std::ostringstream msg;
          msg << "objective became non-finite at step " << step << " (learning rate "
              << learning_rate << ")";
          return msg.str();
      }()),
      step_(step),
      learning_rate_(learning_rate) {}

}  // namespace labeltune
