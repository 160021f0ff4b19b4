#include "cova/errors.hpp"

namespace cova {

ParseError::ParseError(const std::string& what, std::optional<std::int64_t> frame)
    : DataError(frame ? what + " (frame " + std::to_string(*frame) + ")" : what), frame_(frame) {}

DivergenceError::DivergenceError(const std::string& what, int epoch)
    : Error(what + " at epoch " + std::to_string(epoch)), epoch_(epoch) {}

}  // namespace cova
