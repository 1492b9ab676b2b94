#pragma once

#include <stdexcept>
#include <string>

namespace bsdelab {

// Malformed or inconsistent descriptors / configs. Maps to CLI exit status 2.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Solver divergence, instability, insufficient statistics. Exit status 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace bsdelab
