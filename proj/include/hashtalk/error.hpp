#pragma once

#include <stdexcept>
#include <string>

namespace hashtalk {

// Base class for all failures raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user input: malformed files, out-of-range settings, contract violations.
struct ValidationError : Error {
    using Error::Error;
};

}  // namespace hashtalk
