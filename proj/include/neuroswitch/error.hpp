#pragma once

#include <stdexcept>
#include <string>

namespace neuroswitch {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Rejected argument or invariant violation on a programmatic input.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

}  // namespace neuroswitch
