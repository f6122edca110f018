#pragma once

#include <stdexcept>
#include <string>

namespace osr {

// Error taxonomy shared across the library. The CLI maps these onto exit
// codes: config/data/dimension/parse problems -> 2, numeric failures -> 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or dimension mismatch between tensors.
struct DimError : Error {
    using Error::Error;
};

// Bad labels, malformed files, empty inputs.
struct DataError : Error {
    using Error::Error;
};

// Invalid configuration values.
struct ConfigError : Error {
    using Error::Error;
};

// NaN/Inf encountered where finite values are required.
struct NumericError : Error {
    using Error::Error;
};

// API misuse (e.g. backward() on a non-scalar root). These indicate bugs in
// calling code, not bad data.
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

} // namespace osr
