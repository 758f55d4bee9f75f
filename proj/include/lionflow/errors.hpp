#pragma once

#include <stdexcept>
#include <string>

namespace lionflow {

// Requested operation is outside what the type supports (e.g. exact
// transport for unequal cloud sizes in dimension >= 2).
class unsupported_operation : public std::logic_error {
public:
    explicit unsupported_operation(const std::string& what)
        : std::logic_error(what) {}
};

}  // namespace lionflow
