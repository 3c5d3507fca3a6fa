#include <powerprior/errors.hpp>

namespace powerprior {

int exit_code_for(const std::exception& e) noexcept
{
    if (dynamic_cast<const ConfigError*>(&e))
        return 2;
    if (dynamic_cast<const DiagnosticsError*>(&e))
        return 3;
    if (dynamic_cast<const NumericalError*>(&e) || dynamic_cast<const DomainError*>(&e)
        || dynamic_cast<const OutOfRangeError*>(&e))
        return 4;
    return 4;
}

} // namespace powerprior
