#include "sea/error.hpp"

namespace sea {

const char* to_string(Errc code) noexcept
{
    switch (code) {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::evaluation_singularity: return "evaluation singularity";
    case Errc::no_bandwidth: return "no bandwidth";
    case Errc::discretization_singularity: return "discretization singularity";
    case Errc::improper_system: return "improper system";
    case Errc::singular_nominal: return "singular nominal";
    case Errc::thermal_runaway: return "thermal runaway";
    case Errc::zero_headroom: return "zero headroom";
    case Errc::no_overload_headroom: return "no overload headroom";
    case Errc::sampling_inadequate: return "sampling inadequate";
    case Errc::config_rejected: return "configuration rejected";
    case Errc::divergence: return "numerical divergence";
    case Errc::insufficient_data: return "insufficient data";
    case Errc::indeterminate: return "indeterminate";
    case Errc::ill_posed_fit: return "ill-posed fit";
    case Errc::parse_error: return "parse error";
    }
    return "unknown";
}

} // namespace sea
