#pragma once

#include <stdexcept>
#include <string>

namespace sea {

enum class Errc {
    invalid_argument,
    evaluation_singularity,
    no_bandwidth,
    discretization_singularity,
    improper_system,
    singular_nominal,
    thermal_runaway,
    zero_headroom,
    no_overload_headroom,
    sampling_inadequate,
    config_rejected,
    divergence,
    insufficient_data,
    indeterminate,
    ill_posed_fit,
    parse_error,
};

const char* to_string(Errc code) noexcept;

class Error : public std::runtime_error
{
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace sea
