#include "lduo/units.hpp"

#include <cmath>
#include <string>

#include "lduo/errors.hpp"

namespace lduo::units {

Thermodynamics beta_from_temperature(double kelvin) {
    if (!std::isfinite(kelvin) || !(kelvin > 0.0)) {
        throw DomainError("beta_from_temperature: temperature must be positive and finite, got " +
                          std::to_string(kelvin));
    }
    const double kT = PhysicalConstants::kB_wavenumber_per_kelvin * kelvin;
    return Thermodynamics{kelvin, 1.0 / (kAngularPerWavenumber * kT), kT};
}

double temperature_for_kT(double kT_wavenumber) {
    return kT_wavenumber / PhysicalConstants::kB_wavenumber_per_kelvin;
}

double wavenumber_to_angular(double wavenumber) {
    if (!std::isfinite(wavenumber)) throw DomainError("wavenumber_to_angular: non-finite input");
    return kAngularPerWavenumber * wavenumber;
}

double angular_to_wavenumber(double rad_per_fs) {
    if (!std::isfinite(rad_per_fs)) throw DomainError("angular_to_wavenumber: non-finite input");
    return rad_per_fs / kAngularPerWavenumber;
}

} // namespace lduo::units
