// units.hpp - Physical constants and the cm^-1 / fs unit convention
//
// Every energy and frequency in lduo is a wavenumber in cm^-1 and every time
// is in fs. hbar = 1 is realised by multiplying wavenumbers with
// angular_conversion (2*pi*c in rad/fs per cm^-1) wherever a rate enters a
// time derivative or a phase.

#pragma once

#include <numbers>

namespace lduo::units {

struct PhysicalConstants {
    // CODATA 2018 k_B/(h c), exact in the 2019 SI.
    static constexpr double kB_wavenumber_per_kelvin = 0.69503480048612741;
    // c = 299792458 m/s expressed in cm/fs.
    static constexpr double speed_of_light_cm_per_fs = 2.99792458e-5;
    static constexpr double angular_conversion =
        2.0 * std::numbers::pi * speed_of_light_cm_per_fs;
};

inline constexpr double kAngularPerWavenumber = PhysicalConstants::angular_conversion;

struct Thermodynamics {
    double temperature;   // K
    double beta_hbar;     // fs; beta*hbar*omega is dimensionless for omega in rad/fs
    double kT_wavenumber; // cm^-1

    // beta*hbar*omega/2 for a wavenumber omega given in cm^-1.
    [[nodiscard]] double half_reduced(double wavenumber) const noexcept {
        return 0.5 * wavenumber / kT_wavenumber;
    }
    // n-th bosonic Matsubara frequency 2*pi*n/(beta*hbar), in cm^-1.
    [[nodiscard]] double matsubara(int n) const noexcept {
        return 2.0 * std::numbers::pi * n * kT_wavenumber;
    }
};

// Throws DomainError for non-positive or non-finite T.
Thermodynamics beta_from_temperature(double kelvin);

// Temperature at which kT equals the given wavenumber.
double temperature_for_kT(double kT_wavenumber);

double wavenumber_to_angular(double wavenumber);
double angular_to_wavenumber(double rad_per_fs);

} // namespace lduo::units
