// spectroscopy.hpp - Impulsive third-order response and 2D electronic spectra
//
// Each dipole interaction acts as the commutator mu^x on every ADO. After
// the first interaction the rephasing pathway keeps the ge block and the
// nonrephasing pathway the eg block; after the third both keep the eg block,
// whose tier-0 element is the signal. Stored values omit the overall i^3, so
// a bare two-level system gives 2 at t1 = t3 = 0 for both pathways.
//
// When the generator runs in a rotating frame the response carries
// frequencies relative to frame_frequency and the spectral axes are shifted
// back by it.

#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "lduo/propagator.hpp"

namespace lduo::spectroscopy {

struct ResponseSpec {
    std::size_t n1{64};
    std::size_t n3{64};
    double dt1{4.0};            // fs, sampling step along t1
    double dt3{4.0};            // fs, sampling step along t3
    double waiting_time{0.0};   // T, fs
    double integrator_dt{1.0};  // fs; dt1, dt3 and T must be whole multiples
    unsigned threads{1};        // width of the parallel map over t1 columns
};

struct ResponseGrid {
    std::size_t n1{0}, n3{0};
    double dt1{0.0}, dt3{0.0};
    double waiting_time{0.0};
    double frame_frequency{0.0};
    std::vector<cd> rephasing;    // [i1 * n3 + i3]
    std::vector<cd> nonrephasing; // [i1 * n3 + i3]

    [[nodiscard]] cd rephasing_at(std::size_t i1, std::size_t i3) const { return rephasing[i1 * n3 + i3]; }
    [[nodiscard]] cd nonrephasing_at(std::size_t i1, std::size_t i3) const { return nonrephasing[i1 * n3 + i3]; }
};

// Both pathways on the (t1, t3) grid. n1 and n3 must be powers of two.
ResponseGrid response3(const Generator& gen, const ADOState& equilibrium, const ResponseSpec& spec);

// mu^x applied to every ADO.
ADOState apply_dipole_commutator(const ADOState& state, const Eigen::Matrix2cd& mu);

enum class Block { gg, eg, ge, ee };
// Zero every element except the given one in every ADO.
ADOState select_block(const ADOState& state, Block keep);

struct SpectrumOptions {
    double phase_flip_sign{-1.0}; // output = Re(S) + phase_flip_sign * Im(S)
    bool rephasing_only{false};
    bool hann_window{false};
    std::size_t zero_pad{4};
};

struct SpectrumGrid {
    std::vector<double> omega_tau; // cm^-1, excitation axis
    std::vector<double> omega_t;   // cm^-1, detection axis
    std::vector<double> amplitude; // [i_tau * omega_t.size() + i_t]

    [[nodiscard]] double at(std::size_t i_tau, std::size_t i_t) const {
        return amplitude[i_tau * omega_t.size() + i_t];
    }
    // Bilinear interpolation; zero outside the grid.
    [[nodiscard]] double sample(double w_tau, double w_t) const;
};

SpectrumGrid spectrum2d(const ResponseGrid& resp, const SpectrumOptions& options = {});

// Frequency spacing of the unpadded transform, 1/(N dt c) in cm^-1.
double fft_bin_width(std::size_t n, double dt);

struct PeakShape {
    double omega_tau;
    double omega_t;
    double amplitude;
    double diagonal_fwhm;     // along (1, 1), cm^-1 of arc length
    double antidiagonal_fwhm; // along (1, -1)

    [[nodiscard]] double width_ratio() const { return diagonal_fwhm / antidiagonal_fwhm; }
};

// Largest value within radius (cm^-1, box) of the given point and its
// half-maximum widths along the diagonal and anti-diagonal.
PeakShape analyze_peak(const SpectrumGrid& spectrum, double omega_tau, double omega_t, double radius);

struct LinearSpec {
    std::size_t n{256};
    double dt{4.0};            // sampling step, fs
    double integrator_dt{1.0}; // fs
    std::size_t zero_pad{4};
    bool hann_window{false};
};

struct LinearSpectrum {
    std::vector<double> omega;      // cm^-1
    std::vector<double> absorption; // Re of the half-sided transform
    std::vector<cd> correlation;    // Tr(mu rho(t)) on the sampling grid
};

// Dipole correlation Tr(mu e^{Lt}(mu rho_eq)) and its transform.
LinearSpectrum linear_absorption(const Generator& gen, const ADOState& equilibrium, const LinearSpec& spec);

} // namespace lduo::spectroscopy
