#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "lduo/bath.hpp"
#include "lduo/errors.hpp"
#include "lduo/hierarchy.hpp"
#include "lduo/propagator.hpp"
#include "lduo/spectroscopy.hpp"
#include "oracles.hpp"

using namespace lduo;
using hierarchy::TruncationRule;
using Mat = Eigen::Matrix2cd;

namespace {

const auto kRoom = units::beta_from_temperature(300.0);

bath::BathModel uncoupled_model() {
    return bath::BathModel::build(bath::LorentzDrudeBath{0.0, 100.0}, bath::UndampedBath{0.0, 500.0}, kRoom);
}

ADOState ground(std::size_t nodes) {
    Mat g = Mat::Zero();
    g(0, 0) = 1.0;
    return ADOState::factorized(nodes, g);
}

// Index of the grid point closest to w.
std::size_t nearest(const std::vector<double>& axis, double w) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < axis.size(); ++i)
        if (std::abs(axis[i] - w) < std::abs(axis[best] - w)) best = i;
    return best;
}

spectroscopy::ResponseGrid synthetic(std::size_t n, double dt, double w0) {
    spectroscopy::ResponseGrid g;
    g.n1 = g.n3 = n;
    g.dt1 = g.dt3 = dt;
    const double c = oracle::angular_per_wavenumber();
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k) {
            const double t1 = static_cast<double>(j) * dt, t3 = static_cast<double>(k) * dt;
            g.rephasing.push_back(std::exp(cd(0.0, c * w0 * (t1 - t3))));
            g.nonrephasing.push_back(std::exp(cd(0.0, -c * w0 * (t1 + t3))));
        }
    }
    return g;
}

} // namespace

TEST(DipoleAlgebra, CommutatorAndBlocks) {
    const auto sys = SystemModel::two_level(3000.0);
    const auto g = ground(2);
    const auto x = spectroscopy::apply_dipole_commutator(g, sys.dipole);
    EXPECT_EQ(x.matrix(0)(1, 0), cd(1.0));
    EXPECT_EQ(x.matrix(0)(0, 1), cd(-1.0));
    EXPECT_EQ(x.matrix(1), Mat::Zero());
    const auto eg = spectroscopy::select_block(x, spectroscopy::Block::eg);
    EXPECT_EQ(eg.matrix(0)(1, 0), cd(1.0));
    EXPECT_EQ(eg.matrix(0)(0, 1), cd(0.0));
    const auto ge = spectroscopy::select_block(x, spectroscopy::Block::ge);
    EXPECT_EQ(ge.matrix(0)(0, 1), cd(-1.0));
    EXPECT_EQ(ge.matrix(0)(1, 0), cd(0.0));
}

TEST(Response3, BareTwoLevelSystem) {
    const auto model = uncoupled_model();
    const auto space = hierarchy::build(model, TruncationRule{5000.0, 2});
    const Generator gen(model, space, SystemModel::two_level(3000.0));
    spectroscopy::ResponseSpec spec;
    spec.n1 = spec.n3 = 8;
    spec.dt1 = spec.dt3 = 0.5;
    spec.integrator_dt = 0.05;
    spec.waiting_time = 1.0;
    const auto r = spectroscopy::response3(gen, ground(space.size()), spec);
    EXPECT_NEAR(std::abs(r.rephasing_at(0, 0) - 2.0), 0.0, 1e-8);
    EXPECT_NEAR(std::abs(r.nonrephasing_at(0, 0) - 2.0), 0.0, 1e-8);
    const double c = oracle::angular_per_wavenumber() * 3000.0;
    for (std::size_t j = 0; j < 8; ++j) {
        for (std::size_t k = 0; k < 8; ++k) {
            const double t1 = 0.5 * static_cast<double>(j), t3 = 0.5 * static_cast<double>(k);
            EXPECT_NEAR(std::abs(r.rephasing_at(j, k)), 2.0, 1e-8);
            EXPECT_NEAR(std::abs(r.rephasing_at(j, k) - 2.0 * std::exp(cd(0.0, c * (t1 - t3)))), 0.0, 1e-7);
            EXPECT_NEAR(std::abs(r.nonrephasing_at(j, k) - 2.0 * std::exp(cd(0.0, -c * (t1 + t3)))), 0.0, 1e-7);
            // conjugate partners: the t1 phase is reversed, the t3 phase shared
            const cd a = r.rephasing_at(j, k) / r.rephasing_at(0, k);
            const cd b = r.nonrephasing_at(j, k) / r.nonrephasing_at(0, k);
            EXPECT_NEAR(std::abs(a - std::conj(b)), 0.0, 1e-9);
        }
    }
}

TEST(Response3, ThreadCountDoesNotChangeResult) {
    const auto model = bath::BathModel::build(bath::LorentzDrudeBath{}, bath::UndampedBath{}, kRoom);
    const auto space = hierarchy::build(model, TruncationRule{5000.0, 3});
    const Generator gen(model, space, SystemModel::two_level(3000.0), {3000.0});
    spectroscopy::ResponseSpec spec;
    spec.n1 = spec.n3 = 8;
    spec.waiting_time = 8.0;
    const auto eq = equilibrate(gen, 1.0).state;
    const auto a = spectroscopy::response3(gen, eq, spec);
    spec.threads = 3;
    const auto b = spectroscopy::response3(gen, eq, spec);
    EXPECT_EQ(a.rephasing, b.rephasing);
    EXPECT_EQ(a.nonrephasing, b.nonrephasing);
    EXPECT_EQ(a.frame_frequency, 3000.0);
}

TEST(Response3, ContractChecks) {
    const auto model = uncoupled_model();
    const auto space = hierarchy::build(model, TruncationRule{5000.0, 2});
    const Generator gen(model, space, SystemModel::two_level(3000.0), {3000.0});
    spectroscopy::ResponseSpec spec;
    spec.n1 = 6;
    EXPECT_THROW(spectroscopy::response3(gen, ground(space.size()), spec), ContractError);
    spec.n1 = 8;
    spec.dt1 = 3.3;
    EXPECT_THROW(spectroscopy::response3(gen, ground(space.size()), spec), ContractError);
    spec.dt1 = 4.0;
    EXPECT_THROW(spectroscopy::response3(gen, ground(3), spec), ContractError);
}

TEST(Spectrum2d, AxisCalibration) {
    const std::size_t n = 64;
    const double dt = 4.0;
    const double bin = spectroscopy::fft_bin_width(n, dt);
    EXPECT_NEAR(bin, 1.0 / (n * dt * 2.99792458e-5), 1e-9);
    for (double w0 : {2500.0, 3000.0, 3500.0}) {
        const auto s = spectroscopy::spectrum2d(synthetic(n, dt, w0), {-1.0, true, false, 4});
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < s.omega_tau.size(); ++i)
            for (std::size_t j = 0; j < s.omega_t.size(); ++j)
                if (s.at(i, j) > s.at(bi, bj)) {
                    bi = i;
                    bj = j;
                }
        EXPECT_LE(std::abs(s.omega_tau[bi] - w0), bin) << w0;
        EXPECT_LE(std::abs(s.omega_t[bj] - w0), bin) << w0;
    }
}

TEST(Spectrum2d, ZeroCouplingGivesSingleNarrowPeak) {
    const auto model = uncoupled_model();
    const auto space = hierarchy::build(model, TruncationRule{5000.0, 2});
    const Generator gen(model, space, SystemModel::two_level(3000.0), {3000.0});
    spectroscopy::ResponseSpec spec;
    spec.n1 = spec.n3 = 64;
    spec.integrator_dt = 4.0;
    const auto r = spectroscopy::response3(gen, ground(space.size()), spec);
    const auto s = spectroscopy::spectrum2d(r);
    const auto i0 = nearest(s.omega_tau, 3000.0), j0 = nearest(s.omega_t, 3000.0);
    EXPECT_DOUBLE_EQ(s.omega_tau[i0], 3000.0);
    EXPECT_DOUBLE_EQ(s.omega_t[j0], 3000.0);
    // the truncated, undamped signal leaves a dispersive admixture, so the
    // padded maximum sits near but not exactly on the grid point
    const double bin = spectroscopy::fft_bin_width(64, 4.0);
    std::size_t arg = 0;
    for (std::size_t k = 1; k < s.amplitude.size(); ++k)
        if (s.amplitude[k] > s.amplitude[arg]) arg = k;
    const double best = s.amplitude[arg];
    EXPECT_LE(std::abs(s.omega_tau[arg / s.omega_t.size()] - 3000.0), bin);
    EXPECT_LE(std::abs(s.omega_t[arg % s.omega_t.size()] - 3000.0), bin);
    EXPECT_GT(s.at(i0, j0), 0.5 * best);
    // half-maximum width along the detection axis, in units of the unpadded bin
    std::size_t lo = j0, hi = j0;
    while (lo > 0 && s.at(i0, lo) > 0.5 * best) --lo;
    while (hi + 1 < s.omega_t.size() && s.at(i0, hi) > 0.5 * best) ++hi;
    const double width = s.omega_t[hi] - s.omega_t[lo];
    EXPECT_GT(width, 0.5 * bin);
    EXPECT_LT(width, 2.0 * bin);
    // nothing else of comparable height
    for (std::size_t i = 0; i < s.omega_tau.size(); ++i)
        for (std::size_t j = 0; j < s.omega_t.size(); ++j)
            if (std::abs(s.omega_tau[i] - 3000.0) > 3 * bin || std::abs(s.omega_t[j] - 3000.0) > 3 * bin) {
                EXPECT_LT(std::abs(s.at(i, j)), 0.25 * best);
            }
}

TEST(Spectrum2d, SampleAndPeakAnalysis) {
    // Gaussian elongated along the diagonal: widths follow the shape.
    spectroscopy::SpectrumGrid s;
    for (int k = -50; k <= 50; ++k) {
        s.omega_tau.push_back(3000.0 + 10.0 * k);
        s.omega_t.push_back(3000.0 + 10.0 * k);
    }
    const double sd = 120.0, sa = 40.0;
    for (double a : s.omega_tau) {
        for (double b : s.omega_t) {
            const double u = (a - 3000.0 + b - 3000.0) / std::numbers::sqrt2;
            const double v = (a - 3000.0 - (b - 3000.0)) / std::numbers::sqrt2;
            s.amplitude.push_back(std::exp(-0.5 * (u * u / (sd * sd) + v * v / (sa * sa))));
        }
    }
    EXPECT_NEAR(s.sample(3005.0, 3000.0), s.at(50, 50) * 0.5 + s.at(51, 50) * 0.5, 1e-15);
    EXPECT_EQ(s.sample(0.0, 3000.0), 0.0);
    const auto p = spectroscopy::analyze_peak(s, 3000.0, 3000.0, 100.0);
    const double k = 2.0 * std::sqrt(2.0 * std::log(2.0));
    EXPECT_EQ(p.omega_tau, 3000.0);
    EXPECT_NEAR(p.diagonal_fwhm, k * sd, 2.0);
    EXPECT_NEAR(p.antidiagonal_fwhm, k * sa, 2.0);
    EXPECT_NEAR(p.width_ratio(), sd / sa, 0.1);
    EXPECT_THROW(spectroscopy::analyze_peak(s, 0.0, 0.0, 10.0), ContractError);
}

TEST(LinearAbsorption, ZeroCouplingSingleLine) {
    const auto model = uncoupled_model();
    const auto space = hierarchy::build(model, TruncationRule{5000.0, 2});
    const Generator gen(model, space, SystemModel::two_level(3000.0), {3000.0});
    spectroscopy::LinearSpec spec;
    const auto lin = spectroscopy::linear_absorption(gen, ground(space.size()), spec);
    std::size_t best = 0;
    for (std::size_t q = 0; q < lin.absorption.size(); ++q)
        if (lin.absorption[q] > lin.absorption[best]) best = q;
    EXPECT_DOUBLE_EQ(lin.omega[best], 3000.0);
    EXPECT_GT(lin.absorption[best], 0.0);
    for (const auto& c : lin.correlation) EXPECT_NEAR(std::abs(c - 1.0), 0.0, 1e-12);
}

TEST(LinearAbsorption, VibronicSatelliteMatchesFranckCondon) {
    // Undamped mode only. Sampling at a sixteenth of the vibrational period
    // makes the reorganization-corrected correlation exactly periodic, so its
    // discrete Fourier coefficients are the progression weights.
    const auto model = bath::BathModel::build(std::nullopt, bath::UndampedBath{}, kRoom);
    const auto space = hierarchy::build(model, TruncationRule{5000.0, 12});
    const Generator gen(model, space, SystemModel::two_level(3000.0), {3000.0});
    const double period = 1.0 / (units::PhysicalConstants::speed_of_light_cm_per_fs * 500.0);
    spectroscopy::LinearSpec spec;
    spec.n = 16;
    spec.dt = period / 16.0;
    spec.integrator_dt = period / 64.0;
    const auto lin = spectroscopy::linear_absorption(gen, ground(space.size()), spec);

    std::vector<cd> c, f;
    for (const auto& m : model.modes()) {
        c.push_back(m.coefficient);
        f.push_back(m.frequency);
    }
    const double shift = (model.modes()[0].coefficient.real() - model.modes()[1].coefficient.real()) / 500.0;
    auto coefficients = [&](auto value) {
        cd k0{}, k1{};
        for (std::size_t j = 0; j < 16; ++j) {
            const double t = static_cast<double>(j) * spec.dt;
            const double s = oracle::angular_per_wavenumber() * t;
            const cd v = value(j, t) * std::exp(cd(0.0, -shift * s));
            k0 += v / 16.0;
            k1 += v * std::exp(cd(0.0, 500.0 * s)) / 16.0;
        }
        return k1 / k0;
    };
    const cd heom = coefficients([&](std::size_t j, double) { return lin.correlation[j]; });
    const cd exact = coefficients([&](std::size_t, double t) { return std::exp(-oracle::lineshape(c, f, 0.0, t)); });
    const double effective = model.modes()[0].coefficient.real() / (500.0 * 500.0);
    EXPECT_NEAR(exact.real(), effective, 1e-3 * effective);
    EXPECT_NEAR(std::abs(heom - exact), 0.0, 1e-2 * effective);
}
