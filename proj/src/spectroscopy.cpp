#include "lduo/spectroscopy.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <thread>

#include <fftw3.h>

#include "lduo/errors.hpp"
#include "lduo/units.hpp"

namespace lduo::spectroscopy {

namespace {

using Mat = Eigen::Matrix2cd;
using units::PhysicalConstants;

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t whole_steps(double span, double dt, const char* what) {
    const double r = span / dt;
    const auto n = static_cast<std::size_t>(std::llround(r));
    if (std::abs(r - static_cast<double>(n)) > 1e-6)
        throw ContractError(std::string("response3: ") + what + " is not a whole number of integrator steps");
    return n;
}

// Element offset inside a column-major 2x2 block.
std::size_t block_offset(Block b) {
    switch (b) {
    case Block::gg: return 0;
    case Block::eg: return 1;
    case Block::ge: return 2;
    case Block::ee: return 3;
    }
    return 0;
}

// One-sided weights: trapezoid half weight at t = 0, optional cos^2 taper.
std::vector<double> sample_weights(std::size_t n, bool hann) {
    std::vector<double> w(n, 1.0);
    w[0] = 0.5;
    if (hann) {
        for (std::size_t k = 0; k < n; ++k) {
            const double c = std::cos(0.5 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
            w[k] *= c * c;
        }
    }
    return w;
}

// Axis for m = -M/2 .. M/2-1 with spacing 1/(M dt c), shifted by offset.
std::vector<double> centred_axis(std::size_t m, double dt, double offset) {
    std::vector<double> axis(m);
    const double step = 1.0 / (static_cast<double>(m) * dt * PhysicalConstants::speed_of_light_cm_per_fs);
    for (std::size_t q = 0; q < m; ++q)
        axis[q] = offset + (static_cast<double>(q) - static_cast<double>(m / 2)) * step;
    return axis;
}

std::size_t raw_index(std::size_t q, std::size_t m) { return (q + m - m / 2) % m; }

class FftwPlan {
public:
    explicit FftwPlan(fftw_plan p) : p_(p) {
        if (!p_) throw std::runtime_error("fftw: plan creation failed");
    }
    ~FftwPlan() { fftw_destroy_plan(p_); }
    FftwPlan(const FftwPlan&) = delete;
    FftwPlan& operator=(const FftwPlan&) = delete;
    void execute() const { fftw_execute(p_); }

private:
    fftw_plan p_;
};

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// In-place transform of a row-major m1 x m3 array: sign1 along rows' index
// (t1), sign3 along columns (t3).
void transform_2d(std::vector<cd>& a, std::size_t m1, std::size_t m3, int sign1, int sign3) {
    auto* p = reinterpret_cast<fftw_complex*>(a.data());
    std::lock_guard lock(fftw_planner_mutex());
    const int n3 = static_cast<int>(m3);
    const int n1 = static_cast<int>(m1);
    FftwPlan rows(fftw_plan_many_dft(1, &n3, n1, p, nullptr, 1, n3, p, nullptr, 1, n3, sign3, FFTW_ESTIMATE));
    rows.execute();
    FftwPlan cols(fftw_plan_many_dft(1, &n1, n3, p, nullptr, n3, 1, p, nullptr, n3, 1, sign1, FFTW_ESTIMATE));
    cols.execute();
}

void transform_1d(std::vector<cd>& a, int sign) {
    auto* p = reinterpret_cast<fftw_complex*>(a.data());
    std::lock_guard lock(fftw_planner_mutex());
    FftwPlan plan(fftw_plan_dft_1d(static_cast<int>(a.size()), p, p, sign, FFTW_ESTIMATE));
    plan.execute();
}

template <class F>
void parallel_for(std::size_t count, unsigned threads, F&& body) {
    const unsigned width = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
    if (width <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(width);
    for (unsigned w = 0; w < width; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace

ADOState apply_dipole_commutator(const ADOState& state, const Mat& mu) {
    ADOState out(state.nodes(), state.time());
    const cd* in = state.data().data();
    cd* o = out.data().data();
    for (std::size_t i = 0; i < state.nodes(); ++i) {
        const Eigen::Map<const Mat> r(in + 4 * i);
        Eigen::Map<Mat>(o + 4 * i) = mu * r - r * mu;
    }
    return out;
}

ADOState select_block(const ADOState& state, Block keep) {
    ADOState out(state.nodes(), state.time());
    const std::size_t k = block_offset(keep);
    const auto in = state.data();
    auto o = out.data();
    for (std::size_t i = 0; i < state.nodes(); ++i) o[4 * i + k] = in[4 * i + k];
    return out;
}

ResponseGrid response3(const Generator& gen, const ADOState& equilibrium, const ResponseSpec& spec) {
    if (!is_power_of_two(spec.n1) || !is_power_of_two(spec.n3))
        throw ContractError("response3: n1 and n3 must be powers of two");
    if (equilibrium.nodes() != gen.nodes()) throw ContractError("response3: equilibrium does not match the hierarchy");
    if (!(spec.waiting_time >= 0.0)) throw ContractError("response3: waiting time must be >= 0");
    check_step_size(gen, spec.integrator_dt);
    const std::size_t s1 = whole_steps(spec.dt1, spec.integrator_dt, "dt1");
    const std::size_t s3 = whole_steps(spec.dt3, spec.integrator_dt, "dt3");
    const std::size_t st = whole_steps(spec.waiting_time, spec.integrator_dt, "T");
    if (s1 == 0 || s3 == 0) throw ContractError("response3: dt1 and dt3 must be positive");

    const Mat& mu = gen.system().dipole;
    const double h = spec.integrator_dt;

    ResponseGrid grid;
    grid.n1 = spec.n1;
    grid.n3 = spec.n3;
    grid.dt1 = spec.dt1;
    grid.dt3 = spec.dt3;
    grid.waiting_time = spec.waiting_time;
    grid.frame_frequency = gen.options().frame_frequency;
    grid.rephasing.assign(spec.n1 * spec.n3, cd{});
    grid.nonrephasing.assign(spec.n1 * spec.n3, cd{});

    auto column = [&](const ADOState& coherence, std::vector<cd>& out, std::size_t j) {
        Rk4Stepper stepper(gen);
        ADOState y = apply_dipole_commutator(coherence, mu);
        for (std::size_t k = 0; k < st; ++k) stepper.advance(y, h, k + 1);
        y = select_block(apply_dipole_commutator(y, mu), Block::eg);
        out[j * spec.n3] = y.data()[1];
        for (std::size_t i3 = 1; i3 < spec.n3; ++i3) {
            for (std::size_t k = 0; k < s3; ++k) stepper.advance(y, h, k + 1);
            out[j * spec.n3 + i3] = y.data()[1];
        }
    };

    const ADOState first = apply_dipole_commutator(equilibrium, mu);
    struct Pathway {
        Block keep;
        std::vector<cd>* out;
    };
    for (const Pathway pw : {Pathway{Block::ge, &grid.rephasing}, Pathway{Block::eg, &grid.nonrephasing}}) {
        ADOState x = select_block(first, pw.keep);
        Rk4Stepper stepper(gen);
        const std::size_t batch = std::max(1u, spec.threads);
        for (std::size_t j0 = 0; j0 < spec.n1; j0 += batch) {
            const std::size_t j1 = std::min(spec.n1, j0 + batch);
            std::vector<ADOState> states;
            states.reserve(j1 - j0);
            for (std::size_t j = j0; j < j1; ++j) {
                if (j > 0)
                    for (std::size_t k = 0; k < s1; ++k) stepper.advance(x, h, k + 1);
                states.push_back(x);
            }
            parallel_for(states.size(), spec.threads,
                         [&](std::size_t b) { column(states[b], *pw.out, j0 + b); });
        }
    }
    return grid;
}

double fft_bin_width(std::size_t n, double dt) {
    return 1.0 / (static_cast<double>(n) * dt * PhysicalConstants::speed_of_light_cm_per_fs);
}

SpectrumGrid spectrum2d(const ResponseGrid& resp, const SpectrumOptions& options) {
    if (resp.rephasing.size() != resp.n1 * resp.n3 || resp.nonrephasing.size() != resp.n1 * resp.n3)
        throw ContractError("spectrum2d: incomplete response grid");
    if (options.zero_pad == 0) throw ContractError("spectrum2d: zero_pad must be >= 1");
    const std::size_t m1 = resp.n1 * options.zero_pad;
    const std::size_t m3 = resp.n3 * options.zero_pad;
    const auto w1 = sample_weights(resp.n1, options.hann_window);
    const auto w3 = sample_weights(resp.n3, options.hann_window);

    auto padded = [&](const std::vector<cd>& r) {
        std::vector<cd> a(m1 * m3, cd{});
        for (std::size_t j = 0; j < resp.n1; ++j)
            for (std::size_t k = 0; k < resp.n3; ++k)
                a[j * m3 + k] = w1[j] * w3[k] * resp.dt1 * resp.dt3 * r[j * resp.n3 + k];
        return a;
    };

    std::vector<cd> total = padded(resp.rephasing);
    transform_2d(total, m1, m3, FFTW_FORWARD, FFTW_BACKWARD);
    if (!options.rephasing_only) {
        std::vector<cd> nr = padded(resp.nonrephasing);
        transform_2d(nr, m1, m3, FFTW_BACKWARD, FFTW_BACKWARD);
        for (std::size_t k = 0; k < total.size(); ++k) total[k] += nr[k];
    }

    SpectrumGrid s;
    s.omega_tau = centred_axis(m1, resp.dt1, resp.frame_frequency);
    s.omega_t = centred_axis(m3, resp.dt3, resp.frame_frequency);
    s.amplitude.resize(m1 * m3);
    for (std::size_t q1 = 0; q1 < m1; ++q1) {
        for (std::size_t q3 = 0; q3 < m3; ++q3) {
            const cd v = total[raw_index(q1, m1) * m3 + raw_index(q3, m3)];
            s.amplitude[q1 * m3 + q3] = v.real() + options.phase_flip_sign * v.imag();
        }
    }
    return s;
}

double SpectrumGrid::sample(double w_tau, double w_t) const {
    const std::size_t n1 = omega_tau.size(), n3 = omega_t.size();
    if (n1 < 2 || n3 < 2) return 0.0;
    const double d1 = omega_tau[1] - omega_tau[0];
    const double d3 = omega_t[1] - omega_t[0];
    const double x = (w_tau - omega_tau[0]) / d1;
    const double y = (w_t - omega_t[0]) / d3;
    if (x < 0.0 || y < 0.0 || x > static_cast<double>(n1 - 1) || y > static_cast<double>(n3 - 1)) return 0.0;
    const auto i = std::min(static_cast<std::size_t>(x), n1 - 2);
    const auto j = std::min(static_cast<std::size_t>(y), n3 - 2);
    const double fx = x - static_cast<double>(i), fy = y - static_cast<double>(j);
    return (1 - fx) * (1 - fy) * at(i, j) + fx * (1 - fy) * at(i + 1, j) + (1 - fx) * fy * at(i, j + 1) +
           fx * fy * at(i + 1, j + 1);
}

PeakShape analyze_peak(const SpectrumGrid& s, double omega_tau, double omega_t, double radius) {
    PeakShape p{0.0, 0.0, -std::numeric_limits<double>::infinity(), 0.0, 0.0};
    for (std::size_t i = 0; i < s.omega_tau.size(); ++i) {
        if (std::abs(s.omega_tau[i] - omega_tau) > radius) continue;
        for (std::size_t j = 0; j < s.omega_t.size(); ++j) {
            if (std::abs(s.omega_t[j] - omega_t) > radius) continue;
            if (s.at(i, j) > p.amplitude) p = {s.omega_tau[i], s.omega_t[j], s.at(i, j), 0.0, 0.0};
        }
    }
    if (!std::isfinite(p.amplitude)) throw ContractError("analyze_peak: no grid point inside the search box");

    const double half = 0.5 * p.amplitude;
    const double h = 0.1 * std::min(s.omega_tau[1] - s.omega_tau[0], s.omega_t[1] - s.omega_t[0]);
    auto reach = [&](double ux, double uy) {
        double prev_s = 0.0, prev_v = p.amplitude;
        for (double d = h;; d += h) {
            const double v = s.sample(p.omega_tau + d * ux, p.omega_t + d * uy);
            if (v <= half) return prev_s + (prev_v - half) / (prev_v - v) * (d - prev_s);
            if (d > 1e6) return std::numeric_limits<double>::infinity();
            prev_s = d;
            prev_v = v;
        }
    };
    const double r = std::numbers::sqrt2 / 2.0;
    p.diagonal_fwhm = reach(r, r) + reach(-r, -r);
    p.antidiagonal_fwhm = reach(r, -r) + reach(-r, r);
    return p;
}

LinearSpectrum linear_absorption(const Generator& gen, const ADOState& equilibrium, const LinearSpec& spec) {
    if (equilibrium.nodes() != gen.nodes()) throw ContractError("linear_absorption: equilibrium does not match");
    if (spec.n < 2 || spec.zero_pad == 0) throw ContractError("linear_absorption: need n >= 2 and zero_pad >= 1");
    check_step_size(gen, spec.integrator_dt);
    const std::size_t s = whole_steps(spec.dt, spec.integrator_dt, "dt");
    if (s == 0) throw ContractError("linear_absorption: dt must be positive");
    const Mat& mu = gen.system().dipole;

    ADOState x(equilibrium.nodes(), 0.0);
    {
        const cd* in = equilibrium.data().data();
        cd* o = x.data().data();
        for (std::size_t i = 0; i < x.nodes(); ++i)
            Eigen::Map<Mat>(o + 4 * i) = mu * Eigen::Map<const Mat>(in + 4 * i);
    }

    LinearSpectrum out;
    out.correlation.reserve(spec.n);
    Rk4Stepper stepper(gen);
    for (std::size_t k = 0; k < spec.n; ++k) {
        if (k > 0)
            for (std::size_t j = 0; j < s; ++j) stepper.advance(x, spec.integrator_dt, j + 1);
        out.correlation.push_back((mu * x.rho()).trace());
    }

    const std::size_t m = spec.n * spec.zero_pad;
    const auto w = sample_weights(spec.n, spec.hann_window);
    std::vector<cd> a(m, cd{});
    for (std::size_t k = 0; k < spec.n; ++k) a[k] = w[k] * spec.dt * out.correlation[k];
    transform_1d(a, FFTW_BACKWARD);

    out.omega = centred_axis(m, spec.dt, gen.options().frame_frequency);
    out.absorption.resize(m);
    for (std::size_t q = 0; q < m; ++q) out.absorption[q] = a[raw_index(q, m)].real();
    return out;
}

} // namespace lduo::spectroscopy
