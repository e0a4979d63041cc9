// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include <json.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "lduo/bath.hpp"
#include "lduo/cli.hpp"
#include "lduo/hierarchy.hpp"
#include "lduo/observables.hpp"
#include "lduo/propagator.hpp"
#include "lduo/spectroscopy.hpp"
#include "oracles.hpp"

using namespace lduo;
using hierarchy::TruncationRule;
using observables::Projection;
using Mat = Eigen::Matrix2cd;
using namespace std::complex_literals;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Tolerances and settings, pinned.
constexpr double kQuadratureRel = 1e-3;
constexpr double kUoPairTol = 1e-12;
constexpr double kA0LdRel = 1e-2;
constexpr double kA0UoRel = 1e-13;
constexpr double kTraceTol = 1e-8;
constexpr double kHermTol = 1e-9;
constexpr double kZeroCouplingTol = 1e-9;
constexpr double kZeroCouplingDt = 0.01;
constexpr double kMarkovRel = 0.05;
constexpr int kMarkovDepth = 8;
constexpr double kBruteForceTol = 1e-10;
constexpr double kBruteForceDt = 0.0025;
constexpr double kEnvelopeRatio = 1.05;
constexpr double kMeanLo = 0.0, kMeanHi = 0.004;
constexpr double kLdImagRel = 1e-6;
constexpr double kNoiseFactor = 10.0;
constexpr double kCrossPathRel = 1e-13;
constexpr double kLatticeRatio = 1.2;

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

const auto kRoom = units::beta_from_temperature(300.0);

bath::BathModel benchmark(std::optional<int> k = std::nullopt) {
    bath::BathModelOptions o;
    o.matsubara_count = k;
    return bath::BathModel::build(bath::LorentzDrudeBath{}, bath::UndampedBath{}, kRoom, o);
}

Mat superposition() {
    Mat r;
    r << 0.5, 0.5, 0.5, 0.5;
    return r;
}

Mat excited() {
    Mat r = Mat::Zero();
    r(1, 1) = 1.0;
    return r;
}

Outcome decomposition() {
    bath::BathModelOptions o;
    o.matsubara_count = 20;
    const auto m = bath::BathModel::build(bath::LorentzDrudeBath{}, std::nullopt, kRoom, o);
    double worst = 0.0;
    for (double t : {1.0, 5.0, 10.0, 50.0, 100.0}) {
        const cd ref = oracle::ld_correlation(50.0, 100.0, 300.0, t);
        worst = std::max(worst, std::abs(bath::correlation_function(m, t) - ref) / std::abs(ref));
    }
    return {worst < kQuadratureRel, fmt("max rel error %.2e over t = 1..100 fs", worst)};
}

Outcome uo_pair() {
    const auto m = bath::BathModel::build(std::nullopt, bath::UndampedBath{}, kRoom);
    const auto& p = m.modes()[0];
    const auto& q = m.modes()[1];
    const bool freqs = p.frequency == cd(0.0, 500.0) && q.frequency == cd(0.0, -500.0);
    const double diff = std::abs((p.coefficient - q.coefficient) - cd(0.5, 0.0));
    const long double c = oracle::coth(500.0L / (2.0L * oracle::kT(300.0)));
    const double e1 = std::abs(p.coefficient - cd(static_cast<double>(0.25L * (c + 1.0L))));
    const double e2 = std::abs(q.coefficient - cd(static_cast<double>(0.25L * (c - 1.0L))));
    const bool ok = freqs && diff < 4 * std::numeric_limits<double>::epsilon() && e1 < kUoPairTol && e2 < kUoPairTol;
    return {ok, fmt("nu = +-500i %s, |c1-c2-S*w| = %.1e, coth errors %.1e %.1e", freqs ? "exact" : "WRONG", diff, e1, e2)};
}

Outcome a0_consistency() {
    double worst = 0.0;
    for (int k : {10, 20, 30}) {
        bath::BathModelOptions o;
        o.matsubara_count = k;
        const auto m = bath::BathModel::build(bath::LorentzDrudeBath{}, std::nullopt, kRoom, o);
        const double got = bath::a0(m).real + 100.0 * m.tail_coefficient();
        const double ref = oracle::ld_a0_regularized(50.0, 100.0, 300.0, k);
        worst = std::max(worst, std::abs(got - ref) / std::abs(ref));
    }
    const auto u = bath::BathModel::build(std::nullopt, bath::UndampedBath{}, kRoom);
    const double uref = static_cast<double>(0.5L * oracle::coth(500.0L / (2.0L * oracle::kT(300.0))));
    const double uerr = std::abs(bath::a0(u).real - uref) / uref;
    return {worst < kA0LdRel && uerr < kA0UoRel, fmt("LD rel %.2e (K = 10, 20, 30), UO rel %.1e", worst, uerr)};
}

Outcome conservation() {
    const auto m = benchmark();
    const auto s = hierarchy::build(m, TruncationRule{5000.0, 12});
    const Generator gen(m, s, SystemModel::two_level(3000.0), {3000.0});
    double tr = 0.0, herm = 0.0;
    Observer obs = [&](const ADOState& x) {
        const Mat r = x.rho();
        tr = std::max(tr, std::abs(r.trace() - 1.0));
        herm = std::max(herm, (r - r.adjoint()).cwiseAbs().maxCoeff());
    };
    propagate(gen, ADOState::factorized(s.size(), superposition()), 1000.0, 0.5, std::span(&obs, 1));
    return {tr < kTraceTol && herm < kHermTol, fmt("%zu nodes, max |Tr-1| = %.1e, max |rho-rho^+| = %.1e", s.size(), tr, herm)};
}

Outcome zero_coupling() {
    const auto m = bath::BathModel::build(bath::LorentzDrudeBath{0.0, 100.0}, bath::UndampedBath{0.0, 500.0}, kRoom);
    const auto s = hierarchy::build(m, TruncationRule{5000.0, 12});
    const Generator gen(m, s, SystemModel::two_level(3000.0));
    const double w = 3000.0 * oracle::angular_per_wavenumber();
    double err = 0.0, higher = 0.0;
    Observer obs = [&](const ADOState& x) {
        err = std::max(err, std::abs(x.rho()(1, 0) - 0.5 * std::exp(cd(0.0, -w * x.time()))));
        for (std::size_t p = 1; p < s.size(); ++p) higher = std::max(higher, (x.matrix(p)).cwiseAbs().maxCoeff());
    };
    propagate(gen, ADOState::factorized(s.size(), superposition()), 1000 * kZeroCouplingDt, kZeroCouplingDt,
              std::span(&obs, 1));
    return {err < kZeroCouplingTol && higher == 0.0,
            fmt("1000 steps of %.2f fs: max |rho_eg - e^{-iwt}/2| = %.1e, max tier>=1 = %g", kZeroCouplingDt, err, higher)};
}

Outcome markov_limit() {
    const auto th = units::beta_from_temperature(600.0);
    bath::BathModelOptions o;
    o.matsubara_count = 30;
    const auto m = bath::BathModel::build(bath::LorentzDrudeBath{50.0, 2000.0}, std::nullopt, th, o);
    const double analytic = 2.0 * 50.0 * oracle::kT(600.0) / 2000.0; // cm^-1
    const auto s = hierarchy::build(m, TruncationRule{20000.0, kMarkovDepth});
    const Generator gen(m, s, SystemModel::two_level(3000.0), {3000.0});
    const double dt = 0.5;
    const double t_end = dt * std::ceil(3.0 / (analytic * oracle::angular_per_wavenumber()) / dt);
    std::vector<double> ts, ls;
    Observer obs = [&](const ADOState& x) {
        ts.push_back(x.time());
        ls.push_back(std::log(std::abs(x.rho()(1, 0))));
    };
    propagate(gen, ADOState::factorized(s.size(), superposition()), t_end, dt, std::span(&obs, 1), 4);
    double mt = 0.0, ml = 0.0;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        mt += ts[k];
        ml += ls[k];
    }
    mt /= static_cast<double>(ts.size());
    ml /= static_cast<double>(ts.size());
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        num += (ts[k] - mt) * (ls[k] - ml);
        den += (ts[k] - mt) * (ts[k] - mt);
    }
    const double fit = -num / den / oracle::angular_per_wavenumber();
    const double rel = std::abs(fit / analytic - 1.0);
    return {rel < kMarkovRel, fmt("fitted %.4f vs 2 eta kT / Lambda = %.4f cm^-1 (rel %.2e, %zu nodes)", fit, analytic, rel,
                                  s.size())};
}

Outcome brute_force() {
    bath::BathModelOptions o;
    o.matsubara_count = 0;
    const auto m = bath::BathModel::build(bath::LorentzDrudeBath{}, std::nullopt, kRoom, o);
    const auto s = hierarchy::build(m, TruncationRule{kInf, 1});
    const double x = 100.0 / (2.0 * oracle::kT(300.0));
    oracle::OneAxisTerms terms;
    terms.h = Mat::Zero();
    terms.h(1, 1) = 3000.0;
    terms.b = Mat::Zero();
    terms.b(1, 1) = 1.0;
    terms.e = {5000.0 * std::cos(x) / std::sin(x), -5000.0};
    terms.ebar = std::conj(terms.e);
    terms.tau = terms.taubar = 50.0 * (1.0 / x - std::cos(x) / std::sin(x));

    Eigen::Matrix<cd, 8, 1> v0 = Eigen::Matrix<cd, 8, 1>::Zero();
    v0.head<4>() << 0.3, 0.4 - 0.1i, 0.4 + 0.1i, 0.7;
    double rho_err = 0.0, ado_err = 0.0;
    for (auto mode : {TerminatorMode::Plain, TerminatorMode::Oscillatory}) {
        terms.damping = mode == TerminatorMode::Plain ? cd{100.0, 0.0} : cd{0.0, 0.0};
        const Generator gen(m, s, SystemModel::two_level(3000.0), {0.0, mode});
        // exp(100 L) as 100 one-femtosecond factors keeps the Pade argument small
        const Eigen::Matrix<cd, 8, 8> one = oracle::one_axis_liouvillian(terms).exp();
        Eigen::Matrix<cd, 8, 1> ref = v0;
        for (int k = 0; k < 100; ++k) ref = one * ref;
        ADOState st(2);
        for (int k = 0; k < 8; ++k) st.data()[static_cast<std::size_t>(k)] = v0(k);
        const auto end = propagate(gen, st, 100.0, kBruteForceDt);
        const double scale = ref.tail<4>().cwiseAbs().maxCoeff();
        for (int k = 0; k < 8; ++k) {
            const double e = std::abs(end.data()[static_cast<std::size_t>(k)] - ref(k));
            if (k < 4) rho_err = std::max(rho_err, e);
            else ado_err = std::max(ado_err, e / scale);
        }
    }
    return {rho_err < kBruteForceTol && ado_err < kBruteForceTol,
            fmt("100 fs, both terminators: max |rho0 - expm| = %.1e, tier-1 relative %.1e", rho_err, ado_err)};
}

Outcome bath_communication(const std::filesystem::path& scratch) {
    const auto model = benchmark();
    std::string detail;
    bool ok = true;

    // (a) UO only, excited state on top of the equilibrated bath
    {
        const auto m = model.uo_only();
        const auto s = hierarchy::build(m, TruncationRule{5000.0, 12});
        const Generator gen(m, s, SystemModel::two_level(3000.0), {3000.0});
        auto st = equilibrate(gen, 0.5).state;
        st.set(0, excited());
        std::vector<double> ee;
        Observer obs = [&](const ADOState& x) { ee.push_back(observables::moment1(s, x, m).value(1, 1).real()); };
        propagate(gen, st, 1000.0, 0.5, std::span(&obs, 1));
        const std::size_t q = ee.size() / 4;
        double first = 0.0, last = 0.0, mean = 0.0;
        for (std::size_t k = 0; k < q; ++k) first = std::max(first, std::abs(ee[k]));
        for (std::size_t k = ee.size() - q; k < ee.size(); ++k) last = std::max(last, std::abs(ee[k]));
        for (double v : ee) mean += v;
        mean /= static_cast<double>(ee.size());
        const bool a = last <= kEnvelopeRatio * first && mean >= kMeanLo && mean <= kMeanHi;
        ok = ok && a;
        detail += fmt("(a) envelope %.3f, mean %.2e %s; ", last / first, mean, a ? "ok" : "FAIL");
    }
    // (b) LD only
    {
        const auto m = model.ld_only();
        const auto s = hierarchy::build(m, TruncationRule{1000.0, 12});
        const Generator gen(m, s, SystemModel::two_level(3000.0), {3000.0});
        auto st = equilibrate(gen, 0.5).state;
        st.set(0, superposition());
        double re = 0.0, im = 0.0;
        Observer obs = [&](const ADOState& x) {
            const Mat v = observables::moment1(s, x, m).value;
            for (int k = 0; k < 2; ++k) {
                re = std::max(re, std::abs(v(k, k).real()));
                im = std::max(im, std::abs(v(k, k).imag()));
            }
        };
        propagate(gen, st, 1000.0, 0.5, std::span(&obs, 1), 4);
        const bool b = re > 0.0 && im < kLdImagRel * re;
        ok = ok && b;
        detail += fmt("(b) max|Im|/max|Re| = %.1e %s; ", im / re, b ? "ok" : "FAIL");
    }
    // (c) residual protocol through the bathcoords job
    {
        std::filesystem::create_directories(scratch);
        const auto cfg = (scratch / "bathcoords.yaml").string();
        std::ofstream(cfg) << "job: bathcoords\n"
                              "baths: {ld: {eta: 50, lambda: 100}, uo: {lambda_reorg: 0.5, omega_uo: 500}}\n"
                              "thermo: {temperature: 300}\n"
                              "hierarchy: {depth_cap: 12}\n"
                              "integrator: {dt: 0.5, t_final: 500, stride: 4}\n"
                              "bathcoords: {orders: [1, 2], noise_floor: true}\n";
        std::ostringstream log, err;
        const auto out = scratch / "bathcoords";
        const int code = cli::run({"bathcoords", cfg, out.string(), std::max(1u, std::thread::hardware_concurrency()), false},
                                  log, err);
        bool c = code == cli::kExitOk;
        if (c) {
            std::ifstream in(out / "manifest.json");
            const auto res = nlohmann::json::parse(in)["results"]["residual"];
            for (const char* o : {"1", "2"}) {
                const double sup = res[o]["sup_norm"], floor = res[o]["noise_floor"];
                const bool pass = sup > kNoiseFactor * floor;
                c = c && pass;
                detail += fmt("(c) order %s residual %.2e vs floor %.2e %s; ", o, sup, floor, pass ? "ok" : "FAIL");
            }
        } else {
            detail += "(c) bathcoords job failed: " + err.str();
        }
        ok = ok && c;
    }
    return {ok, detail};
}

Outcome cross_path() {
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    std::size_t lattices = 0;
    for (auto model : {benchmark(2), benchmark(2).ld_only(), benchmark(2).uo_only()}) {
        for (int depth : {2, 3, 5, 8}) {
            for (double gamma : {2000.0, 5000.0, kInf}) {
                const auto s = hierarchy::build(model, TruncationRule{gamma, depth});
                ADOState st(s.size());
                for (auto& x : st.data()) x = {u(rng), u(rng)};
                for (auto p : {Projection::Full, Projection::UoOnly, Projection::LdOnly}) {
                    const Mat m1 = observables::moment1(s, st, model, p).value;
                    const Mat m2 = observables::moment2(s, st, model, p).value;
                    const Mat n1 = observables::moment_n(s, st, model, 1, p).value;
                    const Mat n2 = observables::moment_n(s, st, model, 2, p).value;
                    worst = std::max(worst, (m1 - n1).cwiseAbs().maxCoeff() / std::max(1.0, observables::max_abs(m1)));
                    worst = std::max(worst, (m2 - n2).cwiseAbs().maxCoeff() / std::max(1.0, observables::max_abs(m2)));
                }
                ++lattices;
            }
        }
    }
    return {worst < kCrossPathRel, fmt("%zu lattices x 3 projections, max rel difference %.1e", lattices, worst)};
}

// Largest-magnitude DFT bin of a uniformly sampled real series (mean removed), in cm^-1.
double dominant_frequency(const std::vector<double>& x, double dt) {
    const std::size_t n = x.size();
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    std::size_t best = 1;
    double best_mag = -1.0;
    for (std::size_t k = 1; k <= n / 2; ++k) {
        cd acc = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            acc += (x[j] - mean) * std::exp(cd(0.0, -2.0 * std::numbers::pi * double(k * j) / double(n)));
        if (std::abs(acc) > best_mag) {
            best_mag = std::abs(acc);
            best = k;
        }
    }
    return spectroscopy::fft_bin_width(n, dt) * static_cast<double>(best);
}

Outcome two_dimensional() {
    const auto model = benchmark();
    const auto s = hierarchy::build(model, TruncationRule{5000.0, 12});
    const Generator gen(model, s, SystemModel::two_level(3000.0), {3000.0});
    const auto eq = equilibrate(gen, 1.0).state;
    spectroscopy::ResponseSpec rs;
    rs.n1 = rs.n3 = 64;
    rs.dt1 = rs.dt3 = 4.0;
    rs.integrator_dt = 1.0;
    rs.threads = std::max(1u, std::thread::hardware_concurrency());
    const double bin = spectroscopy::fft_bin_width(64, 4.0);

    bool ok = true;
    std::string detail;
    std::vector<double> ratios;
    spectroscopy::ResponseGrid first;
    for (double T : {0.0, 50.0, 100.0}) {
        rs.waiting_time = T;
        const auto r = spectroscopy::response3(gen, eq, rs);
        if (T == 0.0) first = r;
        const auto sp = spectroscopy::spectrum2d(r);
        const auto pk = spectroscopy::analyze_peak(sp, 3000.0, 3000.0, 2.0 * bin);
        const bool near = std::abs(pk.omega_tau - 3000.0) <= bin && std::abs(pk.omega_t - 3000.0) <= bin;
        ok = ok && near;
        ratios.push_back(pk.width_ratio());
        detail += fmt("T=%g peak (%.0f, %.0f) ratio %.3f; ", T, pk.omega_tau, pk.omega_t, pk.width_ratio());
    }
    const bool diffusion = ratios[0] > ratios[1] && ratios[1] > ratios[2];

    // vibronic modulation: the UO bath multiplies the LD-only signal by a 500 cm^-1 periodic factor
    const auto ld = model.ld_only();
    const auto sl = hierarchy::build(ld, TruncationRule{5000.0, 12});
    const Generator gl(ld, sl, SystemModel::two_level(3000.0), {3000.0});
    rs.waiting_time = 0.0;
    rs.n1 = 1;
    const auto rl = spectroscopy::response3(gl, equilibrate(gl, 1.0).state, rs);
    std::vector<double> ratio;
    for (std::size_t k = 0; k < 64; ++k) ratio.push_back(std::abs(first.rephasing_at(0, k) / rl.rephasing_at(0, k)));
    const double f = dominant_frequency(ratio, 4.0);
    const bool modulation = std::abs(f - 500.0) <= bin;
    detail += fmt("modulation at %.0f cm^-1 (bin %.0f)", f, bin);
    return {ok && diffusion && modulation, detail};
}

Outcome lattice_scaling() {
    const auto m = benchmark();
    const auto full = hierarchy::build(m, TruncationRule{5000.0, 12}).size();
    // LD-only lattice combined with every UO excitation (l+, l-) of total s, which costs s*500 cm^-1 and s tiers
    const auto ld = m.ld_only();
    std::vector<double> w;
    for (const auto& mode : ld.modes()) w.push_back(mode.frequency.real());
    double predicted = 0.0;
    for (int s = 0; s <= 10; ++s)
        predicted += (s + 1) * static_cast<double>(oracle::enumerate_lattice(w, 5000.0 - 500.0 * s, 12 - s).size());
    const double ratio = static_cast<double>(full) / predicted;
    const bool ok = ratio <= kLatticeRatio && ratio >= 1.0 / kLatticeRatio;
    return {ok, fmt("LDUO lattice %zu vs predicted %.0f (ratio %.3f)", full, predicted, ratio)};
}

} // namespace

int main() {
    const auto scratch = std::filesystem::temp_directory_path() / "lduo_acceptance";
    std::filesystem::remove_all(scratch);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"decomposition vs quadrature", decomposition},
        {"UO mode pair", uo_pair},
        {"A0 consistency", a0_consistency},
        {"conservation", conservation},
        {"zero-coupling oracle", zero_coupling},
        {"Markov limit", markov_limit},
        {"brute force 1-axis", brute_force},
        {"bath communication", [&] { return bath_communication(scratch); }},
        {"cross-path moments", cross_path},
        {"2DES qualitative", two_dimensional},
        {"lattice scaling", lattice_scaling},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s [%zu] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str(), sec);
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    std::filesystem::remove_all(scratch);
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
