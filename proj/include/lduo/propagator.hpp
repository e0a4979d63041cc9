// propagator.hpp - HEOM right-hand side and fixed-step RK4 time evolution
//
// For a retained index n the generator evaluates (rates in cm^-1, converted
// to fs^-1 by the 2*pi*c factor):
//
//   d rho_n/dt = -i[H, rho_n] - (sum_a n_a nu_a) rho_n
//                - [B, tau B rho_n - tau' rho_n B]
//                - i sum_a [B, rho_{n+e_a}]
//                - i sum_a n_a (e_a B rho_{n-e_a} - e'_a rho_{n-e_a} B)
//
// e'_a is the conjugate-partner coefficient (BathModel::conjugate_partner_coefficient).
// For the Drude pole this gives eta*Lambda*(cot [B,rho] - i {B,rho}); for a
// Matsubara pole d_n [B,rho]; for the UO pair the Theta form
// (c1+c2)/2 [B,rho] + (c1-c2)/2 {B,rho}.
//
// tau collects the Markovian tail of the Matsubara series and any LD modes
// whose unit excitation lies above gamma_max (their ADOs are never stored).
// For real coefficients the tail term is the usual -tau [B,[B,rho]].
//
// The Generator keeps references to the BathModel and HierarchySpace it was
// built from; both must outlive it.

#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lduo/bath.hpp"
#include "lduo/hierarchy.hpp"

namespace lduo {

using cd = std::complex<double>;

struct SystemModel {
    double omega_eg{3000.0}; // cm^-1
    Eigen::Matrix2cd coupling; // B, basis (g, e)
    Eigen::Matrix2cd dipole;   // mu

    // H_S = omega_eg |e><e|, B = |e><e|, mu = |e><g| + |g><e|.
    static SystemModel two_level(double omega_eg);
    [[nodiscard]] Eigen::Matrix2cd hamiltonian() const;
    void validate() const;
};

// One contiguous buffer of 2x2 matrices, node after node in hierarchy order
// (so tiers are contiguous). Each matrix is stored column-major:
// (gg, eg, ge, ee).
class ADOState {
public:
    ADOState() = default;
    explicit ADOState(std::size_t nodes, double time = 0.0);

    // ados[0] = rho0, every other node zero.
    static ADOState factorized(std::size_t nodes, const Eigen::Matrix2cd& rho0, double time = 0.0);

    [[nodiscard]] std::size_t nodes() const noexcept { return data_.size() / 4; }
    [[nodiscard]] double time() const noexcept { return time_; }
    void set_time(double t) noexcept { time_ = t; }

    [[nodiscard]] Eigen::Matrix2cd matrix(std::size_t i) const;
    void set(std::size_t i, const Eigen::Matrix2cd& m);
    [[nodiscard]] Eigen::Matrix2cd rho() const { return matrix(0); }

    [[nodiscard]] std::span<cd> data() noexcept { return data_; }
    [[nodiscard]] std::span<const cd> data() const noexcept { return data_; }

    // max_i |x_i|
    [[nodiscard]] double max_abs() const noexcept;
    [[nodiscard]] bool all_finite() const noexcept;

private:
    std::vector<cd> data_;
    double time_{0.0};
};

// max |a_i - b_i| over every element of every node.
double max_abs_difference(const ADOState& a, const ADOState& b);

// The terminator closes the depth truncation: nodes on tier depth_cap drop the
// real part of their damping and keep -i(l+ - l-)omega_UO. Nodes cut only by
// gamma_max are left alone, since their damping is what justified the cut.
enum class TerminatorMode {
    Oscillatory,
    Plain, // no terminator; every node keeps its full damping
};

struct GeneratorOptions {
    double frame_frequency{0.0}; // rotating frame: H_S uses omega_eg - frame_frequency
    TerminatorMode terminator{TerminatorMode::Oscillatory};
};

class Generator {
public:
    Generator(const bath::BathModel& model, const hierarchy::HierarchySpace& space,
              const SystemModel& system, GeneratorOptions options = {});

    [[nodiscard]] const bath::BathModel& model() const noexcept { return *model_; }
    [[nodiscard]] const hierarchy::HierarchySpace& space() const noexcept { return *space_; }
    [[nodiscard]] const SystemModel& system() const noexcept { return system_; }
    [[nodiscard]] const GeneratorOptions& options() const noexcept { return options_; }
    [[nodiscard]] std::size_t nodes() const noexcept { return diag_.size(); }

    // Effective damping of node i (cm^-1), after the terminator.
    [[nodiscard]] cd damping(std::size_t i) const noexcept { return diag_[i]; }
    // tau including folded modes (cm^-1).
    [[nodiscard]] cd tail() const noexcept { return tail_; }
    [[nodiscard]] const std::vector<std::size_t>& folded_axes() const noexcept { return folded_; }
    // Rough spectral-radius bound, cm^-1.
    [[nodiscard]] double max_rate() const noexcept { return max_rate_; }

    // out = d state / dt in fs^-1. Throws ContractError on size mismatch.
    void rhs(const ADOState& state, ADOState& out) const;
    [[nodiscard]] ADOState rhs(const ADOState& state) const;

    // Raw form: in and out hold 4 * nodes() entries and must not alias.
    void rhs(const cd* in, cd* out) const;

private:
    const bath::BathModel* model_;
    const hierarchy::HierarchySpace* space_;
    SystemModel system_;
    GeneratorOptions options_;

    Eigen::Matrix2cd h_;
    Eigen::Matrix2cd b_;
    cd tail_{0.0, 0.0};
    cd tail_bar_{0.0, 0.0};
    double max_rate_{0.0};
    std::vector<std::size_t> folded_;

    std::vector<cd> diag_;
    std::vector<std::size_t> raise_offsets_;
    std::vector<std::int32_t> raise_targets_;
    std::vector<std::size_t> lower_offsets_;
    std::vector<std::int32_t> lower_targets_;
    std::vector<cd> lower_c_;    // n_a e_a
    std::vector<cd> lower_cbar_; // n_a e'_a
};

// Classical RK4 with reusable scratch buffers.
class Rk4Stepper {
public:
    explicit Rk4Stepper(const Generator& gen);

    // One step of size dt (fs). Throws BlowUpError(step_index) on NaN/Inf.
    void advance(ADOState& state, double dt, std::size_t step_index = 0);

private:
    const Generator* gen_;
    std::vector<cd> k1_, k2_, k3_, k4_, tmp_;
};

// dt * 2*pi*c * max_rate must stay below 2.8 (RK4 stability on the imaginary axis).
void check_step_size(const Generator& gen, double dt);

ADOState step(const Generator& gen, const ADOState& state, double dt);

using Observer = std::function<void(const ADOState&)>;

// Advances to t_final (t_final - state.time must be a whole number of dt).
// Observers see the initial state and every stride-th state after it; the
// final state is always reported.
ADOState propagate(const Generator& gen, ADOState state, double t_final, double dt,
                   std::span<const Observer> observers = {}, std::size_t stride = 1);

struct EquilibrationResult {
    ADOState state;     // time reset to 0
    double residual;    // max |d rho/dt| in fs^-1
    bool converged;
    double elapsed;     // fs propagated
};

// Starts from |g><g| with all ADOs zero and propagates until the residual
// drops below tol or max_time is reached.
EquilibrationResult equilibrate(const Generator& gen, double dt, double tol = 1e-10,
                                double max_time = 2000.0);

// JSON checkpoint; load refuses on bath or lattice fingerprint mismatch.
void save_checkpoint(const std::string& path, const ADOState& state, const bath::BathModel& model,
                     const hierarchy::HierarchySpace& space);
ADOState load_checkpoint(const std::string& path, const bath::BathModel& model,
                         const hierarchy::HierarchySpace& space);

} // namespace lduo
