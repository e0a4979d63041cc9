// bath.hpp - Lorentz-Drude and undamped-oscillator baths and their exponential decomposition
//
// The total correlation function is written as a sum of complex exponentials
//
//     L(t) = sum_a e_a exp(-nu_a t)
//
// with one mode per hierarchy axis. Modes are always laid out as
//
//     [UoPlus, UoMinus, LdDrude, LdMatsubara(1), ..., LdMatsubara(K)]
//
// (UO modes present only with an undamped bath, LD modes only with a
// Lorentz-Drude bath). The hierarchy index layout and every observable rely on
// this order.
//
// Coefficients are in cm^-2, frequencies in cm^-1; the real part of a
// frequency is a decay rate, the imaginary part an oscillation.

#pragma once

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "lduo/units.hpp"

namespace lduo::bath {

using cd = std::complex<double>;

struct LorentzDrudeBath {
    double eta{50.0};            // coupling strength eta_LD, cm^-1
    double lambda_cutoff{100.0}; // Drude cutoff Lambda_LD, cm^-1

    // J_LD(omega) = 2 eta omega Lambda / (omega^2 + Lambda^2)
    [[nodiscard]] double spectral_density(double omega) const noexcept;
    void validate() const;
};

struct UndampedBath {
    double lambda_reorg{0.5}; // lambda_UO, cm^-1
    double omega_uo{500.0};   // omega_UO, cm^-1

    [[nodiscard]] double huang_rhys() const noexcept { return lambda_reorg / omega_uo; }
    void validate() const;
};

enum class ModeOrigin { UoPlus, UoMinus, LdDrude, LdMatsubara };

std::string to_string(ModeOrigin origin);

struct MatsubaraMode {
    cd coefficient;        // e_a
    cd frequency;          // nu_a
    ModeOrigin origin;
    int matsubara_index{0}; // n >= 1 for LdMatsubara, 0 otherwise

    [[nodiscard]] bool is_undamped() const noexcept {
        return origin == ModeOrigin::UoPlus || origin == ModeOrigin::UoMinus;
    }
    [[nodiscard]] std::string label() const;
};

// Drude coefficient convention. Cot is what the LDUO derivation writes; Coth
// is offered because parts of the literature quote it.
enum class CoefficientConvention { Cot, Coth };

// K+1 modes: the Drude pole then K Matsubara poles.
// Throws DegenerateTemperatureError when |sin(beta hbar Lambda / 2)| < 1e-12.
std::vector<MatsubaraMode> decompose_ld(const LorentzDrudeBath& bath,
                                        const units::Thermodynamics& thermo,
                                        int matsubara_count,
                                        CoefficientConvention convention = CoefficientConvention::Cot);

// The +i omega_UO / -i omega_UO pair. A non-finite beta_hbar (T -> 0) uses coth = 1.
std::array<MatsubaraMode, 2> decompose_uo(const UndampedBath& bath,
                                          const units::Thermodynamics& thermo);

// Sum_{n=K+1}^{N} d_n / nu_n by direct summation, stopping once a term drops
// below tol. Throws ConvergenceError (carrying the partial sum) at N = 1e6.
double markovian_tail(const LorentzDrudeBath& bath, const units::Thermodynamics& thermo,
                      int matsubara_count, double tol);

// Same quantity from the partial-fraction expansion of cot; no truncation.
double markovian_tail_closed_form(const LorentzDrudeBath& bath,
                                  const units::Thermodynamics& thermo, int matsubara_count);

// Smallest K with nu_K >= factor * Lambda_LD.
int auto_matsubara_count(const LorentzDrudeBath& bath, const units::Thermodynamics& thermo,
                         double factor = 5.0);

struct BathModelOptions {
    std::optional<int> matsubara_count; // empty -> auto_matsubara_count
    CoefficientConvention convention{CoefficientConvention::Cot};
};

class BathModel {
public:
    // At least one of ld, uo must be present.
    static BathModel build(std::optional<LorentzDrudeBath> ld, std::optional<UndampedBath> uo,
                           const units::Thermodynamics& thermo, BathModelOptions options = {});

    [[nodiscard]] const std::vector<MatsubaraMode>& modes() const noexcept { return modes_; }
    [[nodiscard]] std::size_t mode_count() const noexcept { return modes_.size(); }
    [[nodiscard]] int matsubara_count() const noexcept { return matsubara_count_; }
    [[nodiscard]] double tail_coefficient() const noexcept { return tail_; }
    [[nodiscard]] const std::optional<LorentzDrudeBath>& ld() const noexcept { return ld_; }
    [[nodiscard]] const std::optional<UndampedBath>& uo() const noexcept { return uo_; }
    [[nodiscard]] const units::Thermodynamics& thermo() const noexcept { return thermo_; }
    [[nodiscard]] const BathModelOptions& options() const noexcept { return options_; }

    // Coefficient of exp(-nu_a t) in conj(L(t)): conj(e_b) where nu_b = conj(nu_a).
    // Equals conj(e_a) for damped modes and swaps the UO pair.
    [[nodiscard]] cd conjugate_partner_coefficient(std::size_t axis) const;

    // Same parameters with one bath removed; K and convention are kept.
    [[nodiscard]] BathModel ld_only() const;
    [[nodiscard]] BathModel uo_only() const;

    // Stable text digest of the mode table (used by checkpoints and manifests).
    [[nodiscard]] std::string fingerprint() const;

private:
    std::optional<LorentzDrudeBath> ld_;
    std::optional<UndampedBath> uo_;
    units::Thermodynamics thermo_{};
    BathModelOptions options_{};
    int matsubara_count_{0};
    double tail_{0.0};
    std::vector<MatsubaraMode> modes_;
    std::vector<std::size_t> partner_;
};

// Sum_a e_a exp(-nu_a t), t in fs.
cd correlation_function(const BathModel& model, double t_fs);

struct A0Value {
    double real;
    double imag; // dissipative residual, -eta*Lambda for a Drude bath
    [[nodiscard]] cd complex() const noexcept { return {real, imag}; }
};

// Sum_a e_a, split into real and imaginary parts.
A0Value a0(const BathModel& model);

} // namespace lduo::bath
