#include "lduo/bath.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "lduo/errors.hpp"

namespace lduo::bath {

namespace {

constexpr double kDegenerateSin = 1e-12;
constexpr long kTailIterationCap = 1'000'000;

// d_n / nu_n for the n-th Matsubara pole.
double matsubara_weight(const LorentzDrudeBath& b, const units::Thermodynamics& th, long n) {
    const double nu = 2.0 * std::numbers::pi * static_cast<double>(n) * th.kT_wavenumber;
    return 4.0 * b.eta * b.lambda_cutoff * th.kT_wavenumber / (nu * nu - b.lambda_cutoff * b.lambda_cutoff);
}

void require_finite_positive(double v, const char* what) {
    if (!std::isfinite(v) || !(v > 0.0))
        throw DomainError(std::string(what) + " must be positive and finite");
}

void require_finite_nonnegative(double v, const char* what) {
    if (!std::isfinite(v) || v < 0.0) throw DomainError(std::string(what) + " must be non-negative and finite");
}

} // namespace

double LorentzDrudeBath::spectral_density(double omega) const noexcept {
    return 2.0 * eta * omega * lambda_cutoff / (omega * omega + lambda_cutoff * lambda_cutoff);
}

void LorentzDrudeBath::validate() const {
    require_finite_nonnegative(eta, "eta_LD");
    require_finite_positive(lambda_cutoff, "Lambda_LD");
}

void UndampedBath::validate() const {
    require_finite_nonnegative(lambda_reorg, "lambda_UO");
    require_finite_positive(omega_uo, "omega_UO");
}

std::string to_string(ModeOrigin origin) {
    switch (origin) {
    case ModeOrigin::UoPlus: return "uo_plus";
    case ModeOrigin::UoMinus: return "uo_minus";
    case ModeOrigin::LdDrude: return "ld_drude";
    case ModeOrigin::LdMatsubara: return "ld_matsubara";
    }
    return "unknown";
}

std::string MatsubaraMode::label() const {
    if (origin == ModeOrigin::LdMatsubara) return "ld_matsubara_" + std::to_string(matsubara_index);
    return to_string(origin);
}

std::vector<MatsubaraMode> decompose_ld(const LorentzDrudeBath& bath,
                                        const units::Thermodynamics& thermo, int matsubara_count,
                                        CoefficientConvention convention) {
    bath.validate();
    if (matsubara_count < 0) throw DomainError("decompose_ld: K must be >= 0");
    require_finite_positive(thermo.kT_wavenumber, "kT");

    const double x = thermo.half_reduced(bath.lambda_cutoff);
    const double s = std::sin(x);
    if (std::abs(s) < kDegenerateSin) {
        throw DegenerateTemperatureError("decompose_ld: Lambda_LD/(2kT) sits on a pole of cot (|sin| = " +
                                         std::to_string(std::abs(s)) + ")");
    }
    const double hyper = convention == CoefficientConvention::Cot ? std::cos(x) / s : 1.0 / std::tanh(x);
    const double el = bath.eta * bath.lambda_cutoff;

    std::vector<MatsubaraMode> modes;
    modes.reserve(static_cast<std::size_t>(matsubara_count) + 1);
    modes.push_back({cd{el * hyper, -el}, cd{bath.lambda_cutoff, 0.0}, ModeOrigin::LdDrude, 0});
    for (int n = 1; n <= matsubara_count; ++n) {
        const double nu = thermo.matsubara(n);
        const double d = 4.0 * el * nu * thermo.kT_wavenumber / (nu * nu - bath.lambda_cutoff * bath.lambda_cutoff);
        modes.push_back({cd{d, 0.0}, cd{nu, 0.0}, ModeOrigin::LdMatsubara, n});
    }
    return modes;
}

std::array<MatsubaraMode, 2> decompose_uo(const UndampedBath& bath, const units::Thermodynamics& thermo) {
    bath.validate();
    double coth = 1.0;
    if (std::isfinite(thermo.beta_hbar) && thermo.kT_wavenumber > 0.0) {
        const double x = thermo.half_reduced(bath.omega_uo);
        coth = x > 350.0 ? 1.0 : 1.0 / std::tanh(x);
    }
    const double half = 0.5 * bath.huang_rhys() * bath.omega_uo;
    return {MatsubaraMode{cd{half * (coth + 1.0), 0.0}, cd{0.0, bath.omega_uo}, ModeOrigin::UoPlus, 0},
            MatsubaraMode{cd{half * (coth - 1.0), 0.0}, cd{0.0, -bath.omega_uo}, ModeOrigin::UoMinus, 0}};
}

double markovian_tail(const LorentzDrudeBath& bath, const units::Thermodynamics& thermo,
                      int matsubara_count, double tol) {
    bath.validate();
    if (matsubara_count < 0) throw DomainError("markovian_tail: K must be >= 0");
    if (!(tol > 0.0)) throw DomainError("markovian_tail: tol must be positive");
    double sum = 0.0;
    for (long n = matsubara_count + 1;; ++n) {
        const double term = matsubara_weight(bath, thermo, n);
        sum += term;
        if (std::abs(term) < tol) return sum;
        if (n - matsubara_count >= kTailIterationCap) {
            throw ConvergenceError("markovian_tail: no convergence after 1e6 terms", sum);
        }
    }
}

double markovian_tail_closed_form(const LorentzDrudeBath& bath, const units::Thermodynamics& thermo,
                                  int matsubara_count) {
    bath.validate();
    if (matsubara_count < 0) throw DomainError("markovian_tail_closed_form: K must be >= 0");
    const double x = thermo.half_reduced(bath.lambda_cutoff);
    const double s = std::sin(x);
    if (std::abs(s) < kDegenerateSin)
        throw DegenerateTemperatureError("markovian_tail_closed_form: degenerate temperature");
    // sum_{n>=1} d_n/nu_n = eta (1/x - cot x)
    double total = bath.eta * (1.0 / x - std::cos(x) / s);
    for (int n = 1; n <= matsubara_count; ++n) total -= matsubara_weight(bath, thermo, n);
    return total;
}

int auto_matsubara_count(const LorentzDrudeBath& bath, const units::Thermodynamics& thermo, double factor) {
    const double k = std::ceil(factor * bath.lambda_cutoff / thermo.matsubara(1));
    return std::max(1, static_cast<int>(k));
}

BathModel BathModel::build(std::optional<LorentzDrudeBath> ld, std::optional<UndampedBath> uo,
                           const units::Thermodynamics& thermo, BathModelOptions options) {
    if (!ld && !uo) throw ContractError("BathModel: at least one bath must be present");
    require_finite_positive(thermo.kT_wavenumber, "kT");

    BathModel m;
    m.ld_ = ld;
    m.uo_ = uo;
    m.thermo_ = thermo;
    m.options_ = options;

    if (uo) {
        const auto pair = decompose_uo(*uo, thermo);
        m.modes_.push_back(pair[0]);
        m.modes_.push_back(pair[1]);
    }
    if (ld) {
        m.matsubara_count_ = options.matsubara_count ? *options.matsubara_count
                                                     : auto_matsubara_count(*ld, thermo);
        m.options_.matsubara_count = m.matsubara_count_;
        auto ldm = decompose_ld(*ld, thermo, m.matsubara_count_, options.convention);
        m.modes_.insert(m.modes_.end(), ldm.begin(), ldm.end());
        m.tail_ = markovian_tail_closed_form(*ld, thermo, m.matsubara_count_);
    } else if (options.matsubara_count) {
        m.matsubara_count_ = *options.matsubara_count;
    }

    m.partner_.resize(m.modes_.size());
    for (std::size_t a = 0; a < m.modes_.size(); ++a) m.partner_[a] = a;
    if (uo) std::swap(m.partner_[0], m.partner_[1]);
    return m;
}

cd BathModel::conjugate_partner_coefficient(std::size_t axis) const {
    if (axis >= modes_.size()) throw ContractError("conjugate_partner_coefficient: axis out of range");
    return std::conj(modes_[partner_[axis]].coefficient);
}

BathModel BathModel::ld_only() const {
    if (!ld_) throw ContractError("ld_only: model has no Lorentz-Drude bath");
    return build(ld_, std::nullopt, thermo_, options_);
}

BathModel BathModel::uo_only() const {
    if (!uo_) throw ContractError("uo_only: model has no undamped bath");
    return build(std::nullopt, uo_, thermo_, options_);
}

std::string BathModel::fingerprint() const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "T=" << thermo_.temperature << ";K=" << matsubara_count_
       << ";conv=" << (options_.convention == CoefficientConvention::Cot ? "cot" : "coth");
    if (ld_) os << ";ld=" << ld_->eta << ',' << ld_->lambda_cutoff;
    if (uo_) os << ";uo=" << uo_->lambda_reorg << ',' << uo_->omega_uo;
    os << ";tail=" << tail_;
    for (const auto& m : modes_) {
        os << ';' << m.label() << ':' << m.coefficient.real() << ',' << m.coefficient.imag() << ','
           << m.frequency.real() << ',' << m.frequency.imag();
    }
    return os.str();
}

cd correlation_function(const BathModel& model, double t_fs) {
    if (!std::isfinite(t_fs) || t_fs < 0.0) throw DomainError("correlation_function: t must be >= 0");
    cd sum{0.0, 0.0};
    for (const auto& m : model.modes())
        sum += m.coefficient * std::exp(-m.frequency * (units::kAngularPerWavenumber * t_fs));
    return sum;
}

A0Value a0(const BathModel& model) {
    cd sum{0.0, 0.0};
    for (const auto& m : model.modes()) sum += m.coefficient;
    return {sum.real(), sum.imag()};
}

} // namespace lduo::bath
