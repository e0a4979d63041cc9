#include "lduo/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "lduo/errors.hpp"
#include "lduo/hashing.hpp"
#include "lduo/units.hpp"

namespace lduo {

namespace {

using Mat = Eigen::Matrix2cd;
using CMap = Eigen::Map<const Mat>;
using MMap = Eigen::Map<Mat>;

constexpr double kRk4StabilityLimit = 2.8;
constexpr int kCheckpointVersion = 1;

bool close(const Mat& a, const Mat& b, double tol) { return (a - b).cwiseAbs().maxCoeff() <= tol; }

} // namespace

// SystemModel

SystemModel SystemModel::two_level(double omega_eg) {
    SystemModel s;
    s.omega_eg = omega_eg;
    s.coupling << 0.0, 0.0, 0.0, 1.0;
    s.dipole << 0.0, 1.0, 1.0, 0.0;
    return s;
}

Mat SystemModel::hamiltonian() const {
    Mat h = Mat::Zero();
    h(1, 1) = omega_eg;
    return h;
}

void SystemModel::validate() const {
    if (!std::isfinite(omega_eg)) throw DomainError("SystemModel: omega_eg must be finite");
    if (!close(coupling, coupling.adjoint(), 1e-12)) throw DomainError("SystemModel: B must be Hermitian");
    if (!close(coupling * coupling, coupling, 1e-12)) throw DomainError("SystemModel: B must be idempotent");
    if (!close(dipole, dipole.adjoint(), 1e-12)) throw DomainError("SystemModel: mu must be Hermitian");
    if (std::abs(dipole(0, 0)) > 1e-12 || std::abs(dipole(1, 1)) > 1e-12)
        throw DomainError("SystemModel: mu must have zero diagonal");
}

// ADOState

ADOState::ADOState(std::size_t nodes, double time) : data_(4 * nodes, cd{0.0, 0.0}), time_(time) {}

ADOState ADOState::factorized(std::size_t nodes, const Mat& rho0, double time) {
    if (nodes == 0) throw ContractError("ADOState: at least one node required");
    ADOState s(nodes, time);
    s.set(0, rho0);
    return s;
}

Mat ADOState::matrix(std::size_t i) const {
    if (i >= nodes()) throw ContractError("ADOState::matrix: node out of range");
    return CMap(data_.data() + 4 * i);
}

void ADOState::set(std::size_t i, const Mat& m) {
    if (i >= nodes()) throw ContractError("ADOState::set: node out of range");
    MMap(data_.data() + 4 * i) = m;
}

double ADOState::max_abs() const noexcept {
    double m = 0.0;
    for (const cd& x : data_) m = std::max(m, std::abs(x));
    return m;
}

bool ADOState::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(),
                       [](const cd& x) { return std::isfinite(x.real()) && std::isfinite(x.imag()); });
}

double max_abs_difference(const ADOState& a, const ADOState& b) {
    if (a.nodes() != b.nodes()) throw ContractError("max_abs_difference: node count mismatch");
    double m = 0.0;
    const auto da = a.data();
    const auto db = b.data();
    for (std::size_t k = 0; k < da.size(); ++k) m = std::max(m, std::abs(da[k] - db[k]));
    return m;
}

// Generator

Generator::Generator(const bath::BathModel& model, const hierarchy::HierarchySpace& space,
                     const SystemModel& system, GeneratorOptions options)
    : model_(&model), space_(&space), system_(system), options_(options) {
    system_.validate();
    if (space.axes() != model.mode_count())
        throw ContractError("Generator: hierarchy axes do not match the bath mode count");

    const auto& modes = model.modes();
    const std::size_t d = space.axes();
    const std::size_t n = space.size();

    h_ = system_.hamiltonian();
    h_(1, 1) -= options_.frame_frequency;
    b_ = system_.coupling;

    std::vector<cd> cbar(d);
    for (std::size_t a = 0; a < d; ++a) cbar[a] = model.conjugate_partner_coefficient(a);

    tail_ = tail_bar_ = cd{model.tail_coefficient(), 0.0};
    if (n > 0) {
        for (std::size_t a = 0; a < d; ++a) {
            if (space.raised(0, a) != hierarchy::HierarchySpace::kNone || modes[a].is_undamped()) continue;
            folded_.push_back(a);
            tail_ += modes[a].coefficient / modes[a].frequency;
            tail_bar_ += cbar[a] / modes[a].frequency;
        }
    }

    diag_.resize(n);
    raise_offsets_.assign(1, 0);
    lower_offsets_.assign(1, 0);
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cd g{0.0, 0.0};
        for (std::size_t a = 0; a < d; ++a) {
            const int k = space.entry(i, a);
            if (k != 0) g += static_cast<double>(k) * modes[a].frequency;
        }
        if (options_.terminator == TerminatorMode::Oscillatory && i != 0 && space.tier(i) == space.rule().depth_cap)
            g = cd{0.0, g.imag()};
        diag_[i] = g;
        max_diag = std::max(max_diag, std::abs(g));

        for (std::size_t a = 0; a < d; ++a) {
            const auto up = space.raised(i, a);
            if (up != hierarchy::HierarchySpace::kNone) raise_targets_.push_back(up);
            const auto down = space.lowered(i, a);
            if (down != hierarchy::HierarchySpace::kNone) {
                const double k = space.entry(i, a);
                lower_targets_.push_back(down);
                lower_c_.push_back(k * modes[a].coefficient);
                lower_cbar_.push_back(k * cbar[a]);
            }
        }
        raise_offsets_.push_back(raise_targets_.size());
        lower_offsets_.push_back(lower_targets_.size());
    }
    max_rate_ = max_diag + std::abs(h_(1, 1) - h_(0, 0)) + 2.0 * std::abs(tail_);
}

void Generator::rhs(const cd* in, cd* out) const {
    const double conv = units::kAngularPerWavenumber;
    const cd mi{0.0, -1.0};
    const bool has_tail = tail_ != cd{0.0, 0.0} || tail_bar_ != cd{0.0, 0.0};
    const std::size_t n = diag_.size();

    for (std::size_t i = 0; i < n; ++i) {
        const CMap r(in + 4 * i);
        Mat acc = mi * (h_ * r - r * h_) - diag_[i] * r;
        if (has_tail) {
            const Mat x = tail_ * (b_ * r) - tail_bar_ * (r * b_);
            acc -= b_ * x - x * b_;
        }

        const std::size_t r0 = raise_offsets_[i], r1 = raise_offsets_[i + 1];
        if (r0 != r1) {
            Mat sum = Mat::Zero();
            for (std::size_t k = r0; k < r1; ++k) sum += CMap(in + 4 * static_cast<std::size_t>(raise_targets_[k]));
            acc += mi * (b_ * sum - sum * b_);
        }

        const std::size_t l0 = lower_offsets_[i], l1 = lower_offsets_[i + 1];
        if (l0 != l1) {
            Mat left = Mat::Zero();
            Mat right = Mat::Zero();
            for (std::size_t k = l0; k < l1; ++k) {
                const CMap low(in + 4 * static_cast<std::size_t>(lower_targets_[k]));
                left += lower_c_[k] * low;
                right += lower_cbar_[k] * low;
            }
            acc += mi * (b_ * left - right * b_);
        }
        MMap(out + 4 * i) = conv * acc;
    }
}

void Generator::rhs(const ADOState& state, ADOState& out) const {
    if (state.nodes() != nodes()) throw ContractError("rhs: state size does not match the hierarchy");
    if (out.nodes() != nodes()) out = ADOState(nodes(), state.time());
    if (&state == &out) throw ContractError("rhs: input and output must differ");
    rhs(state.data().data(), out.data().data());
    out.set_time(state.time());
}

ADOState Generator::rhs(const ADOState& state) const {
    ADOState out(nodes(), state.time());
    rhs(state, out);
    return out;
}

// Integration

void check_step_size(const Generator& gen, double dt) {
    if (!std::isfinite(dt) || !(dt > 0.0)) throw ContractError("step: dt must be positive");
    const double z = dt * units::kAngularPerWavenumber * gen.max_rate();
    if (z >= kRk4StabilityLimit) {
        throw ContractError("step: dt = " + std::to_string(dt) + " fs exceeds the RK4 stability bound (dt*rate = " +
                            std::to_string(z) + ")");
    }
}

Rk4Stepper::Rk4Stepper(const Generator& gen)
    : gen_(&gen), k1_(4 * gen.nodes()), k2_(4 * gen.nodes()), k3_(4 * gen.nodes()), k4_(4 * gen.nodes()),
      tmp_(4 * gen.nodes()) {}

void Rk4Stepper::advance(ADOState& state, double dt, std::size_t step_index) {
    if (state.nodes() != gen_->nodes()) throw ContractError("step: state size does not match the hierarchy");
    cd* y = state.data().data();
    const std::size_t m = k1_.size();

    gen_->rhs(y, k1_.data());
    for (std::size_t k = 0; k < m; ++k) tmp_[k] = y[k] + 0.5 * dt * k1_[k];
    gen_->rhs(tmp_.data(), k2_.data());
    for (std::size_t k = 0; k < m; ++k) tmp_[k] = y[k] + 0.5 * dt * k2_[k];
    gen_->rhs(tmp_.data(), k3_.data());
    for (std::size_t k = 0; k < m; ++k) tmp_[k] = y[k] + dt * k3_[k];
    gen_->rhs(tmp_.data(), k4_.data());
    const double w = dt / 6.0;
    for (std::size_t k = 0; k < m; ++k) y[k] += w * (k1_[k] + 2.0 * (k2_[k] + k3_[k]) + k4_[k]);

    state.set_time(state.time() + dt);
    if (!state.all_finite())
        throw BlowUpError("step: non-finite ADO value at step " + std::to_string(step_index), step_index);
}

ADOState step(const Generator& gen, const ADOState& state, double dt) {
    check_step_size(gen, dt);
    ADOState next = state;
    Rk4Stepper(gen).advance(next, dt);
    return next;
}

ADOState propagate(const Generator& gen, ADOState state, double t_final, double dt,
                   std::span<const Observer> observers, std::size_t stride) {
    check_step_size(gen, dt);
    if (stride == 0) throw ContractError("propagate: stride must be >= 1");
    const double t0 = state.time();
    const double span = t_final - t0;
    if (!(span > 0.0)) throw ContractError("propagate: t_final must exceed the state time");
    const double ratio = span / dt;
    const auto steps = static_cast<std::size_t>(std::llround(ratio));
    if (steps == 0 || std::abs(ratio - static_cast<double>(steps)) > 1e-6)
        throw ContractError("propagate: t_final - t0 is not a whole number of steps");

    auto notify = [&](const ADOState& s) {
        for (const auto& obs : observers) obs(s);
    };
    notify(state);
    Rk4Stepper stepper(gen);
    for (std::size_t k = 1; k <= steps; ++k) {
        stepper.advance(state, dt, k);
        state.set_time(t0 + static_cast<double>(k) * dt);
        if (k % stride == 0 || k == steps) notify(state);
    }
    return state;
}

EquilibrationResult equilibrate(const Generator& gen, double dt, double tol, double max_time) {
    check_step_size(gen, dt);
    Mat ground = Mat::Zero();
    ground(0, 0) = 1.0;
    ADOState state = ADOState::factorized(gen.nodes(), ground);
    ADOState deriv(gen.nodes());

    auto residual = [&] {
        gen.rhs(state, deriv);
        return deriv.max_abs();
    };

    double res = residual();
    const auto chunk = static_cast<std::size_t>(std::max(1.0, std::round(10.0 / dt)));
    Rk4Stepper stepper(gen);
    std::size_t k = 0;
    while (res >= tol && state.time() < max_time) {
        for (std::size_t j = 0; j < chunk && state.time() < max_time; ++j) stepper.advance(state, dt, ++k);
        res = residual();
    }
    const double elapsed = state.time();
    state.set_time(0.0);
    return {std::move(state), res, res < tol, elapsed};
}

// Checkpoints

void save_checkpoint(const std::string& path, const ADOState& state, const bath::BathModel& model,
                     const hierarchy::HierarchySpace& space) {
    if (state.nodes() != space.size()) throw ContractError("save_checkpoint: state does not match the hierarchy");
    nlohmann::json j;
    j["format"] = "lduo-checkpoint";
    j["version"] = kCheckpointVersion;
    j["bath_hash"] = sha256_hex(model.fingerprint());
    j["lattice_hash"] = sha256_hex(space.fingerprint());
    j["time"] = state.time();
    j["nodes"] = state.nodes();
    auto& data = j["data"] = nlohmann::json::array();
    for (const cd& x : state.data()) {
        data.push_back(x.real());
        data.push_back(x.imag());
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_checkpoint: cannot write " + path);
    out << j.dump() << '\n';
}

ADOState load_checkpoint(const std::string& path, const bath::BathModel& model,
                         const hierarchy::HierarchySpace& space) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_checkpoint: cannot read " + path);
    const nlohmann::json j = nlohmann::json::parse(in);
    if (j.value("format", "") != "lduo-checkpoint" || j.value("version", 0) != kCheckpointVersion)
        throw ContractError("load_checkpoint: unsupported checkpoint format");
    if (j.at("bath_hash").get<std::string>() != sha256_hex(model.fingerprint()))
        throw ContractError("load_checkpoint: bath model hash mismatch");
    if (j.at("lattice_hash").get<std::string>() != sha256_hex(space.fingerprint()))
        throw ContractError("load_checkpoint: hierarchy hash mismatch");
    const auto nodes = j.at("nodes").get<std::size_t>();
    const auto& data = j.at("data");
    if (nodes != space.size() || data.size() != 8 * nodes)
        throw ContractError("load_checkpoint: ADO array size mismatch");
    ADOState s(nodes, j.at("time").get<double>());
    auto out = s.data();
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = {data[2 * k].get<double>(), data[2 * k + 1].get<double>()};
    return s;
}

} // namespace lduo
