#include "lduo/cli.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "lduo/errors.hpp"
#include "lduo/hashing.hpp"
#include "lduo/numfmt.hpp"
#include "lduo/observables.hpp"
#include "lduo/spectroscopy.hpp"
#include "lduo/units.hpp"

#ifndef LDUO_VERSION
#define LDUO_VERSION "dev"
#endif

namespace lduo::cli {

namespace fs = std::filesystem;
using Mat = Eigen::Matrix2cd;
using json = nlohmann::ordered_json;

ConfigError::ConfigError(std::vector<std::string> p)
    : std::runtime_error(p.empty() ? "invalid config" : p.front()), problems(std::move(p)) {}

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"decompose",  "equilibrate", "dynamics",
                                                "bathcoords", "spectra2d",   "validate"};
    return names;
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

class Reader {
public:
    std::vector<std::string> errors;

    // Returns false (and records an error) when node is present but not a map.
    bool section(const YAML::Node& node, const std::string& path, const std::set<std::string>& allowed) {
        if (!node || node.IsNull()) return false;
        if (!node.IsMap()) {
            errors.push_back(path + ": expected a mapping");
            return false;
        }
        for (const auto& kv : node) {
            const auto key = kv.first.as<std::string>();
            if (!allowed.count(key)) errors.push_back(path + "." + key + ": unknown key");
        }
        return true;
    }

    template <class T>
    void scalar(const YAML::Node& parent, const std::string& key, const std::string& path, T& out,
                const char* type_name) {
        const YAML::Node n = parent[key];
        if (!n) return;
        try {
            if (!n.IsScalar()) throw YAML::BadConversion(n.Mark());
            out = n.as<T>();
        } catch (const YAML::Exception&) {
            errors.push_back(path + "." + key + ": expected " + type_name);
        }
    }

    void number(const YAML::Node& p, const std::string& k, const std::string& path, double& out) {
        scalar(p, k, path, out, "a number");
    }
    void integer(const YAML::Node& p, const std::string& k, const std::string& path, int& out) {
        scalar(p, k, path, out, "an integer");
    }
    void size(const YAML::Node& p, const std::string& k, const std::string& path, std::size_t& out) {
        long long v = static_cast<long long>(out);
        scalar(p, k, path, v, "a non-negative integer");
        if (v < 0) errors.push_back(path + "." + k + ": must be non-negative");
        else out = static_cast<std::size_t>(v);
    }
    void boolean(const YAML::Node& p, const std::string& k, const std::string& path, bool& out) {
        scalar(p, k, path, out, "true or false");
    }
    void text(const YAML::Node& p, const std::string& k, const std::string& path, std::string& out) {
        scalar(p, k, path, out, "a string");
    }

    template <class E>
    void choice(const YAML::Node& p, const std::string& k, const std::string& path, E& out,
                const std::map<std::string, E>& options) {
        if (!p[k]) return;
        std::string v;
        text(p, k, path, v);
        if (v.empty()) return;
        const auto it = options.find(v);
        if (it == options.end()) {
            std::string list;
            for (const auto& [name, _] : options) list += (list.empty() ? "" : "|") + name;
            errors.push_back(path + "." + k + ": expected one of " + list + ", got '" + v + "'");
        } else {
            out = it->second;
        }
    }

    void positive(double v, const std::string& field) {
        if (!std::isfinite(v) || !(v > 0.0)) errors.push_back(field + ": must be positive");
    }
    void nonnegative(double v, const std::string& field) {
        if (!std::isfinite(v) || v < 0.0) errors.push_back(field + ": must be non-negative");
    }
};

const std::map<std::string, InitialState> kInitial{
    {"excited", InitialState::Excited}, {"superposition", InitialState::Superposition}, {"ground", InitialState::Ground}};
const std::map<std::string, StartMode> kStart{{"equilibrated", StartMode::Equilibrated},
                                              {"factorized", StartMode::Factorized}};

bool whole_multiple(double span, double dt) {
    const double r = span / dt;
    return std::abs(r - std::round(r)) <= 1e-6;
}

} // namespace

JobConfig parse_config_text(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError({std::string("config: parse error: ") + e.what()});
    }
    JobConfig c;
    Reader r;
    if (!root || root.IsNull()) throw ConfigError({"config: empty document"});
    if (!root.IsMap()) throw ConfigError({"config: top level must be a mapping"});
    r.section(root, "config",
              {"job", "system", "baths", "thermo", "hierarchy", "integrator", "dynamics", "bathcoords", "spectra2d"});

    r.text(root, "job", "config", c.job);
    if (!c.job.empty()) {
        const auto& names = subcommands();
        if (std::find(names.begin(), names.end() - 1, c.job) == names.end() - 1)
            r.errors.push_back("config.job: unknown job kind '" + c.job + "'");
    }

    if (r.section(root["system"], "system", {"omega_eg"})) r.number(root["system"], "omega_eg", "system", c.omega_eg);
    r.positive(c.omega_eg, "system.omega_eg");

    const YAML::Node baths = root["baths"];
    if (r.section(baths, "baths", {"ld", "uo"})) {
        if (baths["ld"]) {
            bath::LorentzDrudeBath ld;
            const YAML::Node n = baths["ld"];
            if (r.section(n, "baths.ld", {"eta", "lambda"})) {
                r.number(n, "eta", "baths.ld", ld.eta);
                r.number(n, "lambda", "baths.ld", ld.lambda_cutoff);
            }
            r.nonnegative(ld.eta, "baths.ld.eta");
            r.positive(ld.lambda_cutoff, "baths.ld.lambda");
            c.ld = ld;
        }
        if (baths["uo"]) {
            bath::UndampedBath uo;
            const YAML::Node n = baths["uo"];
            if (r.section(n, "baths.uo", {"lambda_reorg", "omega_uo"})) {
                r.number(n, "lambda_reorg", "baths.uo", uo.lambda_reorg);
                r.number(n, "omega_uo", "baths.uo", uo.omega_uo);
            }
            r.nonnegative(uo.lambda_reorg, "baths.uo.lambda_reorg");
            r.positive(uo.omega_uo, "baths.uo.omega_uo");
            c.uo = uo;
        }
    }
    if (!c.ld && !c.uo) r.errors.push_back("baths: at least one of baths.ld, baths.uo must be defined");

    if (r.section(root["thermo"], "thermo", {"temperature"}))
        r.number(root["thermo"], "temperature", "thermo", c.temperature);
    r.positive(c.temperature, "thermo.temperature");

    const YAML::Node h = root["hierarchy"];
    if (r.section(h, "hierarchy",
                  {"gamma_max_factor", "gamma_max", "depth_cap", "K", "convention", "terminator", "max_nodes"})) {
        r.number(h, "gamma_max_factor", "hierarchy", c.hierarchy.gamma_max_factor);
        if (h["gamma_max"]) {
            double g = 0.0;
            r.number(h, "gamma_max", "hierarchy", g);
            r.positive(g, "hierarchy.gamma_max");
            c.hierarchy.gamma_max = g;
        }
        r.integer(h, "depth_cap", "hierarchy", c.hierarchy.depth_cap);
        if (h["K"]) {
            if (h["K"].IsScalar() && h["K"].Scalar() == "auto") {
                c.hierarchy.matsubara_count.reset();
            } else {
                int k = 0;
                r.integer(h, "K", "hierarchy", k);
                if (k < 0) r.errors.push_back("hierarchy.K: must be >= 0 or \"auto\"");
                c.hierarchy.matsubara_count = k;
            }
        }
        r.choice(h, "convention", "hierarchy", c.hierarchy.convention,
                 std::map<std::string, bath::CoefficientConvention>{{"cot", bath::CoefficientConvention::Cot},
                                                                    {"coth", bath::CoefficientConvention::Coth}});
        r.choice(h, "terminator", "hierarchy", c.hierarchy.terminator,
                 std::map<std::string, TerminatorMode>{{"oscillatory", TerminatorMode::Oscillatory},
                                                       {"plain", TerminatorMode::Plain}});
        r.size(h, "max_nodes", "hierarchy", c.hierarchy.max_nodes);
    }
    r.positive(c.hierarchy.gamma_max_factor, "hierarchy.gamma_max_factor");
    if (c.hierarchy.depth_cap < 1) r.errors.push_back("hierarchy.depth_cap: must be >= 1");
    if (c.hierarchy.max_nodes == 0) r.errors.push_back("hierarchy.max_nodes: must be >= 1");

    const YAML::Node in = root["integrator"];
    if (r.section(in, "integrator", {"dt", "t_final", "stride", "rotating_frame"})) {
        r.number(in, "dt", "integrator", c.integrator.dt);
        r.number(in, "t_final", "integrator", c.integrator.t_final);
        r.size(in, "stride", "integrator", c.integrator.stride);
        r.boolean(in, "rotating_frame", "integrator", c.integrator.rotating_frame);
    }
    r.positive(c.integrator.dt, "integrator.dt");
    r.positive(c.integrator.t_final, "integrator.t_final");
    if (c.integrator.stride == 0) r.errors.push_back("integrator.stride: must be >= 1");
    if (c.integrator.dt > 0 && c.integrator.t_final > 0 && !whole_multiple(c.integrator.t_final, c.integrator.dt))
        r.errors.push_back("integrator.t_final: must be a whole multiple of integrator.dt");

    const YAML::Node dy = root["dynamics"];
    if (r.section(dy, "dynamics", {"initial", "start", "checkpoint"})) {
        r.choice(dy, "initial", "dynamics", c.dynamics.initial, kInitial);
        r.choice(dy, "start", "dynamics", c.dynamics.start, kStart);
        r.text(dy, "checkpoint", "dynamics", c.dynamics.checkpoint);
    }

    const YAML::Node bc = root["bathcoords"];
    if (r.section(bc, "bathcoords", {"orders", "initial", "start", "noise_floor"})) {
        if (bc["orders"]) {
            try {
                c.bathcoords.orders = bc["orders"].as<std::vector<int>>();
            } catch (const YAML::Exception&) {
                r.errors.push_back("bathcoords.orders: expected a list of integers");
            }
        }
        r.choice(bc, "initial", "bathcoords", c.bathcoords.initial, kInitial);
        r.choice(bc, "start", "bathcoords", c.bathcoords.start, kStart);
        r.boolean(bc, "noise_floor", "bathcoords", c.bathcoords.noise_floor);
    }
    for (int o : c.bathcoords.orders) {
        if (o < 1) r.errors.push_back("bathcoords.orders: orders must be >= 1");
        else if (o > c.hierarchy.depth_cap)
            r.errors.push_back("bathcoords.orders: order " + std::to_string(o) + " exceeds hierarchy.depth_cap");
    }

    const YAML::Node sp = root["spectra2d"];
    auto& s = c.spectra2d;
    if (r.section(sp, "spectra2d",
                  {"T_list", "N1", "N3", "dt1", "dt3", "integrator_dt", "window", "phase_flip_sign", "rephasing_only",
                   "zero_pad", "dump_response"})) {
        if (sp["T_list"]) {
            try {
                s.waiting_times = sp["T_list"].as<std::vector<double>>();
            } catch (const YAML::Exception&) {
                r.errors.push_back("spectra2d.T_list: expected a list of numbers");
            }
        }
        r.size(sp, "N1", "spectra2d", s.n1);
        r.size(sp, "N3", "spectra2d", s.n3);
        r.number(sp, "dt1", "spectra2d", s.dt1);
        r.number(sp, "dt3", "spectra2d", s.dt3);
        r.number(sp, "integrator_dt", "spectra2d", s.integrator_dt);
        r.boolean(sp, "window", "spectra2d", s.window);
        r.number(sp, "phase_flip_sign", "spectra2d", s.phase_flip_sign);
        r.boolean(sp, "rephasing_only", "spectra2d", s.rephasing_only);
        r.size(sp, "zero_pad", "spectra2d", s.zero_pad);
        r.boolean(sp, "dump_response", "spectra2d", s.dump_response);
    }
    auto pow2 = [](std::size_t n) { return n != 0 && (n & (n - 1)) == 0; };
    if (!pow2(s.n1)) r.errors.push_back("spectra2d.N1: must be a power of two");
    if (!pow2(s.n3)) r.errors.push_back("spectra2d.N3: must be a power of two");
    r.positive(s.dt1, "spectra2d.dt1");
    r.positive(s.dt3, "spectra2d.dt3");
    r.positive(s.integrator_dt, "spectra2d.integrator_dt");
    if (s.zero_pad == 0) r.errors.push_back("spectra2d.zero_pad: must be >= 1");
    if (s.integrator_dt > 0) {
        if (s.dt1 > 0 && !whole_multiple(s.dt1, s.integrator_dt))
            r.errors.push_back("spectra2d.dt1: must be a whole multiple of integrator_dt");
        if (s.dt3 > 0 && !whole_multiple(s.dt3, s.integrator_dt))
            r.errors.push_back("spectra2d.dt3: must be a whole multiple of integrator_dt");
        for (double t : s.waiting_times) {
            if (!(t >= 0.0)) r.errors.push_back("spectra2d.T_list: waiting times must be >= 0");
            else if (!whole_multiple(t, s.integrator_dt))
                r.errors.push_back("spectra2d.T_list: " + format_double(t) + " is not a whole multiple of integrator_dt");
        }
    }

    if (!r.errors.empty()) throw ConfigError(r.errors);
    return c;
}

JobConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"config: cannot read '" + path + "'"});
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

bath::BathModel make_bath_model(const JobConfig& cfg) {
    const auto thermo = units::beta_from_temperature(cfg.temperature);
    bath::BathModelOptions opts;
    opts.matsubara_count = cfg.hierarchy.matsubara_count;
    opts.convention = cfg.hierarchy.convention;
    return bath::BathModel::build(cfg.ld, cfg.uo, thermo, opts);
}

double resolve_gamma_max(const JobConfig& cfg, const bath::BathModel& model) {
    if (cfg.hierarchy.gamma_max) return *cfg.hierarchy.gamma_max;
    double scale = 0.0;
    for (const auto& m : model.modes())
        if (m.is_undamped()) scale = std::max(scale, std::abs(m.frequency.imag()));
    if (scale == 0.0 && model.ld()) scale = model.ld()->lambda_cutoff;
    return cfg.hierarchy.gamma_max_factor * scale;
}

hierarchy::TruncationRule make_truncation(const JobConfig& cfg, const bath::BathModel& model) {
    hierarchy::TruncationRule rule;
    rule.gamma_max = resolve_gamma_max(cfg, model);
    rule.depth_cap = cfg.hierarchy.depth_cap;
    rule.max_nodes = hierarchy::max_nodes_from_env(cfg.hierarchy.max_nodes);
    return rule;
}

Mat initial_density(InitialState s) {
    Mat rho = Mat::Zero();
    switch (s) {
    case InitialState::Excited: rho(1, 1) = 1.0; break;
    case InitialState::Ground: rho(0, 0) = 1.0; break;
    case InitialState::Superposition: rho.setConstant(0.5); break;
    }
    return rho;
}

Diagnostics validate_config(const std::string& path) {
    Diagnostics d;
    JobConfig cfg;
    try {
        cfg = load_config(path);
    } catch (const ConfigError& e) {
        d.errors = e.problems;
        return d;
    }
    const auto thermo = units::beta_from_temperature(cfg.temperature);
    if (cfg.ld) {
        const double x = thermo.half_reduced(cfg.ld->lambda_cutoff);
        const double s = std::abs(std::sin(x));
        if (s < 1e-12) {
            d.errors.push_back("thermo.temperature: Lambda_LD/(2kT) = " + format_double(x) +
                               " sits on a pole of cot; the Drude coefficient diverges");
        } else if (s < 1e-2) {
            d.warnings.push_back("thermo.temperature: Lambda_LD/(2kT) = " + format_double(x) +
                                 " is close to a pole of cot (|sin| = " + format_double(s) + ")");
        }
    }
    if (!d.errors.empty()) return d;
    try {
        const auto model = make_bath_model(cfg);
        const auto rule = make_truncation(cfg, model);
        const auto space = hierarchy::build(model, rule);
        d.lattice_estimate = space.size();
        const Generator gen(model, space, SystemModel::two_level(cfg.omega_eg),
                            {cfg.integrator.rotating_frame ? cfg.omega_eg : 0.0, cfg.hierarchy.terminator});
        const double z = cfg.integrator.dt * units::kAngularPerWavenumber * gen.max_rate();
        if (z >= 2.8)
            d.errors.push_back("integrator.dt: " + format_double(cfg.integrator.dt) +
                               " fs exceeds the RK4 stability bound for this lattice");
        if (cfg.job == "spectra2d" || cfg.job.empty()) {
            const double zs = cfg.spectra2d.integrator_dt * units::kAngularPerWavenumber *
                              Generator(model, space, SystemModel::two_level(cfg.omega_eg),
                                        {cfg.omega_eg, cfg.hierarchy.terminator})
                                  .max_rate();
            if (zs >= 2.8) d.warnings.push_back("spectra2d.integrator_dt: exceeds the RK4 stability bound");
        }
    } catch (const ResourceError& e) {
        d.errors.push_back(std::string("hierarchy: ") + e.what());
    } catch (const std::exception& e) {
        d.errors.push_back(e.what());
    }
    return d;
}

// ---------------------------------------------------------------------------
// Jobs

namespace {

class Artifacts {
public:
    explicit Artifacts(fs::path dir) : dir_(std::move(dir)) {}

    void write(const std::string& name, const std::string& content) {
        std::ofstream out(dir_ / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
        out << content;
        out.close();
        names_.push_back(name);
    }
    void record(const std::string& name) { names_.push_back(name); }
    [[nodiscard]] const fs::path& dir() const { return dir_; }
    [[nodiscard]] const std::vector<std::string>& names() const { return names_; }

private:
    fs::path dir_;
    std::vector<std::string> names_;
};

std::string matrix_columns(const std::string& prefix) {
    std::string s;
    for (const char* e : {"gg", "eg", "ge", "ee"}) s += "," + std::string("re_") + prefix + e + ",im_" + prefix + e;
    return s;
}

void append_matrix(std::ostringstream& os, const Mat& m) {
    // column-major order matches gg, eg, ge, ee
    for (int k = 0; k < 4; ++k) os << ',' << format_double(m(k % 2, k / 2).real()) << ',' << format_double(m(k % 2, k / 2).imag());
}

// Undo the rotating frame on the coherences.
Mat to_lab(Mat m, double t, double frame) {
    if (frame == 0.0) return m;
    const cd phase = std::exp(cd{0.0, -units::kAngularPerWavenumber * frame * t});
    m(1, 0) *= phase;
    m(0, 1) *= std::conj(phase);
    return m;
}

struct Context {
    const JobConfig& cfg;
    const RunOptions& opts;
    Artifacts& out;
    json& results;
    std::ostream& log;
    std::ostream& err;
};

double frame_of(const JobConfig& cfg) { return cfg.integrator.rotating_frame ? cfg.omega_eg : 0.0; }

ADOState starting_state(const Context& ctx, const Generator& gen, InitialState initial, StartMode start,
                        const std::string& checkpoint) {
    const Mat rho = initial_density(initial);
    if (!checkpoint.empty()) {
        ADOState s = load_checkpoint(checkpoint, gen.model(), gen.space());
        s.set(0, rho);
        s.set_time(0.0);
        return s;
    }
    if (start == StartMode::Factorized) return ADOState::factorized(gen.nodes(), rho);
    auto eq = equilibrate(gen, ctx.cfg.integrator.dt);
    if (!eq.converged)
        ctx.err << "warning: equilibration did not converge (residual " << format_double(eq.residual) << ")\n";
    eq.state.set(0, rho);
    return std::move(eq.state);
}

void write_modes(const Context& ctx, const bath::BathModel& model) {
    std::ostringstream os;
    os << "index,label,origin,matsubara_index,re_coefficient_cm-2,im_coefficient_cm-2,re_frequency_cm-1,im_frequency_cm-1\n";
    for (std::size_t a = 0; a < model.mode_count(); ++a) {
        const auto& m = model.modes()[a];
        os << a << ',' << m.label() << ',' << bath::to_string(m.origin) << ',' << m.matsubara_index << ','
           << format_double(m.coefficient.real()) << ',' << format_double(m.coefficient.imag()) << ','
           << format_double(m.frequency.real()) << ',' << format_double(m.frequency.imag()) << '\n';
    }
    ctx.out.write("modes.csv", os.str());
}

void job_decompose(const Context& ctx, const bath::BathModel& model) {
    write_modes(ctx, model);
    const auto a0 = bath::a0(model);
    ctx.results["a0"] = {a0.real, a0.imag};
    ctx.results["tail"] = model.tail_coefficient();
}

void job_equilibrate(const Context& ctx, const Generator& gen) {
    auto eq = equilibrate(gen, ctx.cfg.integrator.dt);
    if (!eq.converged)
        ctx.err << "warning: equilibration did not converge (residual " << format_double(eq.residual) << ")\n";
    save_checkpoint((ctx.out.dir() / "equilibrium.json").string(), eq.state, gen.model(), gen.space());
    ctx.out.record("equilibrium.json");
    ctx.results["residual"] = eq.residual;
    ctx.results["converged"] = eq.converged;
    ctx.results["elapsed_fs"] = eq.elapsed;
}

void job_dynamics(const Context& ctx, const Generator& gen) {
    const auto& cfg = ctx.cfg;
    ADOState state = starting_state(ctx, gen, cfg.dynamics.initial, cfg.dynamics.start, cfg.dynamics.checkpoint);
    std::ostringstream os;
    os << "t_fs" << matrix_columns("rho_") << ",trace\n";
    const double frame = gen.options().frame_frequency;
    Observer rec = [&](const ADOState& s) {
        const Mat rho = to_lab(s.rho(), s.time(), frame);
        os << format_double(s.time());
        append_matrix(os, rho);
        os << ',' << format_double(rho.trace().real()) << '\n';
    };
    const ADOState end =
        propagate(gen, std::move(state), cfg.integrator.t_final, cfg.integrator.dt, std::span(&rec, 1), cfg.integrator.stride);
    ctx.out.write("dynamics.csv", os.str());
    ctx.results["final_trace"] = {end.rho().trace().real(), end.rho().trace().imag()};
}

// One bath-coordinate run: moments per order for the listed projections.
struct MomentRun {
    std::map<std::pair<observables::Projection, int>, observables::MomentSeries> series;
    std::size_t lattice_size{0};
};

MomentRun run_moments(const Context& ctx, const bath::BathModel& model, const hierarchy::TruncationRule& rule,
                      const std::vector<observables::Projection>& projections) {
    const auto& cfg = ctx.cfg;
    const auto space = hierarchy::build(model, rule);
    const Generator gen(model, space, SystemModel::two_level(cfg.omega_eg), {frame_of(cfg), cfg.hierarchy.terminator});
    ADOState state = starting_state(ctx, gen, cfg.bathcoords.initial, cfg.bathcoords.start, "");

    struct Slot {
        observables::Projection p;
        std::vector<bool> mask;
        cd a0;
    };
    std::vector<Slot> slots;
    for (auto p : projections) {
        const auto axes = observables::projection_axes(model, p);
        slots.push_back({p, hierarchy::project_mask(space, axes), observables::projected_a0(model, axes)});
    }

    MomentRun run;
    run.lattice_size = space.size();
    const double frame = gen.options().frame_frequency;
    Observer rec = [&](const ADOState& s) {
        for (const auto& slot : slots) {
            for (int order : cfg.bathcoords.orders) {
                auto& ser = run.series[{slot.p, order}];
                ser.times.push_back(s.time());
                const Mat x = order == 1   ? observables::moment1(space, s, slot.mask)
                              : order == 2 ? observables::moment2(space, s, slot.mask, slot.a0)
                                           : observables::moment_n(space, s, slot.mask, slot.a0, order);
                ser.values.push_back(to_lab(x, s.time(), frame));
            }
        }
    };
    propagate(gen, std::move(state), cfg.integrator.t_final, cfg.integrator.dt, std::span(&rec, 1),
              cfg.integrator.stride);
    return run;
}

std::string series_csv(const observables::MomentSeries& s) {
    std::ostringstream os;
    os << "t_fs" << matrix_columns("X_") << '\n';
    for (std::size_t k = 0; k < s.times.size(); ++k) {
        os << format_double(s.times[k]);
        append_matrix(os, s.values[k]);
        os << '\n';
    }
    return os.str();
}

void job_bathcoords(const Context& ctx, const bath::BathModel& model, const hierarchy::TruncationRule& rule) {
    using observables::Projection;
    const auto& cfg = ctx.cfg;
    const bool both = model.ld() && model.uo();

    if (!both) {
        const std::string name = model.uo() ? "uo" : "ld";
        const auto run = run_moments(ctx, model, rule, {Projection::Full});
        for (int order : cfg.bathcoords.orders)
            ctx.out.write("bathcoords_" + name + "_" + std::to_string(order) + ".csv",
                          series_csv(run.series.at({Projection::Full, order})));
        ctx.err << "note: single-bath config; residual series need both baths and were skipped\n";
        return;
    }

    auto protocol = [&](const hierarchy::TruncationRule& r) {
        std::array<MomentRun, 3> runs{run_moments(ctx, model, r, {Projection::Full, Projection::UoOnly, Projection::LdOnly}),
                                      run_moments(ctx, model.ld_only(), r, {Projection::Full}),
                                      run_moments(ctx, model.uo_only(), r, {Projection::Full})};
        return runs;
    };
    const auto runs = protocol(rule);
    std::array<MomentRun, 3> deeper;
    if (cfg.bathcoords.noise_floor) {
        auto r2 = rule;
        r2.depth_cap += 2;
        deeper = protocol(r2);
    }

    json summary = json::object();
    for (int order : cfg.bathcoords.orders) {
        const auto& full = runs[0].series.at({Projection::Full, order});
        const auto& ld = runs[1].series.at({Projection::Full, order});
        const auto& uo = runs[2].series.at({Projection::Full, order});
        const std::string o = std::to_string(order);
        ctx.out.write("bathcoords_full_" + o + ".csv", series_csv(full));
        ctx.out.write("bathcoords_full_uo_" + o + ".csv", series_csv(runs[0].series.at({Projection::UoOnly, order})));
        ctx.out.write("bathcoords_full_ld_" + o + ".csv", series_csv(runs[0].series.at({Projection::LdOnly, order})));
        ctx.out.write("bathcoords_ld_" + o + ".csv", series_csv(ld));
        ctx.out.write("bathcoords_uo_" + o + ".csv", series_csv(uo));

        const auto res = observables::residual(full, ld, uo);
        ctx.out.write("residual_" + o + ".csv", series_csv(res.series));
        json entry{{"sup_norm", res.sup_norm}, {"integrated_norm", res.integrated_norm}};
        if (cfg.bathcoords.noise_floor) {
            const auto res2 = observables::residual(deeper[0].series.at({Projection::Full, order}),
                                                    deeper[1].series.at({Projection::Full, order}),
                                                    deeper[2].series.at({Projection::Full, order}));
            double floor = 0.0;
            for (std::size_t k = 0; k < res.series.values.size(); ++k)
                floor = std::max(floor, observables::max_abs(res.series.values[k] - res2.series.values[k]));
            entry["noise_floor"] = floor;
        }
        summary[o] = entry;
    }
    ctx.results["residual"] = summary;
    ctx.results["lattice_sizes"] = {{"full", runs[0].lattice_size}, {"ld", runs[1].lattice_size},
                                    {"uo", runs[2].lattice_size}};
}

void job_spectra2d(const Context& ctx, const Generator& gen) {
    const auto& s = ctx.cfg.spectra2d;
    auto eq = equilibrate(gen, s.integrator_dt);
    if (!eq.converged)
        ctx.err << "warning: equilibration did not converge (residual " << format_double(eq.residual) << ")\n";

    spectroscopy::ResponseSpec rs;
    rs.n1 = s.n1;
    rs.n3 = s.n3;
    rs.dt1 = s.dt1;
    rs.dt3 = s.dt3;
    rs.integrator_dt = s.integrator_dt;
    rs.threads = ctx.opts.threads;
    spectroscopy::SpectrumOptions so;
    so.phase_flip_sign = s.phase_flip_sign;
    so.rephasing_only = s.rephasing_only;
    so.hann_window = s.window;
    so.zero_pad = s.zero_pad;

    json axes;
    json files = json::array();
    json peaks = json::object();
    for (double T : s.waiting_times) {
        rs.waiting_time = T;
        const auto resp = spectroscopy::response3(gen, eq.state, rs);
        const auto spec = spectroscopy::spectrum2d(resp, so);
        const std::string tag = format_double(T);

        std::ostringstream os;
        os << "omega_tau_cm-1\\omega_t_cm-1";
        for (double w : spec.omega_t) os << ',' << format_double(w);
        os << '\n';
        for (std::size_t i = 0; i < spec.omega_tau.size(); ++i) {
            os << format_double(spec.omega_tau[i]);
            for (std::size_t j = 0; j < spec.omega_t.size(); ++j) os << ',' << format_double(spec.at(i, j));
            os << '\n';
        }
        const std::string name = "spectrum_T" + tag + ".csv";
        ctx.out.write(name, os.str());
        files.push_back(name);

        if (s.dump_response) {
            std::ostringstream r;
            r << "t1_fs,t3_fs,re_rephasing,im_rephasing,re_nonrephasing,im_nonrephasing\n";
            for (std::size_t i = 0; i < resp.n1; ++i)
                for (std::size_t j = 0; j < resp.n3; ++j)
                    r << format_double(static_cast<double>(i) * resp.dt1) << ','
                      << format_double(static_cast<double>(j) * resp.dt3) << ','
                      << format_double(resp.rephasing_at(i, j).real()) << ','
                      << format_double(resp.rephasing_at(i, j).imag()) << ','
                      << format_double(resp.nonrephasing_at(i, j).real()) << ','
                      << format_double(resp.nonrephasing_at(i, j).imag()) << '\n';
            ctx.out.write("response_T" + tag + ".csv", r.str());
        }

        const auto peak = spectroscopy::analyze_peak(spec, ctx.cfg.omega_eg, ctx.cfg.omega_eg, 400.0);
        peaks[tag] = {{"omega_tau", peak.omega_tau},          {"omega_t", peak.omega_t},
                      {"amplitude", peak.amplitude},          {"diagonal_fwhm", peak.diagonal_fwhm},
                      {"antidiagonal_fwhm", peak.antidiagonal_fwhm}, {"width_ratio", peak.width_ratio()}};
        if (axes.is_null()) {
            axes["omega_tau_cm-1"] = spec.omega_tau;
            axes["omega_t_cm-1"] = spec.omega_t;
        }
        ctx.log << "T = " << tag << " fs done\n";
    }
    axes["frame_frequency_cm-1"] = gen.options().frame_frequency;
    axes["bin_width_tau_cm-1"] = spectroscopy::fft_bin_width(s.n1, s.dt1);
    axes["bin_width_t_cm-1"] = spectroscopy::fft_bin_width(s.n3, s.dt3);
    axes["waiting_times_fs"] = s.waiting_times;
    axes["files"] = files;
    axes["layout"] = "rows = omega_tau, columns = omega_t";
    ctx.out.write("axes.json", axes.dump(2) + "\n");
    ctx.results["peaks"] = peaks;
}

json mode_table(const bath::BathModel& model) {
    json modes = json::array();
    for (const auto& m : model.modes())
        modes.push_back({{"label", m.label()},
                         {"coefficient", {m.coefficient.real(), m.coefficient.imag()}},
                         {"frequency", {m.frequency.real(), m.frequency.imag()}}});
    return modes;
}

int run_validate(const RunOptions& options, std::ostream& log, std::ostream& err) {
    const auto d = validate_config(options.config_path);
    for (const auto& w : d.warnings) err << "warning: " << w << '\n';
    for (const auto& e : d.errors) err << "error: " << e << '\n';
    if (!d.errors.empty()) return kExitValidation;
    log << "valid\n";
    if (d.lattice_estimate) log << "lattice estimate: " << *d.lattice_estimate << " nodes\n";
    return kExitOk;
}

} // namespace

int run(const RunOptions& options, std::ostream& log, std::ostream& err) {
    const auto& names = subcommands();
    if (std::find(names.begin(), names.end(), options.subcommand) == names.end()) {
        err << "error: unknown subcommand '" << options.subcommand << "'\n";
        return kExitValidation;
    }
    if (options.subcommand == "validate") return run_validate(options, log, err);

    const auto started = std::chrono::steady_clock::now();
    JobConfig cfg;
    try {
        cfg = load_config(options.config_path);
        if (!cfg.job.empty() && cfg.job != options.subcommand)
            throw ConfigError({"config.job: '" + cfg.job + "' does not match subcommand '" + options.subcommand + "'"});
        if (options.out_dir.empty()) throw ConfigError({"--out: an output directory is required"});
    } catch (const ConfigError& e) {
        for (const auto& p : e.problems) err << "error: " << p << '\n';
        return kExitValidation;
    }

    try {
        const auto model = make_bath_model(cfg);
        const auto rule = make_truncation(cfg, model);
        const auto space = hierarchy::build(model, rule);
        const Generator gen(model, space, SystemModel::two_level(cfg.omega_eg),
                            {frame_of(cfg), cfg.hierarchy.terminator});

        fs::create_directories(options.out_dir);
        Artifacts out(options.out_dir);
        json results = json::object();
        Context ctx{cfg, options, out, results, log, err};

        if (options.dump_lattice) {
            std::ostringstream os;
            hierarchy::dump_jsonl(space, os);
            out.write("lattice.jsonl", os.str());
        }

        const auto& sub = options.subcommand;
        if (sub == "decompose") job_decompose(ctx, model);
        else if (sub == "equilibrate") job_equilibrate(ctx, gen);
        else if (sub == "dynamics") job_dynamics(ctx, gen);
        else if (sub == "bathcoords") job_bathcoords(ctx, model, rule);
        else if (sub == "spectra2d") job_spectra2d(ctx, gen);

        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        json manifest;
        manifest["tool"] = "lduo";
        manifest["version"] = LDUO_VERSION;
        manifest["subcommand"] = sub;
        manifest["config_path"] = options.config_path;
        manifest["config_sha256"] = sha256_file(options.config_path);
        manifest["temperature_K"] = cfg.temperature;
        manifest["matsubara_count"] = model.matsubara_count();
        manifest["tail_cm-1"] = model.tail_coefficient();
        manifest["modes"] = mode_table(model);
        manifest["gamma_max_cm-1"] = rule.gamma_max;
        manifest["depth_cap"] = rule.depth_cap;
        manifest["lattice_size"] = space.size();
        manifest["wall_time_s"] = wall;
        manifest["results"] = results;
        json files = json::object();
        for (const auto& name : out.names()) files[name] = sha256_file((out.dir() / name).string());
        manifest["files"] = files;
        std::ofstream mf(out.dir() / "manifest.json");
        mf << manifest.dump(2) << '\n';
        log << sub << ": wrote " << out.names().size() << " artifacts to " << options.out_dir << '\n';
        return kExitOk;
    } catch (const BlowUpError& e) {
        err << "error: numerical blow-up: " << e.what() << '\n';
        return kExitBlowUp;
    } catch (const ConfigError& e) {
        for (const auto& p : e.problems) err << "error: " << p << '\n';
        return kExitValidation;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const ResourceError& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

} // namespace lduo::cli
