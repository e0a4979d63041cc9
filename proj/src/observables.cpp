#include "lduo/observables.hpp"

#include <algorithm>
#include <cmath>

#include "lduo/errors.hpp"

namespace lduo::observables {

namespace {

using Mat = Eigen::Matrix2cd;

void check_state(const hierarchy::HierarchySpace& space, const ADOState& state, const std::vector<bool>& mask) {
    if (state.nodes() != space.size()) throw ContractError("moment: state does not match the hierarchy");
    if (mask.size() != space.size()) throw ContractError("moment: mask does not match the hierarchy");
}

void check_depth(const hierarchy::HierarchySpace& space, int order) {
    if (order < 1) throw ContractError("moment: order must be >= 1");
    if (space.rule().depth_cap < order)
        throw ContractError("moment: hierarchy depth " + std::to_string(space.rule().depth_cap) +
                            " is below the requested order " + std::to_string(order));
}

// i! / prod_a n_a! for node p.
double multinomial(const hierarchy::HierarchySpace& space, std::size_t p) {
    double num = 1.0;
    int count = 0;
    for (std::size_t a = 0; a < space.axes(); ++a) {
        for (int k = 1; k <= space.entry(p, a); ++k) {
            ++count;
            num *= static_cast<double>(count) / k;
        }
    }
    return num;
}

std::vector<bool> mask_for(const hierarchy::HierarchySpace& space, const bath::BathModel& model, Projection p) {
    if (space.axes() != model.mode_count()) throw ContractError("moment: model does not match the hierarchy");
    return hierarchy::project_mask(space, projection_axes(model, p));
}

} // namespace

std::string to_string(Projection p) {
    switch (p) {
    case Projection::Full: return "full";
    case Projection::UoOnly: return "uo";
    case Projection::LdOnly: return "ld";
    }
    return "unknown";
}

std::vector<std::size_t> projection_axes(const bath::BathModel& model, Projection p) {
    std::vector<std::size_t> axes;
    for (std::size_t a = 0; a < model.mode_count(); ++a) {
        const bool uo = model.modes()[a].is_undamped();
        if (p == Projection::Full || (p == Projection::UoOnly && uo) || (p == Projection::LdOnly && !uo))
            axes.push_back(a);
    }
    return axes;
}

cd projected_a0(const bath::BathModel& model, const std::vector<std::size_t>& axes) {
    cd sum{0.0, 0.0};
    for (std::size_t a : axes) sum += model.modes().at(a).coefficient;
    return sum;
}

std::vector<std::vector<cd>> moment_table(int order, cd a0) {
    if (order < 0) throw ContractError("moment_table: order must be >= 0");
    std::vector<std::vector<cd>> t(static_cast<std::size_t>(order) + 1);
    for (int n = 0; n <= order; ++n) t[static_cast<std::size_t>(n)].assign(static_cast<std::size_t>(n) + 1, cd{});
    t[0][0] = 1.0;
    auto at = [&](int n, int i) -> cd {
        if (n < 0 || i < 0 || i > n) return cd{};
        return t[static_cast<std::size_t>(n)][static_cast<std::size_t>(i)];
    };
    for (int n = 0; n < order; ++n) {
        for (int i = 0; i <= n + 1; ++i)
            t[static_cast<std::size_t>(n) + 1][static_cast<std::size_t>(i)] =
                -at(n, i - 1) + static_cast<double>(n) * a0 * at(n - 1, i);
    }
    return t;
}

Mat moment1(const hierarchy::HierarchySpace& space, const ADOState& state, const std::vector<bool>& mask) {
    check_state(space, state, mask);
    check_depth(space, 1);
    Mat sum = Mat::Zero();
    if (space.max_tier() < 1) return sum;
    for (std::size_t p = space.tier_begin(1); p < space.tier_end(1); ++p)
        if (mask[p]) sum -= state.matrix(p);
    return sum;
}

Mat moment2(const hierarchy::HierarchySpace& space, const ADOState& state, const std::vector<bool>& mask, cd a0) {
    check_state(space, state, mask);
    check_depth(space, 2);
    Mat sum = mask[0] ? Mat(a0 * state.matrix(0)) : Mat(Mat::Zero());
    if (space.max_tier() < 2) return sum;
    for (std::size_t p = space.tier_begin(2); p < space.tier_end(2); ++p) {
        if (!mask[p]) continue;
        bool doubled = false;
        for (std::size_t a = 0; a < space.axes(); ++a) doubled = doubled || space.entry(p, a) == 2;
        sum += (doubled ? 1.0 : 2.0) * state.matrix(p);
    }
    return sum;
}

Mat moment_n(const hierarchy::HierarchySpace& space, const ADOState& state, const std::vector<bool>& mask, cd a0,
             int order) {
    check_state(space, state, mask);
    check_depth(space, order);
    const auto table = moment_table(order, a0);
    const auto& l = table[static_cast<std::size_t>(order)];
    Mat sum = Mat::Zero();
    for (int i = 0; i <= std::min(order, space.max_tier()); ++i) {
        const cd coeff = l[static_cast<std::size_t>(i)];
        if (coeff == cd{}) continue;
        Mat tier_sum = Mat::Zero();
        for (std::size_t p = space.tier_begin(i); p < space.tier_end(i); ++p)
            if (mask[p]) tier_sum += multinomial(space, p) * state.matrix(p);
        sum += coeff * tier_sum;
    }
    return sum;
}

BathMoment moment1(const hierarchy::HierarchySpace& space, const ADOState& state, const bath::BathModel& model,
                   Projection p) {
    return {1, moment1(space, state, mask_for(space, model, p)), p, state.time()};
}

BathMoment moment2(const hierarchy::HierarchySpace& space, const ADOState& state, const bath::BathModel& model,
                   Projection p) {
    const cd a0 = projected_a0(model, projection_axes(model, p));
    return {2, moment2(space, state, mask_for(space, model, p), a0), p, state.time()};
}

BathMoment moment_n(const hierarchy::HierarchySpace& space, const ADOState& state, const bath::BathModel& model,
                    int order, Projection p) {
    const cd a0 = projected_a0(model, projection_axes(model, p));
    return {order, moment_n(space, state, mask_for(space, model, p), a0, order), p, state.time()};
}

double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

Residual residual(const MomentSeries& full, const MomentSeries& ld, const MomentSeries& uo) {
    const std::size_t n = full.times.size();
    auto same_grid = [&](const MomentSeries& s) {
        if (s.times.size() != n || s.values.size() != n) return false;
        for (std::size_t k = 0; k < n; ++k)
            if (std::abs(s.times[k] - full.times[k]) > 1e-9 * std::max(1.0, std::abs(full.times[k]))) return false;
        return true;
    };
    if (full.values.size() != n || !same_grid(ld) || !same_grid(uo))
        throw ContractError("residual: runs do not share a time grid");

    Residual r{{full.times, {}}, 0.0, 0.0};
    r.series.values.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        r.series.values.push_back(full.values[k] - ld.values[k] - uo.values[k]);
        const double m = max_abs(r.series.values.back());
        r.sup_norm = std::max(r.sup_norm, m);
        if (k > 0) {
            const double prev = max_abs(r.series.values[k - 1]);
            r.integrated_norm += 0.5 * (m + prev) * (full.times[k] - full.times[k - 1]);
        }
    }
    return r;
}

} // namespace lduo::observables
