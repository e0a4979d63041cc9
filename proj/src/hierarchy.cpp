#include "lduo/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "lduo/bath.hpp"
#include "lduo/errors.hpp"
#include "lduo/numfmt.hpp"

namespace lduo::hierarchy {

namespace {

using Row = std::vector<std::uint16_t>;

std::string key_of(const std::uint16_t* p, std::size_t d) {
    return std::string(reinterpret_cast<const char*>(p), d * sizeof(std::uint16_t));
}

} // namespace

int MultiIndex::tier() const noexcept { return std::accumulate(entries.begin(), entries.end(), 0); }

MultiIndex zero_index(std::size_t axes) { return MultiIndex{std::vector<int>(axes, 0)}; }

MultiIndex raise(const MultiIndex& n, std::size_t axis) {
    if (axis >= n.axes()) throw ContractError("raise: axis out of range");
    MultiIndex r = n;
    ++r.entries[axis];
    return r;
}

MultiIndex lower(const MultiIndex& n, std::size_t axis) {
    if (axis >= n.axes()) throw ContractError("lower: axis out of range");
    if (n.entries[axis] <= 0) throw ContractError("lower: entry already zero");
    MultiIndex r = n;
    --r.entries[axis];
    return r;
}

int tier_of(const MultiIndex& n) { return n.tier(); }

void TruncationRule::validate() const {
    if (std::isnan(gamma_max) || !(gamma_max > 0.0))
        throw DomainError("TruncationRule: gamma_max must be positive");
    if (depth_cap < 1) throw DomainError("TruncationRule: depth_cap must be >= 1");
    if (max_nodes == 0) throw DomainError("TruncationRule: max_nodes must be >= 1");
}

std::size_t max_nodes_from_env(std::size_t fallback) {
    const char* v = std::getenv("LDUO_MAX_NODES");
    if (!v || !*v) return fallback;
    char* end = nullptr;
    const unsigned long long n = std::strtoull(v, &end, 10);
    if (*end != '\0' || n == 0) return fallback;
    return static_cast<std::size_t>(n);
}

std::vector<double> admission_weights(const bath::BathModel& model) {
    std::vector<double> w;
    w.reserve(model.mode_count());
    for (const auto& m : model.modes())
        w.push_back(m.is_undamped() ? std::abs(m.frequency.imag()) : m.frequency.real());
    return w;
}

MultiIndex HierarchySpace::index(std::size_t pos) const {
    if (pos >= size()) throw ContractError("HierarchySpace::index: position out of range");
    MultiIndex n;
    n.entries.assign(entries_.begin() + static_cast<std::ptrdiff_t>(pos * axes()),
                     entries_.begin() + static_cast<std::ptrdiff_t>((pos + 1) * axes()));
    return n;
}

double HierarchySpace::weight(std::size_t pos) const noexcept {
    double w = 0.0;
    for (std::size_t a = 0; a < axes(); ++a) w += entry(pos, a) * axis_weights_[a];
    return w;
}

std::optional<std::size_t> HierarchySpace::find(const MultiIndex& n) const {
    if (n.axes() != axes()) return std::nullopt;
    for (int v : n.entries)
        if (v < 0) return std::nullopt;
    // Walk down from the root along each axis; every prefix of a retained node is retained.
    std::size_t pos = 0;
    for (std::size_t a = 0; a < axes(); ++a) {
        for (int k = 0; k < n.entries[a]; ++k) {
            const auto next = raised(pos, a);
            if (next == kNone) return std::nullopt;
            pos = static_cast<std::size_t>(next);
        }
    }
    return pos;
}

bool HierarchySpace::is_boundary(std::size_t pos) const noexcept {
    for (std::size_t a = 0; a < axes(); ++a)
        if (raised(pos, a) != kNone) return false;
    return true;
}

std::size_t HierarchySpace::tier_begin(int t) const {
    if (t < 0 || t > max_tier()) throw ContractError("tier_begin: tier out of range");
    return tier_offsets_[static_cast<std::size_t>(t)];
}

std::size_t HierarchySpace::tier_end(int t) const {
    if (t < 0 || t > max_tier()) throw ContractError("tier_end: tier out of range");
    return tier_offsets_[static_cast<std::size_t>(t) + 1];
}

std::string HierarchySpace::fingerprint() const {
    std::ostringstream os;
    os << "axes=" << axes() << ";gamma=" << format_double(rule_.gamma_max) << ";depth=" << rule_.depth_cap
       << ";nodes=" << size() << ";w=";
    for (double w : axis_weights_) os << format_double(w) << ',';
    return os.str();
}

HierarchySpace build(const std::vector<double>& axis_weights, const TruncationRule& rule) {
    rule.validate();
    for (double w : axis_weights) {
        if (!std::isfinite(w) || !(w > 0.0))
            throw DomainError("hierarchy::build: axis weights must be positive and finite");
    }
    const std::size_t d = axis_weights.size();
    const double limit = rule.gamma_max * (1.0 + 1e-12) + 1e-12;

    HierarchySpace s;
    s.axis_weights_ = axis_weights;
    s.rule_ = rule;

    std::vector<Row> tier_rows{Row(d, 0)};
    std::vector<double> tier_w{0.0};
    s.tier_offsets_.push_back(0);
    std::size_t total = 0;

    for (int t = 0;; ++t) {
        std::vector<std::size_t> order(tier_rows.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return tier_rows[a] > tier_rows[b]; });
        total += tier_rows.size();
        if (total > rule.max_nodes) {
            throw ResourceError("hierarchy::build: more than max_nodes=" + std::to_string(rule.max_nodes) +
                                " nodes (gamma_max=" + format_double(rule.gamma_max) +
                                ", depth_cap=" + std::to_string(rule.depth_cap) + ")");
        }
        for (std::size_t i : order) {
            s.entries_.insert(s.entries_.end(), tier_rows[i].begin(), tier_rows[i].end());
            s.tiers_.push_back(t);
        }
        s.tier_offsets_.push_back(total);
        if (t == rule.depth_cap) break;

        // Each child is generated once, from the parent that loses one quantum
        // on the child's last non-zero axis.
        std::vector<Row> next;
        std::vector<double> next_w;
        for (std::size_t i = 0; i < tier_rows.size(); ++i) {
            const Row& row = tier_rows[i];
            std::size_t first = 0;
            for (std::size_t a = d; a-- > 0;) {
                if (row[a] != 0) {
                    first = a;
                    break;
                }
            }
            for (std::size_t a = first; a < d; ++a) {
                const double w = tier_w[i] + axis_weights[a];
                if (w > limit) continue;
                if (row[a] == UINT16_MAX) throw ResourceError("hierarchy::build: index entry overflow");
                Row child = row;
                ++child[a];
                next.push_back(std::move(child));
                next_w.push_back(w);
            }
        }
        if (next.empty()) break;
        tier_rows = std::move(next);
        tier_w = std::move(next_w);
    }

    const std::size_t n = s.tiers_.size();
    std::unordered_map<std::string, std::int32_t> lookup;
    lookup.reserve(n * 2);
    for (std::size_t p = 0; p < n; ++p) lookup.emplace(key_of(&s.entries_[p * d], d), static_cast<std::int32_t>(p));

    s.up_.assign(n * d, HierarchySpace::kNone);
    s.down_.assign(n * d, HierarchySpace::kNone);
    Row scratch(d);
    for (std::size_t p = 0; p < n; ++p) {
        std::copy_n(&s.entries_[p * d], d, scratch.begin());
        for (std::size_t a = 0; a < d; ++a) {
            if (scratch[a] == 0) continue;
            --scratch[a];
            const auto it = lookup.find(key_of(scratch.data(), d));
            ++scratch[a];
            if (it == lookup.end()) throw ContractError("hierarchy::build: retained set is not closed downward");
            s.down_[p * d + a] = it->second;
            s.up_[static_cast<std::size_t>(it->second) * d + a] = static_cast<std::int32_t>(p);
        }
    }
    return s;
}

HierarchySpace build(const bath::BathModel& model, const TruncationRule& rule) {
    return build(admission_weights(model), rule);
}

std::vector<bool> project_mask(const HierarchySpace& space, const std::vector<std::size_t>& axes) {
    std::vector<bool> allowed(space.axes(), false);
    for (std::size_t a : axes) {
        if (a >= space.axes()) throw DomainError("project_mask: unknown axis " + std::to_string(a));
        allowed[a] = true;
    }
    std::vector<bool> mask(space.size(), true);
    for (std::size_t p = 0; p < space.size(); ++p) {
        for (std::size_t a = 0; a < space.axes(); ++a) {
            if (!allowed[a] && space.entry(p, a) != 0) {
                mask[p] = false;
                break;
            }
        }
    }
    return mask;
}

void dump_jsonl(const HierarchySpace& space, std::ostream& out) {
    for (std::size_t p = 0; p < space.size(); ++p) {
        out << "{\"pos\":" << p << ",\"index\":[";
        for (std::size_t a = 0; a < space.axes(); ++a) out << (a ? "," : "") << space.entry(p, a);
        out << "],\"tier\":" << space.tier(p) << ",\"weight\":" << format_double(space.weight(p))
            << ",\"boundary\":" << (space.is_boundary(p) ? "true" : "false") << ",\"up\":[";
        for (std::size_t a = 0; a < space.axes(); ++a) out << (a ? "," : "") << space.raised(p, a);
        out << "],\"down\":[";
        for (std::size_t a = 0; a < space.axes(); ++a) out << (a ? "," : "") << space.lowered(p, a);
        out << "]}\n";
    }
}

} // namespace lduo::hierarchy
