// hierarchy.hpp - Frequency-truncated lattice of auxiliary density operators
//
// A node is a multi-index n (one non-negative entry per bath mode). It is
// retained when its frequency weight
//
//     w(n) = sum_a n_a * r_a,   r_a = Re(nu_a) for damped modes, |Im(nu_a)| for UO modes
//
// is at most gamma_max and its tier sum_a n_a is at most depth_cap. The
// retained set is closed downward, so every lowering of a retained node is
// retained as well.
//
// Storage is ordered by tier; inside a tier, indices are sorted in descending
// lexicographic order, which puts the unit vector e_a of axis a at position
// 1 + a. Raise and lower neighbours are tabulated per node and axis.

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace lduo::bath {
class BathModel;
}

namespace lduo::hierarchy {

struct MultiIndex {
    std::vector<int> entries;

    [[nodiscard]] std::size_t axes() const noexcept { return entries.size(); }
    [[nodiscard]] int tier() const noexcept;
    auto operator<=>(const MultiIndex&) const = default;
};

MultiIndex zero_index(std::size_t axes);
MultiIndex raise(const MultiIndex& n, std::size_t axis);
// Throws ContractError when the entry is already zero.
MultiIndex lower(const MultiIndex& n, std::size_t axis);
int tier_of(const MultiIndex& n);

inline constexpr std::size_t kDefaultMaxNodes = 2'000'000;

struct TruncationRule {
    double gamma_max{std::numeric_limits<double>::infinity()}; // cm^-1
    int depth_cap{12};
    std::size_t max_nodes{kDefaultMaxNodes};

    void validate() const;
};

// LDUO_MAX_NODES from the environment, or fallback when unset or unparsable.
std::size_t max_nodes_from_env(std::size_t fallback = kDefaultMaxNodes);

// Per-axis admission weights r_a for a bath model.
std::vector<double> admission_weights(const bath::BathModel& model);

class HierarchySpace {
public:
    static constexpr std::int32_t kNone = -1;

    [[nodiscard]] std::size_t size() const noexcept { return tiers_.size(); }
    [[nodiscard]] std::size_t axes() const noexcept { return axis_weights_.size(); }
    [[nodiscard]] const std::vector<double>& axis_weights() const noexcept { return axis_weights_; }
    [[nodiscard]] const TruncationRule& rule() const noexcept { return rule_; }

    [[nodiscard]] MultiIndex index(std::size_t pos) const;
    [[nodiscard]] int entry(std::size_t pos, std::size_t axis) const noexcept {
        return entries_[pos * axes() + axis];
    }
    [[nodiscard]] int tier(std::size_t pos) const noexcept { return tiers_[pos]; }
    [[nodiscard]] double weight(std::size_t pos) const noexcept;
    [[nodiscard]] std::optional<std::size_t> find(const MultiIndex& n) const;

    // Position of n + e_axis / n - e_axis, or kNone.
    [[nodiscard]] std::int32_t raised(std::size_t pos, std::size_t axis) const noexcept {
        return up_[pos * axes() + axis];
    }
    [[nodiscard]] std::int32_t lowered(std::size_t pos, std::size_t axis) const noexcept {
        return down_[pos * axes() + axis];
    }

    // No retained raise along any axis.
    [[nodiscard]] bool is_boundary(std::size_t pos) const noexcept;

    [[nodiscard]] int max_tier() const noexcept { return static_cast<int>(tier_offsets_.size()) - 2; }
    // Nodes of tier t occupy [tier_begin(t), tier_end(t)).
    [[nodiscard]] std::size_t tier_begin(int t) const;
    [[nodiscard]] std::size_t tier_end(int t) const;

    // Digest of axis weights, rule and node count.
    [[nodiscard]] std::string fingerprint() const;

    friend HierarchySpace build(const std::vector<double>& axis_weights, const TruncationRule& rule);

private:
    std::vector<double> axis_weights_;
    TruncationRule rule_;
    std::vector<std::uint16_t> entries_; // size() * axes()
    std::vector<int> tiers_;
    std::vector<std::size_t> tier_offsets_;
    std::vector<std::int32_t> up_;
    std::vector<std::int32_t> down_;
};

// Breadth-first enumeration. Throws ResourceError when the node count would
// exceed rule.max_nodes.
HierarchySpace build(const std::vector<double>& axis_weights, const TruncationRule& rule);
HierarchySpace build(const bath::BathModel& model, const TruncationRule& rule);

// mask[i] is true when node i is excited only along the given axes
// (the root is always included). Throws DomainError for an unknown axis.
std::vector<bool> project_mask(const HierarchySpace& space, const std::vector<std::size_t>& axes);

// One JSON object per line:
// {"pos":..,"index":[..],"tier":..,"weight":..,"boundary":..,"up":[..],"down":[..]}
// with -1 for a neighbour outside the lattice.
void dump_jsonl(const HierarchySpace& space, std::ostream& out);

} // namespace lduo::hierarchy
