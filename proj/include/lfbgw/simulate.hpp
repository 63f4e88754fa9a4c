#ifndef LFBGW_SIMULATE_HPP
#define LFBGW_SIMULATE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lfbgw/model.hpp"
#include "lfbgw/rng.hpp"
#include "lfbgw/spectral.hpp"
#include "lfbgw/transforms.hpp"

namespace lfbgw {

struct OffspringSample {
    Eigen::VectorXi counts;  // by type
    bool has_split = false;  // skeleton/doomed subtype split present
    Eigen::VectorXi skeleton_counts;
    Eigen::VectorXi doomed_counts;
};

// One exact draw from the law with PGF f_i. The geometric extra count is
// sampled by inverse CDF for cross-platform reproducibility.
OffspringSample sample_offspring(const LFModel& model, int i, RngStream& rng);

// One exact draw from the Theorem-style joint skeleton law, with the
// skeleton/doomed split recorded.
OffspringSample sample_skeleton_offspring(const SkeletonLaw& law, int i,
                                          RngStream& rng);

inline constexpr std::int64_t kDefaultPopulationCap = 10'000'000;

// Generation counts Z^(0)..Z^(n) starting from init. Aborts with
// PopulationOverflow when a generation would exceed cap particles.
std::vector<Eigen::VectorX<std::int64_t>> simulate_generations(
    const LFModel& model, const Eigen::VectorX<std::int64_t>& init, int n,
    RngStream& rng, std::int64_t cap = kDefaultPopulationCap);

struct TreeNode {
    std::int32_t parent = -1;  // -1 for the root
    std::int32_t type = 0;     // 0-based
    std::int32_t generation = 0;
    bool skeleton = false;
};

struct GenealogyTree {
    std::vector<TreeNode> nodes;  // node id = index, BFS order
    int horizon = 0;

    // (skeleton, doomed) totals for one generation.
    std::pair<std::int64_t, std::int64_t> generation_split(int gen) const;
};

// Simulates to generation `horizon` and labels nodes exactly: a
// horizon-generation leaf of type j is skeleton with probability 1-q_j
// (independently; survival of each horizon lineage depends only on its
// type), an internal node is skeleton iff some child is, and lineages
// extinct before the horizon are doomed. Node k draws from rng.substream(k).
GenealogyTree simulate_tree_labeled(const LFModel& model,
                                    const SpectralSummary& sum, int root_type,
                                    int horizon, const RngStream& rng,
                                    std::int64_t cap = kDefaultPopulationCap);

// GraphViz export, solid edges into skeleton nodes and dotted edges into
// doomed ones.
std::string tree_to_dot(const GenealogyTree& tree);

// Mean of s^counts over the samples with its CLT standard error.
std::pair<double, double> empirical_pgf(std::span<const OffspringSample> samples,
                                        const Eigen::VectorXd& s);

struct SimStats {
    std::int64_t n_samples = 0;
    Eigen::VectorXd mean_counts;  // per type
    Eigen::VectorXd se_counts;
    std::vector<double> pgf_values;  // per probe point
    std::vector<double> pgf_se;
};

SimStats collect_stats(std::span<const OffspringSample> samples,
                       const std::vector<Eigen::VectorXd>& probes, int n_types);

}  // namespace lfbgw

#endif
