#include "lfbgw/simulate.hpp"

#include <cmath>
#include <sstream>

namespace lfbgw {

namespace {

// Inverse-CDF geometric draw with P(K = j) = (1/(1+m)) (m/(1+m))^j.
int geometric_extras(double m, RngStream& rng) {
    if (m <= 0.0) return 0;
    const double log_r = std::log(m / (1.0 + m));  // < 0
    const double u = rng.next_unit();
    const double k = std::floor(std::log(u) / log_r);
    return k > 1e9 ? 1000000000 : static_cast<int>(k);
}

// Draw an index with weights w (sum need not be 1); linear CDF scan.
int pick_index(const Eigen::VectorXd& w, double total, RngStream& rng) {
    double target = rng.next_unit() * total;
    const Eigen::Index n = w.size();
    for (Eigen::Index j = 0; j < n; ++j) {
        target -= w[j];
        if (target < 0.0) return static_cast<int>(j);
    }
    return static_cast<int>(n - 1);  // roundoff landed past the last bin
}

}  // namespace

OffspringSample sample_offspring(const LFModel& model, int i, RngStream& rng) {
    if (i < 0 || i >= model.n_types)
        throw DomainError("sample_offspring: type index out of range");
    OffspringSample out;
    out.counts = Eigen::VectorXi::Zero(model.n_types);

    if (rng.next_unit() < model.h0[i]) return out;

    const double row_sum = 1.0 - model.h0[i];
    const int first = pick_index(model.H.row(i), row_sum, rng);
    out.counts[first] += 1;

    const int extras = geometric_extras(model.m, rng);
    for (int e = 0; e < extras; ++e)
        out.counts[pick_index(model.g, 1.0, rng)] += 1;
    return out;
}

OffspringSample sample_skeleton_offspring(const SkeletonLaw& law, int i,
                                          RngStream& rng) {
    if (i < 0 || i >= law.n_types)
        throw DomainError("sample_skeleton_offspring: type index out of range");
    const int n = law.n_types;
    OffspringSample out;
    out.has_split = true;
    out.skeleton_counts = Eigen::VectorXi::Zero(n);
    out.doomed_counts = Eigen::VectorXi::Zero(n);

    // (a) the reborn skeleton offspring
    const int j = pick_index(law.h_tilde.row(i), 1.0, rng);
    out.skeleton_counts[j] += 1;

    // (b) geometric extras of either subtype: type k ~ g, then skeleton
    // with probability 1-q_k
    const int extras = geometric_extras(law.m, rng);
    for (int e = 0; e < extras; ++e) {
        const int k = pick_index(law.g, 1.0, rng);
        if (rng.next_unit() < 1.0 - law.q[k])
            out.skeleton_counts[k] += 1;
        else
            out.doomed_counts[k] += 1;
    }

    // (c) doomed cluster, i.e. the "first doomed offspring" branch of the
    // inner linear-fractional factor
    if (rng.next_unit() < 1.0 - law.h_ij0(i, j)) {
        const double row_sum = 1.0 - law.h_hat0[i];
        out.doomed_counts[pick_index(law.h_hat.row(i), row_sum, rng)] += 1;
        const int doomed_extras = geometric_extras(law.m_hat, rng);
        for (int e = 0; e < doomed_extras; ++e)
            out.doomed_counts[pick_index(law.g_hat, 1.0, rng)] += 1;
    }

    out.counts = out.skeleton_counts + out.doomed_counts;
    return out;
}

std::vector<Eigen::VectorX<std::int64_t>> simulate_generations(
    const LFModel& model, const Eigen::VectorX<std::int64_t>& init, int n,
    RngStream& rng, std::int64_t cap) {
    if (n < 0) throw DomainError("simulate_generations: n must be >= 0");
    if (init.size() != model.n_types)
        throw DomainError("simulate_generations: init has wrong length");

    std::vector<Eigen::VectorX<std::int64_t>> gens;
    gens.reserve(n + 1);
    gens.push_back(init);
    for (int gen = 0; gen < n; ++gen) {
        const auto& current = gens.back();
        Eigen::VectorX<std::int64_t> next =
            Eigen::VectorX<std::int64_t>::Zero(model.n_types);
        for (int i = 0; i < model.n_types; ++i) {
            for (std::int64_t c = 0; c < current[i]; ++c) {
                const OffspringSample s = sample_offspring(model, i, rng);
                for (int j = 0; j < model.n_types; ++j) next[j] += s.counts[j];
                if (next.sum() > cap) {
                    std::ostringstream msg;
                    msg << "population exceeded cap " << cap
                        << " at generation " << gen + 1;
                    throw PopulationOverflow(msg.str());
                }
            }
        }
        gens.push_back(std::move(next));
    }
    return gens;
}

std::pair<std::int64_t, std::int64_t> GenealogyTree::generation_split(
    int gen) const {
    std::int64_t s = 0, d = 0;
    for (const TreeNode& node : nodes) {
        if (node.generation != gen) continue;
        (node.skeleton ? s : d) += 1;
    }
    return {s, d};
}

GenealogyTree simulate_tree_labeled(const LFModel& model,
                                    const SpectralSummary& sum, int root_type,
                                    int horizon, const RngStream& rng,
                                    std::int64_t cap) {
    if (sum.criticality != Criticality::supercritical)
        throw NotSupercritical("simulate_tree_labeled: model is not "
                               "supercritical");
    if (horizon < 0)
        throw DomainError("simulate_tree_labeled: horizon must be >= 0");
    if (root_type < 0 || root_type >= model.n_types)
        throw DomainError("simulate_tree_labeled: root type out of range");

    GenealogyTree tree;
    tree.horizon = horizon;
    tree.nodes.push_back({-1, static_cast<std::int32_t>(root_type), 0, false});

    // breadth-first growth; node k draws from substream(k), so the tree is
    // a deterministic function of the stream state regardless of traversal
    std::size_t gen_begin = 0;
    for (int gen = 0; gen < horizon; ++gen) {
        const std::size_t gen_end = tree.nodes.size();
        for (std::size_t id = gen_begin; id < gen_end; ++id) {
            RngStream node_rng = rng.substream(id);
            const OffspringSample s =
                sample_offspring(model, tree.nodes[id].type, node_rng);
            for (int j = 0; j < model.n_types; ++j) {
                for (int c = 0; c < s.counts[j]; ++c) {
                    tree.nodes.push_back({static_cast<std::int32_t>(id),
                                          static_cast<std::int32_t>(j),
                                          static_cast<std::int32_t>(gen + 1),
                                          false});
                }
            }
            if (static_cast<std::int64_t>(tree.nodes.size()) > cap) {
                std::ostringstream msg;
                msg << "tree exceeded cap " << cap << " nodes at generation "
                    << gen + 1;
                throw PopulationOverflow(msg.str());
            }
        }
        gen_begin = gen_end;
    }

    // exact labeling: given its type, each horizon lineage survives forever
    // with probability 1-q independently of everything else in the tree
    for (std::size_t id = gen_begin; id < tree.nodes.size(); ++id) {
        if (tree.nodes[id].generation != horizon) continue;
        // horizon nodes never sampled offspring, so this is their first draw
        RngStream node_rng = rng.substream(id);
        tree.nodes[id].skeleton =
            node_rng.next_unit() < 1.0 - sum.q[tree.nodes[id].type];
    }
    // children carry larger ids than parents, so one reverse sweep settles
    // every internal label
    for (std::size_t id = tree.nodes.size(); id-- > 1;) {
        if (tree.nodes[id].skeleton)
            tree.nodes[tree.nodes[id].parent].skeleton = true;
    }
    return tree;
}

std::string tree_to_dot(const GenealogyTree& tree) {
    std::ostringstream out;
    out << "digraph genealogy {\n"
        << "  rankdir=TB;\n"
        << "  node [shape=circle, fontsize=9];\n";
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
        const TreeNode& n = tree.nodes[id];
        out << "  n" << id << " [label=\"" << n.type + 1 << "\""
            << (n.skeleton ? ", style=bold" : ", style=dotted") << "];\n";
    }
    for (std::size_t id = 1; id < tree.nodes.size(); ++id) {
        const TreeNode& n = tree.nodes[id];
        out << "  n" << n.parent << " -> n" << id
            << (n.skeleton ? " [style=solid];\n" : " [style=dotted];\n");
    }
    out << "}\n";
    return out.str();
}

std::pair<double, double> empirical_pgf(std::span<const OffspringSample> samples,
                                        const Eigen::VectorXd& s) {
    if (samples.empty()) throw EmptySamples("empirical_pgf: no samples");
    double sum = 0.0, sum_sq = 0.0;
    for (const OffspringSample& sample : samples) {
        double x = 1.0;
        for (Eigen::Index j = 0; j < s.size(); ++j)
            x *= std::pow(s[j], sample.counts[j]);
        sum += x;
        sum_sq += x * x;
    }
    const double n = static_cast<double>(samples.size());
    const double mean = sum / n;
    if (samples.size() < 2) return {mean, 0.0};
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
    return {mean, std::sqrt(var / n)};
}

SimStats collect_stats(std::span<const OffspringSample> samples,
                       const std::vector<Eigen::VectorXd>& probes,
                       int n_types) {
    if (samples.empty()) throw EmptySamples("collect_stats: no samples");
    SimStats stats;
    stats.n_samples = static_cast<std::int64_t>(samples.size());
    const double n = static_cast<double>(samples.size());

    Eigen::VectorXd sum = Eigen::VectorXd::Zero(n_types);
    Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(n_types);
    for (const OffspringSample& s : samples) {
        for (int j = 0; j < n_types; ++j) {
            const double c = s.counts[j];
            sum[j] += c;
            sum_sq[j] += c * c;
        }
    }
    stats.mean_counts = sum / n;
    stats.se_counts = Eigen::VectorXd::Zero(n_types);
    if (samples.size() >= 2) {
        for (int j = 0; j < n_types; ++j) {
            const double var = std::max(
                0.0,
                (sum_sq[j] - n * stats.mean_counts[j] * stats.mean_counts[j]) /
                    (n - 1.0));
            stats.se_counts[j] = std::sqrt(var / n);
        }
    }

    for (const Eigen::VectorXd& probe : probes) {
        const auto [value, se] = empirical_pgf(samples, probe);
        stats.pgf_values.push_back(value);
        stats.pgf_se.push_back(se);
    }
    return stats;
}

}  // namespace lfbgw
