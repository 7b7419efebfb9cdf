#pragma once

// IsotropyReport: the numbers behind an isotropy analysis of one embedding
// file, plus an optional EV_1/EV_2/EV_3 comparison across raw, batch
// normalized and IsoBN-transformed copies.

#include <cstdio>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "isokit/isobn.hpp"
#include "isokit/metrics.hpp"
#include "isokit/normalizers.hpp"

namespace isokit {

inline constexpr int kReportSchemaVersion = 1;

struct ReportOptions {
    std::size_t ev_k = 0;          // 0 = min(d, 50)
    double cluster_tau = 0.5;
    std::size_t n_buckets = 40;
    bool compare_transforms = false;
    IsoBNConfig isobn;
};

struct MethodComparison {
    IsoBNConfig isobn;
    std::map<std::string, EVSpectrum> spectra;  // "raw", "bn", "isobn"
};

struct IsotropyReport {
    std::string source;
    std::size_t n_samples = 0;
    std::size_t dim = 0;
    StdDistribution std_dist;
    double cluster_tau = 0.5;
    CorrelationClustering clustering;
    EVSpectrum spectrum;
    std::optional<MethodComparison> comparison;
};

/// IsoBN for analysis purposes: one training step on the whole matrix, so the
/// cache holds exactly the matrix statistics.
inline EmbeddingMatrix isobn_full_batch(const EmbeddingMatrix& h, const IsoBNConfig& config) {
    MomentCache cache(h.dim());
    return isobn_train_step(h, cache, config);
}

inline IsotropyReport build_report(const EmbeddingMatrix& h, const std::string& source, const ReportOptions& opt) {
    IsotropyReport r;
    r.source = source;
    r.n_samples = h.n_samples();
    r.dim = h.dim();
    const std::size_t k = opt.ev_k > 0 ? opt.ev_k : std::min<std::size_t>(h.dim(), 50);

    r.std_dist = std_distribution(h, opt.n_buckets);
    r.spectrum = explained_variance(h, k);
    r.cluster_tau = opt.cluster_tau;
    r.clustering = cluster_correlations(compute_moments(h).correlation, opt.cluster_tau);

    if (opt.compare_transforms) {
        MethodComparison cmp;
        cmp.isobn = opt.isobn;
        cmp.spectra.emplace("raw", r.spectrum);
        cmp.spectra.emplace("bn", explained_variance(batch_normalize(h), k));
        cmp.spectra.emplace("isobn", explained_variance(isobn_full_batch(h, opt.isobn), k));
        r.comparison = std::move(cmp);
    }
    return r;
}

namespace detail {

inline nlohmann::json to_json_array(const Vector& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

/// "0.76 / 0.87 / 0.89"
inline std::string ev_summary(const std::vector<double>& ev) {
    std::string s;
    for (std::size_t i = 0; i < std::min<std::size_t>(3, ev.size()); ++i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%.2f", ev[i]);
        if (i) s += " / ";
        s += buf;
    }
    return s;
}

}  // namespace detail

inline nlohmann::json to_json(const IsotropyReport& r) {
    using nlohmann::json;
    json j;
    j["schema_version"] = kReportSchemaVersion;
    j["source"] = {{"path", r.source}, {"n_samples", r.n_samples}, {"dim", r.dim}};

    json hist = json::array();
    for (const auto& b : r.std_dist.histogram) hist.push_back({{"lower_edge", b.lower_edge}, {"count", b.count}});
    j["std_distribution"] = {{"min", r.std_dist.min},
                             {"max", r.std_dist.max},
                             {"median", r.std_dist.median},
                             {"underflow_count", r.std_dist.underflow_count},
                             {"histogram", hist}};

    j["correlation_clustering"] = {{"tau", r.cluster_tau},
                                   {"n_clusters", r.clustering.cluster_sizes.size()},
                                   {"cluster_sizes", r.clustering.cluster_sizes},
                                   {"cluster_bounds", r.clustering.cluster_bounds},
                                   {"permutation", r.clustering.permutation}};

    j["explained_variance"] = {{"k", r.spectrum.values.size()},
                               {"ev", r.spectrum.values},
                               {"singular_values", detail::to_json_array(r.spectrum.singular_values)}};

    if (r.comparison) {
        json methods = json::object();
        for (const auto& [name, spec] : r.comparison->spectra) {
            std::vector<double> top(spec.values.begin(),
                                    spec.values.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(3, spec.values.size())));
            methods[name] = {{"ev_top3", top}, {"ev_summary", detail::ev_summary(spec.values)}};
        }
        const IsoBNConfig& c = r.comparison->isobn;
        j["comparison"] = {{"isobn_config",
                            {{"momentum", c.momentum},
                             {"strength", c.strength},
                             {"stabilizer", c.stabilizer},
                             {"exact_variance_renorm", c.exact_variance_renorm}}},
                           {"methods", methods}};
    }
    return j;
}

}  // namespace isokit
