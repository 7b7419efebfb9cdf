#pragma once

// Command-line front end: analyze, transform, probe, gen.
//
// Exit codes: 0 success, 1 usage error, 2 data/validation error,
// 3 numerical error. Failures are reported on stderr as one line of JSON.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "isokit/io.hpp"
#include "isokit/isobn.hpp"
#include "isokit/normalizers.hpp"
#include "isokit/probe.hpp"
#include "isokit/report.hpp"
#include "isokit/synthgen.hpp"

namespace isokit::cli {

enum ExitCode : int { ok = 0, usage = 1, data = 2, numerical = 3 };

inline int exit_code_for(ErrorKind kind) { return kind == ErrorKind::numerical ? numerical : data; }

inline void report_error(std::ostream& err, const Error& e) {
    nlohmann::json j = {{"error", std::string(to_string(e.kind()))}, {"code", e.code()}, {"message", e.what()}};
    if (const auto* d = dynamic_cast<const DataError*>(&e)) {
        if (d->row()) j["row"] = *d->row();
        if (d->column()) j["column"] = *d->column();
    }
    if (const auto* ic = dynamic_cast<const IllConditionedError*>(&e)) {
        j["smallest_eigenvalue"] = ic->smallest_eigenvalue();
        j["largest_eigenvalue"] = ic->largest_eigenvalue();
    }
    err << j.dump() << '\n';
}

inline void report_usage(std::ostream& err, const std::string& message) {
    err << nlohmann::json({{"error", "usage"}, {"code", "usage"}, {"message", message}}).dump() << '\n';
}

/// Applies ISOKIT_THREADS (positive integer) to the Eigen thread pool.
inline void apply_thread_cap() {
    const char* env = std::getenv("ISOKIT_THREADS");
    if (env == nullptr || *env == '\0') return;
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1) throw CLI::ValidationError("ISOKIT_THREADS", "must be a positive integer");
    Eigen::setNbThreads(static_cast<int>(n));
}

struct AnalyzeArgs {
    std::string input, out, plots;
    std::size_t ev_k = 0;
    double tau = 0.5;
    std::size_t buckets = 40;
    bool compare = false;
    IsoBNConfig isobn;
};

struct TransformArgs {
    std::string input, out, method, cache, format;
    bool train = false, infer = false;
    IsoBNConfig isobn;
};

struct ProbeArgs {
    std::string embeddings, labels, out;
    ProbeOptions options;
};

struct GenArgs {
    std::string spec, out, labels_out, format;
};

inline std::optional<MatrixFormat> requested_format(const std::string& name) {
    if (name.empty()) return std::nullopt;
    return parse_format(name);
}

inline void write_plots(const IsotropyReport& r, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create plot directory " + dir + ": " + ec.message());

    auto open = [&](const std::string& name) {
        const std::string path = (fs::path(dir) / name).string();
        std::ofstream f(path, std::ios::trunc);
        if (!f) throw IoError("cannot open " + path + " for writing");
        return f;
    };

    auto hist = open("std_histogram.csv");
    hist << "bucket,lower_edge,count\n";
    hist << "underflow,0," << r.std_dist.underflow_count << '\n';
    for (std::size_t b = 0; b < r.std_dist.histogram.size(); ++b) {
        hist << b << ',' << format_double(r.std_dist.histogram[b].lower_edge) << ','
             << r.std_dist.histogram[b].count << '\n';
    }

    auto ev = open("ev_curve.csv");
    std::vector<std::pair<std::string, const EVSpectrum*>> cols;
    if (r.comparison) {
        for (const char* name : {"raw", "bn", "isobn"}) cols.emplace_back(name, &r.comparison->spectra.at(name));
    } else {
        cols.emplace_back("raw", &r.spectrum);
    }
    ev << "k";
    for (const auto& c : cols) ev << ',' << c.first;
    ev << '\n';
    for (std::size_t k = 0; k < r.spectrum.values.size(); ++k) {
        ev << k + 1;
        for (const auto& c : cols) ev << ',' << format_double(c.second->values[k]);
        ev << '\n';
    }

    auto corr = open("abs_corr_reordered.csv");
    const Matrix& m = r.clustering.abs_corr_reordered;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) corr << (j ? "," : "") << format_double(m(i, j));
        corr << '\n';
    }
    for (auto* f : {&hist, &ev, &corr}) {
        f->flush();
        if (!*f) throw IoError("failed writing plot data in " + dir);
    }
}

inline void run_analyze(const AnalyzeArgs& a) {
    const EmbeddingMatrix h = load_matrix(a.input);
    ReportOptions opt;
    opt.ev_k = a.ev_k;
    opt.cluster_tau = a.tau;
    opt.n_buckets = a.buckets;
    opt.compare_transforms = a.compare;
    opt.isobn = a.isobn;
    const IsotropyReport r = build_report(h, a.input, opt);
    save_json(to_json(r), a.out);
    if (!a.plots.empty()) write_plots(r, a.plots);
}

inline void run_transform(const TransformArgs& a) {
    const EmbeddingMatrix h = load_matrix(a.input);
    const auto format = requested_format(a.format);
    if (a.method == "whiten") {
        save_matrix(whiten(h), a.out, format);
    } else if (a.method == "bn") {
        save_matrix(batch_normalize(h), a.out, format);
    } else {
        a.isobn.validate();
        if (a.infer) {
            const MomentCache cache = MomentCache::load(a.cache);
            save_matrix(isobn_apply(h, cache, a.isobn), a.out, format);
        } else {
            MomentCache cache = (!a.cache.empty() && std::filesystem::exists(a.cache)) ? MomentCache::load(a.cache)
                                                                                       : MomentCache(h.dim());
            const EmbeddingMatrix out = isobn_train_step(h, cache, a.isobn);
            save_matrix(out, a.out, format);
            if (!a.cache.empty()) cache.save(a.cache);
        }
    }
}

inline nlohmann::json probe_to_json(const ProbeResult& r, const ProbeArgs& a, std::size_t n_samples) {
    using nlohmann::json;
    json records = json::array();
    for (const auto& rec : r.records) {
        records.push_back({{"step", rec.step},
                           {"cosine_similarity", rec.drift.cosine_sim},
                           {"l2_distance", rec.drift.l2_dist},
                           {"loss", rec.loss},
                           {"top1", rec.shares.cumulative(1)},
                           {"top5", rec.shares.cumulative(5)},
                           {"top30", rec.shares.cumulative(30)},
                           {"pc_shares", detail::to_json_array(rec.shares.shares)}});
    }
    const ProbeOptions& o = a.options;
    return {{"schema_version", kReportSchemaVersion},
            {"source", {{"embeddings", a.embeddings}, {"labels", a.labels}}},
            {"n_samples", n_samples},
            {"dim", r.classifier.dim()},
            {"n_classes", r.classifier.n_classes()},
            {"options",
             {{"steps", o.steps}, {"lr", o.lr}, {"seed", o.seed}, {"record_every", o.record_every},
              {"top_k", o.top_k}}},
            {"eigenvalues", detail::to_json_array(r.covariance_eig.eigenvalues)},
            {"records", records}};
}

inline void run_probe(const ProbeArgs& a) {
    const EmbeddingMatrix h = load_matrix(a.embeddings);
    const std::vector<int> labels = load_labels(a.labels);
    const ProbeResult r = train_softmax(h, labels, a.options);
    save_json(probe_to_json(r, a, h.n_samples()), a.out);
}

inline void run_gen(const GenArgs& a) {
    const SyntheticSpec spec = spec_from_json(load_json(a.spec));
    if (!a.labels_out.empty() && !spec.label_axis) {
        throw DataError("invalid_spec", "--labels-out needs label_axis or label_dim in the spec");
    }
    const SyntheticData data = generate(spec);
    save_matrix(data.embeddings, a.out, requested_format(a.format));
    if (!a.labels_out.empty()) save_labels(*data.labels, a.labels_out);
}

inline void add_isobn_options(CLI::App* cmd, IsoBNConfig& c) {
    cmd->add_option("--beta", c.strength, "IsoBN normalization strength")->check(CLI::NonNegativeNumber);
    cmd->add_option("--eps", c.stabilizer, "IsoBN stabilizer")->check(CLI::PositiveNumber);
    cmd->add_option("--alpha", c.momentum, "IsoBN cache momentum")->check(CLI::Range(0.0, 1.0));
    cmd->add_flag("--exact-variance-renorm", c.exact_variance_renorm,
                  "renormalize with sqrt(c) so the sum of variances is preserved");
}

inline int run(int argc, const char* const* argv, std::ostream& err = std::cerr) {
    CLI::App app{"isokit: isotropy analysis and normalization of embedding matrices", "isokit"};
    app.require_subcommand(1);

    AnalyzeArgs an;
    auto* analyze = app.add_subcommand("analyze", "write an isotropy report for an embedding matrix");
    analyze->add_option("input", an.input, "embedding matrix (csv or raw-f64)")->required();
    analyze->add_option("--out", an.out, "report JSON path")->required();
    analyze->add_option("--ev-k", an.ev_k, "number of EV_k values (default min(d, 50))")->check(CLI::PositiveNumber);
    analyze->add_option("--cluster-tau", an.tau, "correlation clustering threshold")
        ->check(CLI::Range(0.0, 1.0));
    analyze->add_option("--buckets", an.buckets, "std histogram buckets")->check(CLI::PositiveNumber);
    analyze->add_flag("--compare-transforms", an.compare, "add raw/BN/IsoBN EV comparison");
    analyze->add_option("--plots", an.plots, "directory for plot-ready CSV files");
    add_isobn_options(analyze, an.isobn);

    TransformArgs tr;
    auto* transform = app.add_subcommand("transform", "apply whitening, batch normalization or IsoBN");
    transform->add_option("input", tr.input, "embedding matrix")->required();
    transform->add_option("--method", tr.method, "whiten | bn | isobn")
        ->required()
        ->check(CLI::IsMember({"whiten", "bn", "isobn"}));
    transform->add_option("--out", tr.out, "output matrix path")->required();
    transform->add_option("--format", tr.format, "csv | raw (default: from extension)")
        ->check(CLI::IsMember({"csv", "raw", "raw-f64"}));
    transform->add_option("--cache", tr.cache, "IsoBN moment cache file");
    auto* train_flag = transform->add_flag("--train", tr.train, "update the cache (default)");
    auto* infer_flag = transform->add_flag("--infer", tr.infer, "use the cache read-only");
    train_flag->excludes(infer_flag);
    add_isobn_options(transform, tr.isobn);

    ProbeArgs pr;
    auto* probe = app.add_subcommand("probe", "train a softmax probe and track weight drift and PC shares");
    probe->add_option("embeddings", pr.embeddings, "embedding matrix")->required();
    probe->add_option("labels", pr.labels, "labels file, one class id per line")->required();
    probe->add_option("--out", pr.out, "probe JSON path")->required();
    probe->add_option("--steps", pr.options.steps, "gradient steps");
    probe->add_option("--lr", pr.options.lr, "learning rate")->check(CLI::PositiveNumber);
    probe->add_option("--seed", pr.options.seed, "initialization seed");
    probe->add_option("--record-every", pr.options.record_every, "record interval (default steps/50)");
    probe->add_option("--top-k", pr.options.top_k, "drift subspace dimension")->check(CLI::PositiveNumber);

    GenArgs gn;
    auto* gen = app.add_subcommand("gen", "generate a synthetic embedding matrix");
    gen->add_option("--spec", gn.spec, "synthetic spec JSON")->required();
    gen->add_option("--out", gn.out, "output matrix path")->required();
    gen->add_option("--labels-out", gn.labels_out, "labels output path");
    gen->add_option("--format", gn.format, "csv | raw (default: from extension)")
        ->check(CLI::IsMember({"csv", "raw", "raw-f64"}));

    try {
        app.parse(argc, argv);
        if (transform->parsed() && tr.method == "isobn" && tr.infer && tr.cache.empty()) {
            throw CLI::ValidationError("--infer", "requires --cache");
        }
        apply_thread_cap();
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        report_usage(err, e.what());
        return usage;
    }

    try {
        if (analyze->parsed()) run_analyze(an);
        if (transform->parsed()) run_transform(tr);
        if (probe->parsed()) run_probe(pr);
        if (gen->parsed()) run_gen(gn);
    } catch (const Error& e) {
        report_error(err, e);
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        report_error(err, Error(ErrorKind::data, "unexpected", e.what()));
        return data;
    }
    return ok;
}

}  // namespace isokit::cli
