// ldwr: few-shot evaluation over local descriptor files or synthetic data.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "ldwr/descriptor_io.hpp"
#include "ldwr/eval_harness.hpp"

namespace {

struct SyntheticFlags {
    std::string spec = "";
    std::optional<std::size_t> classes, samples, channels, height, width, modes;
    std::optional<double> fg, snr, overlap, bg_strength;
    std::optional<std::uint64_t> seed;

    void add_to(CLI::App& app) {
        app.add_option("--synthetic", spec,
                       "Synthetic generator spec file (key = value), or 'default'");
        app.add_option("--syn-classes", classes, "Synthetic: number of classes");
        app.add_option("--syn-samples", samples, "Synthetic: samples per class");
        app.add_option("--syn-channels", channels, "Synthetic: descriptor dimension C");
        app.add_option("--syn-height", height, "Synthetic: feature map height");
        app.add_option("--syn-width", width, "Synthetic: feature map width");
        app.add_option("--syn-foreground", fg, "Synthetic: foreground fraction");
        app.add_option("--syn-snr", snr, "Synthetic: class signal to noise");
        app.add_option("--syn-overlap", overlap, "Synthetic: shared foreground component in [0, 1)");
        app.add_option("--syn-bg-modes", modes, "Synthetic: shared background directions");
        app.add_option("--syn-bg-strength", bg_strength, "Synthetic: background magnitude");
        app.add_option("--syn-seed", seed, "Synthetic: generator seed");
    }

    bool requested() const {
        return !spec.empty() || classes || samples || channels || height || width || modes || fg ||
               snr || overlap || bg_strength || seed;
    }

    ldwr::SyntheticSpec build() const {
        ldwr::SyntheticSpec s;
        if (!spec.empty() && spec != "default") s = ldwr::load_synthetic_spec(spec);
        if (classes) s.n_classes = *classes;
        if (samples) s.samples_per_class = *samples;
        if (channels) s.channels = *channels;
        if (height) s.height = *height;
        if (width) s.width = *width;
        if (modes) s.background_modes = *modes;
        if (fg) s.foreground_fraction = *fg;
        if (snr) s.signal_to_noise = *snr;
        if (overlap) s.class_overlap = *overlap;
        if (bg_strength) s.background_strength = *bg_strength;
        if (seed) s.seed = *seed;
        s.validate();
        return s;
    }
};

void print_summary(const ldwr::RunReport& r) {
    std::printf("episodes        %zu\n", r.episodes.size());
    std::printf("accuracy        %.2f +- %.2f %%\n", 100.0 * r.mean_accuracy, 100.0 * r.ci95);
    auto print_masks = [](const char* side, const std::optional<ldwr::MaskAgreement>& m) {
        if (!m) return;
        if (m->background_recall) std::printf("%s bg recall     %.4f\n", side, *m->background_recall);
        if (m->foreground_retention) std::printf("%s fg retention  %.4f\n", side, *m->foreground_retention);
    };
    print_masks("support", r.support_masks);
    print_masks("query  ", r.query_masks);
    if (r.wall_seconds) std::printf("wall time       %.2f s\n", *r.wall_seconds);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Few-shot classification with filtered local descriptors"};
    app.require_subcommand(1);

    // eval
    auto* eval = app.add_subcommand("eval", "Run episodic evaluation");
    ldwr::RunConfig cfg;
    ldwr::ExecutionOptions exec;
    exec.threads = std::max(1u, std::thread::hardware_concurrency());
    std::string data_path, cn_params_path, out_path, normalize = "cn", filter_mode = "averaged",
                                                     query_stats = "own";
    bool no_nr = false, no_filter = false;
    SyntheticFlags syn;
    auto& p = cfg.pipeline;
    eval->add_option("--data", data_path, "Descriptor file (LDWR format)");
    syn.add_to(*eval);
    eval->add_option("--n-way", cfg.episodes.n_way, "Classes per episode")->capture_default_str();
    eval->add_option("--k-shot", cfg.episodes.k_shot, "Support samples per class")->capture_default_str();
    eval->add_option("--n-query", cfg.episodes.n_query, "Query samples per class")->capture_default_str();
    eval->add_option("--episodes", cfg.episodes.episodes, "Episode count")->capture_default_str();
    eval->add_option("--seed", cfg.episodes.seed, "Run seed")->capture_default_str();
    eval->add_option("--normalize", normalize, "cn | l2 | none")
        ->check(CLI::IsMember({"cn", "l2", "none"}))
        ->capture_default_str();
    eval->add_option("--cn-params", cn_params_path, "Cross-norm parameter file");
    eval->add_flag("--no-nr", no_nr, "Use raw descriptors instead of neighborhood means");
    eval->add_option("--nr-k", p.neighborhood.k_neighbors, "Neighbors per neighborhood mean")
        ->capture_default_str();
    eval->add_flag("--nr-include-self", p.neighborhood.include_self,
                   "Let a descriptor be its own neighbor");
    eval->add_flag("--no-filter", no_filter, "Disable descriptor filtering");
    eval->add_option("--c-stop", p.filter.c_stop, "Stop when sigma < sigma_0 / c_stop")
        ->capture_default_str();
    eval->add_option("--max-filter-iters", p.filter.max_iterations, "Filtering pass cap")
        ->capture_default_str();
    eval->add_option("--min-keep-fraction", p.filter.min_keep_fraction,
                     "Minimum share of descriptors kept per image")
        ->capture_default_str();
    eval->add_option("--filter-mode", filter_mode, "averaged | per-class")
        ->check(CLI::IsMember({"averaged", "per-class"}))
        ->capture_default_str();
    eval->add_option("--query-stats", query_stats, "own | support")
        ->check(CLI::IsMember({"own", "support"}))
        ->capture_default_str();
    eval->add_option("--knn-k", p.classifier.k_bar, "Neighbors per query descriptor")
        ->capture_default_str();
    eval->add_option("--threads", exec.threads, "Worker threads")->capture_default_str();
    eval->add_flag("--timing", exec.record_timing, "Record wall time in the report");
    eval->add_option("--out", out_path, "Report path (JSON)");

    // synth
    auto* synth = app.add_subcommand("synth", "Write a synthetic dataset as a descriptor file");
    SyntheticFlags synth_flags;
    std::string synth_out;
    synth_flags.add_to(*synth);
    synth->add_option("--out", synth_out, "Output descriptor file")->required();

    // inspect
    auto* inspect = app.add_subcommand("inspect", "Validate a descriptor file and print its header");
    std::string inspect_path;
    inspect->add_option("file", inspect_path, "Descriptor file")->required();

    // compare
    auto* compare = app.add_subcommand("compare", "Paired-seed comparison of two reports (B - A)");
    std::string report_a, report_b;
    compare->add_option("a", report_a, "Baseline report")->required();
    compare->add_option("b", report_b, "Candidate report")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*eval) {
            if (!data_path.empty() && syn.requested()) {
                throw ldwr::ConfigError("--data and --synthetic are mutually exclusive");
            }
            if (!data_path.empty()) {
                cfg.source.data_path = data_path;
            } else if (syn.requested()) {
                cfg.source.synthetic = syn.build();
            } else {
                throw ldwr::ConfigError("one of --data or --synthetic is required");
            }
            p.normalization = ldwr::parse_normalization_mode(normalize);
            if (!cn_params_path.empty()) p.cross_norm = ldwr::load_cn_params(cn_params_path);
            p.use_neighborhood = !no_nr;
            p.use_filter = !no_filter;
            p.filter.mode = ldwr::parse_filter_mode(filter_mode);
            p.query_stats = ldwr::parse_query_stats(query_stats);

            const ldwr::RunReport report = ldwr::run(cfg, exec);
            print_summary(report);
            if (!out_path.empty()) ldwr::report_write(report, out_path);
        } else if (*synth) {
            const auto syn_data = ldwr::generate_synthetic(synth_flags.build());
            ldwr::write_dataset(syn_data.dataset, synth_out);
            std::printf("wrote %zu samples to %s\n", syn_data.dataset.samples.size(), synth_out.c_str());
        } else if (*inspect) {
            const auto ds = ldwr::read_dataset(inspect_path);
            std::printf("C=%zu H=%zu W=%zu descriptors/image=%zu samples=%zu classes=%zu\n",
                        ds.channels, ds.height, ds.width, ds.height * ds.width, ds.samples.size(),
                        ds.classes.size());
        } else if (*compare) {
            const auto cmp = ldwr::compare_paired(ldwr::report_read(report_a), ldwr::report_read(report_b));
            std::printf("episodes %zu  mean difference %+.4f  standard error %.4f  z %.2f\n",
                        cmp.episodes, cmp.mean_difference, cmp.standard_error, cmp.z());
        }
    } catch (const std::exception& e) {
        std::cerr << "ldwr: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
