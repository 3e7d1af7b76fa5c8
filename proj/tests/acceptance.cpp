// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ldwr/classifier.hpp"
#include "ldwr/cross_norm.hpp"
#include "ldwr/eval_harness.hpp"
#include "ldwr/ldwr_filter.hpp"
#include "ldwr/neighborhood.hpp"
#include "ldwr/prototype.hpp"
#include "oracles.hpp"

using namespace ldwr;

namespace {

constexpr long double kRel = 1e-6L;
// Exact zeros on both sides are the only values allowed to skip the relative test.
constexpr long double kZero = 1e-12L;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
    return std::chrono::duration<double>(Clock::now() - t).count();
}

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
    std::printf("%s  %-34s %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// Tally of instances and mismatches for one operation.
struct Tally {
    std::size_t instances = 0;
    std::size_t mismatches = 0;
    void check(bool ok) { mismatches += ok ? 0 : 1; }
};

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Episode random_episode(std::mt19937_64& rng, std::size_t n_way, std::size_t k_shot, std::size_t channels,
                       std::size_t h, std::size_t w, std::size_t queries) {
    Episode e;
    e.n_way = n_way;
    e.k_shot = k_shot;
    std::uint64_t id = 0;
    for (std::size_t c = 0; c < n_way; ++c) e.class_labels.push_back("c" + std::to_string(c));
    for (std::size_t m = 0; m < n_way * k_shot; ++m) {
        e.support.push_back({DescriptorSet(channels, h, w, oracle::random_matrix(rng, channels, h * w, 0.05, 0.02)),
                             e.class_labels[m / k_shot], id++});
    }
    for (std::size_t q = 0; q < queries; ++q) {
        e.query.push_back({DescriptorSet(channels, h, w, oracle::random_matrix(rng, channels, h * w, 0.05)),
                           e.class_labels[q % n_way], id++});
    }
    return e;
}

Episode scaled(const Episode& e, float s) {
    Episode out = e;
    for (auto* set : {&out.support, &out.query}) {
        for (auto& sample : *set) {
            DescriptorMatrix m = sample.descriptors.matrix();
            for (auto& v : m.values()) v *= s;
            sample.descriptors = DescriptorSet(sample.descriptors.channels(), sample.descriptors.height(),
                                               sample.descriptors.width(), std::move(m));
        }
    }
    return out;
}

bool subset(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

// ---------------------------------------------------------------------------

void oracle_equivalence() {
    const auto start = Clock::now();
    constexpr std::size_t kInstances = 1000;
    std::mt19937_64 rng(101);
    Tally knn, nr, weights, stats, once, i2c;

    for (std::size_t t = 0; t < kInstances; ++t) {
        const std::size_t dim = pick(rng, 1, 16), size = pick(rng, 2, 64);
        const auto pool = oracle::random_matrix(rng, dim, size, 0.15, 0.03);
        const auto rows = oracle::rows_of(pool);

        // knn_indices
        {
            const std::size_t q = pick(rng, 0, size - 1);
            const bool include_self = t % 2 == 0;
            const std::size_t k = pick(rng, 1, include_self ? size : size - 1);
            const auto got = knn_indices(pool.row(q), pool, {k, include_self}, q);
            knn.check(got == oracle::knn(pool.row(q), rows, k, include_self ? std::nullopt : std::optional(q)));
            ++knn.instances;
        }
        // neighborhood_representation
        {
            const bool include_self = t % 3 == 0;
            const std::size_t k = pick(rng, 1, std::min<std::size_t>(10, include_self ? size : size - 1));
            const auto got = neighborhood_representation(pool, {k, include_self});
            const auto expect = oracle::neighborhood(rows, k, include_self);
            bool ok = got.size() == size;
            for (std::size_t i = 0; ok && i < size; ++i)
                for (std::size_t c = 0; c < dim; ++c) ok = ok && oracle::close(got.row(i)[c], expect[i][c], kRel, kZero);
            nr.check(ok);
            ++nr.instances;
        }
        // descriptor_weights
        {
            const std::size_t classes = pick(rng, 1, 5);
            std::vector<ClassPrototype> protos;
            const auto pm = oracle::random_matrix(rng, dim, classes, 0.1, 0.05);
            for (std::size_t c = 0; c < classes; ++c) {
                auto r = pm.row(c);
                protos.push_back({c, Vector(r.begin(), r.end()), 1});
            }
            const auto s = descriptor_weights(pool, protos);
            bool ok = s.classes == classes && s.descriptors == size;
            for (std::size_t c = 0; ok && c < classes; ++c)
                for (std::size_t i = 0; i < size; ++i)
                    ok = ok && oracle::close(s.at(c, i), oracle::cosine(pool.row(i), protos[c].vector), kRel, kZero);
            weights.check(ok);
            ++weights.instances;
        }
        // threshold_stats
        {
            std::vector<double> w(pick(rng, 2, 320));
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            const double offset = t % 4 == 0 ? 0.9 : 0.0;
            for (auto& v : w) v = std::clamp(offset + (t % 5 == 0 ? std::round(u(rng) * 4) / 4 : u(rng)), -1.0, 1.0);
            const auto got = threshold_stats(w);
            const auto expect = oracle::population_stats(w);
            stats.check(oracle::close(got.mean, expect.mean, kRel, kZero) &&
                        oracle::close(got.stddev, expect.stddev, kRel, kZero));
            ++stats.instances;
        }
        // filter_once
        {
            std::vector<std::vector<double>> w(pick(rng, 1, 6));
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            std::vector<double> all;
            for (auto& sample : w) {
                sample.resize(pick(rng, 1, 64));
                for (auto& v : sample) v = t % 2 ? std::round(u(rng) * 8) / 8 : u(rng);
                all.insert(all.end(), sample.begin(), sample.end());
            }
            FilterConfig cfg;
            const double fractions[] = {0.01, 0.1, 0.25, 0.5, 1.0};
            cfg.min_keep_fraction = fractions[t % 5];
            const ThresholdStats st = all.size() >= 2 && t % 7 != 0 ? threshold_stats(all)
                                                                   : ThresholdStats{u(rng), std::abs(u(rng))};
            const auto got = filter_once(w, st, cfg);
            bool ok = got.size() == w.size();
            for (std::size_t m = 0; ok && m < w.size(); ++m) {
                std::vector<std::size_t> cand(w[m].size());
                std::iota(cand.begin(), cand.end(), 0);
                ok = got[m] == oracle::keep(w[m], cand, st.threshold(),
                                            oracle::floor_count(w[m].size(), cfg.min_keep_fraction));
            }
            once.check(ok);
            ++once.instances;
        }
        // image_to_class_score
        {
            const auto query = oracle::random_matrix(rng, dim, pick(rng, 1, 64), 0.1, 0.03);
            const std::size_t k_bar = pick(rng, 1, 5);
            const double got = image_to_class_score(query, pool, {k_bar});
            i2c.check(oracle::close(got, oracle::image_to_class(oracle::rows_of(query), rows, k_bar), kRel, kZero));
            ++i2c.instances;
        }
    }

    const double elapsed = seconds_since(start);
    const std::pair<const char*, Tally*> all[] = {{"knn_indices", &knn},
                                                  {"neighborhood_representation", &nr},
                                                  {"descriptor_weights", &weights},
                                                  {"threshold_stats", &stats},
                                                  {"filter_once", &once},
                                                  {"image_to_class_score", &i2c}};
    bool pass = elapsed < 60.0;
    std::string detail;
    for (const auto& [name, tally] : all) {
        pass = pass && tally->instances >= 1000 && tally->mismatches == 0;
        detail += fmt("%s %zu/%zu; ", name, tally->instances - tally->mismatches, tally->instances);
    }
    detail += fmt("%.1fs (limit 60s)", elapsed);
    report("oracle equivalence", pass, detail);
}

// ---------------------------------------------------------------------------

void pipeline_invariants() {
    const auto start = Clock::now();
    std::mt19937_64 rng(202);

    // Scale invariance through the whole pipeline. Power-of-two factors keep
    // every intermediate exact, so equality is required bit for bit.
    std::size_t scale_cases = 0, scale_bad = 0;
    const float factors[] = {0.125f, 4.0f, 1024.0f};
    SyntheticSpec bench;
    const auto syn = generate_synthetic(bench);
    for (std::size_t t = 0; t < 400; ++t) {
        const Episode e = t % 2 ? random_episode(rng, pick(rng, 2, 5), pick(rng, 1, 3), pick(rng, 2, 12), 4, 4, 6)
                                : sample_episode(syn.dataset, 5, 1 + t % 3, 3, t);
        PipelineConfig p;
        p.normalization = t % 4 < 2 ? NormalizationMode::none : NormalizationMode::l2;
        p.filter.mode = t % 3 == 0 ? FilterMode::per_class : FilterMode::averaged;
        p.query_stats = t % 5 == 0 ? QueryStats::support : QueryStats::own;
        const auto base = run_pipeline(e, p);
        for (float s : factors) {
            const auto other = run_pipeline(scaled(e, s), p);
            bool same = other.support_kept == base.support_kept && other.query_kept == base.query_kept &&
                        other.support_filter->weights == base.support_filter->weights &&
                        other.query_filter->weights == base.query_filter->weights;
            for (std::size_t q = 0; q < base.query_scores.size(); ++q)
                same = same && other.query_scores[q].predicted == base.query_scores[q].predicted &&
                       other.query_scores[q].scores == base.query_scores[q].scores;
            ++scale_cases;
            scale_bad += same ? 0 : 1;
        }
    }

    // Softmax normalization.
    std::size_t softmax_bad = 0;
    double worst_sum = 0.0;
    std::uniform_real_distribution<double> u(-1e4, 1e4);
    for (std::size_t t = 0; t < 10000; ++t) {
        std::vector<double> s(pick(rng, 1, 20));
        for (auto& v : s) v = t % 3 ? u(rng) : std::round(u(rng) / 1000) * 1000;
        const auto p = softmax(s);
        const double sum = std::accumulate(p.begin(), p.end(), 0.0);
        worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
        const bool bounded = std::all_of(p.begin(), p.end(), [](double x) { return x >= 0.0 && x <= 1.0; });
        softmax_bad += std::abs(sum - 1.0) <= 1e-6 && bounded ? 0 : 1;
    }

    // Termination and monotone shrinkage of the support loop.
    std::size_t loops = 0, over_budget = 0, not_shrinking = 0;
    const double stops[] = {1.5, 2.0, 4.0, 1e12};
    for (std::size_t t = 0; t < 10000; ++t) {
        const std::size_t side = pick(rng, 2, 5);
        const Episode e = random_episode(rng, pick(rng, 2, 5), pick(rng, 1, 3), pick(rng, 2, 8), side, side, 0);
        FilterConfig cfg;
        cfg.max_iterations = pick(rng, 1, 10);
        cfg.c_stop = stops[t % 4];
        cfg.min_keep_fraction = t % 2 ? 0.1 : 0.3;
        cfg.mode = t % 3 == 0 ? FilterMode::per_class : FilterMode::averaged;
        std::vector<DescriptorMatrix> nr;
        for (const auto& s : e.support) {
            nr.push_back(t % 2 ? s.descriptors.matrix()
                               : neighborhood_representation(s.descriptors.matrix(), {std::min<std::size_t>(3, side * side - 1), false}));
        }
        const auto r = iterative_filter_support(e, nr, cfg).result;
        ++loops;
        if (r.iterations > cfg.max_iterations) ++over_budget;
        bool shrinking = true;
        for (std::size_t i = 1; i < r.trace.size(); ++i)
            for (std::size_t m = 0; m < r.kept.size(); ++m)
                shrinking = shrinking && subset(r.trace[i].kept[m], r.trace[i - 1].kept[m]);
        for (std::size_t m = 0; m < r.kept.size(); ++m)
            shrinking = shrinking && subset(r.kept[m], r.trace.back().kept[m]);
        not_shrinking += shrinking ? 0 : 1;
    }

    const double elapsed = seconds_since(start);
    report("pipeline invariants",
           scale_bad == 0 && softmax_bad == 0 && over_budget == 0 && not_shrinking == 0 && elapsed < 120.0,
           fmt("scale %zu/%zu; softmax %zu/10000 (max |sum-1| %.1e); termination %zu/%zu; "
               "shrinkage %zu/%zu; %.1fs (limit 120s)",
               scale_cases - scale_bad, scale_cases, 10000 - softmax_bad, worst_sum, loops - over_budget, loops,
               loops - not_shrinking, loops, elapsed));
}

// ---------------------------------------------------------------------------

RunConfig benchmark(std::size_t episodes) {
    RunConfig cfg;
    cfg.source.synthetic = SyntheticSpec{};
    cfg.episodes.episodes = episodes;
    return cfg;
}

void ablation() {
    const auto start = Clock::now();
    constexpr double kRecallThreshold = 0.90;
    const RunConfig full = benchmark(1000);
    RunConfig no_filter = full, no_nr = full;
    no_filter.pipeline.use_filter = false;
    no_nr.pipeline.use_neighborhood = false;

    const auto syn = generate_synthetic(*full.source.synthetic);
    const auto a = run(full, syn.dataset, &syn.masks);
    const auto b = run(no_filter, syn.dataset, &syn.masks);
    const auto c = run(no_nr, syn.dataset, &syn.masks);
    const double elapsed = seconds_since(start);

    const auto filter_gain = compare_paired(b, a);
    const auto nr_gain = compare_paired(c, a);
    const double recall = a.support_masks && a.support_masks->background_recall ? *a.support_masks->background_recall : 0.0;
    const bool in_time = elapsed < 300.0;
    report("ablation (a) filter on vs off", filter_gain.z() > 3.0 && in_time,
           fmt("%.4f vs %.4f, paired diff %+.4f, z = %.1f (need > 3)", a.mean_accuracy, b.mean_accuracy,
               filter_gain.mean_difference, filter_gain.z()));
    report("ablation (b) NR on vs off", nr_gain.z() > 3.0 && in_time,
           fmt("%.4f vs %.4f, paired diff %+.4f, z = %.1f (need > 3)", a.mean_accuracy, c.mean_accuracy,
               nr_gain.mean_difference, nr_gain.z()));
    report("ablation (c) background recall", recall >= kRecallThreshold && in_time,
           fmt("support recall %.4f (need >= %.2f); %.1fs for all three runs (limit 300s)", recall, kRecallThreshold,
               elapsed));
}

void chance_level() {
    const auto start = Clock::now();
    RunConfig cfg = benchmark(1000);
    cfg.source.synthetic->signal_to_noise = 0.0;
    const auto r = run(cfg);
    const double se = r.ci95 / 1.96;
    const double gap = std::abs(r.mean_accuracy - 0.2);
    report("chance level", gap <= 3.0 * se && gap <= 0.04,
           fmt("accuracy %.4f, |acc-0.2| = %.4f, 3 SE = %.4f; %.1fs", r.mean_accuracy, gap, 3.0 * se,
               seconds_since(start)));
}

// ---------------------------------------------------------------------------

// Descriptors with equal-magnitude power-of-two entries: norms are powers of
// two, so L2 normalization and every cosine is exact in any precision.
DescriptorMatrix dyadic_matrix(std::mt19937_64& rng, std::size_t dim, std::size_t count) {
    DescriptorMatrix m(dim);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t nonzero = dim >= 16 && rng() % 3 == 0 ? 16 : (dim >= 4 && rng() % 2 ? 4 : 1);
        std::vector<std::size_t> idx(dim);
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        const float mag = std::ldexp(1.0f, static_cast<int>(pick(rng, 0, 6)) - 3);
        std::vector<float> v(dim, 0.0f);
        for (std::size_t j = 0; j < nonzero; ++j) v[idx[j]] = rng() % 2 ? mag : -mag;
        m.append(v);
    }
    return m;
}

void dn4_baseline() {
    std::mt19937_64 rng(303);
    PipelineConfig p;
    p.normalization = NormalizationMode::l2;
    p.use_neighborhood = false;
    p.use_filter = false;
    std::size_t exact_cases = 0, exact_bad = 0, generic_cases = 0, generic_bad = 0;

    for (std::size_t t = 0; t < 600; ++t) {
        const bool dyadic = t % 2 == 0;
        const std::size_t n_way = pick(rng, 2, 5), k_shot = pick(rng, 1, 3);
        const std::size_t dim = dyadic ? (t % 4 == 0 ? 16 : 4 + pick(rng, 0, 12)) : pick(rng, 2, 16);
        const std::pair<std::size_t, std::size_t> shapes[] = {{1, 1}, {2, 2}, {1, 8}, {2, 4}, {2, 3}};
        const auto [h, w] = shapes[t % 5];
        auto make = [&] {
            return dyadic ? dyadic_matrix(rng, dim, h * w) : oracle::random_matrix(rng, dim, h * w, 0.1, 0.05);
        };
        Episode e;
        e.n_way = n_way;
        e.k_shot = k_shot;
        std::uint64_t id = 0;
        for (std::size_t c = 0; c < n_way; ++c) e.class_labels.push_back("k" + std::to_string(c));
        for (std::size_t m = 0; m < n_way * k_shot; ++m)
            e.support.push_back({DescriptorSet(dim, h, w, make()), e.class_labels[m / k_shot], id++});
        for (std::size_t q = 0; q < 2 * n_way; ++q)
            e.query.push_back({DescriptorSet(dim, h, w, make()), e.class_labels[q % n_way], id++});

        const auto out = run_pipeline(e, p);
        std::vector<oracle::Rows> pools(n_way);
        for (std::size_t m = 0; m < e.support.size(); ++m) {
            const auto r = oracle::l2_rows(oracle::rows_of(e.support[m].descriptors.matrix()));
            pools[m / k_shot].insert(pools[m / k_shot].end(), r.begin(), r.end());
        }
        for (std::size_t q = 0; q < e.query.size(); ++q) {
            const auto expect = oracle::dn4(oracle::l2_rows(oracle::rows_of(e.query[q].descriptors.matrix())), pools,
                                            p.classifier.k_bar);
            const auto& got = out.query_scores[q];
            bool ok = got.predicted == expect.predicted;
            for (std::size_t c = 0; c < n_way; ++c) {
                ok = ok && (dyadic ? got.scores[c] == static_cast<double>(expect.scores[c])
                                   : oracle::close(got.scores[c], expect.scores[c], kRel, kZero));
            }
            if (dyadic) {
                ++exact_cases;
                exact_bad += ok ? 0 : 1;
            } else {
                ++generic_cases;
                generic_bad += ok ? 0 : 1;
            }
        }
    }
    report("DN4 baseline reachability", exact_bad == 0 && generic_bad == 0,
           fmt("dyadic fixtures bit-exact %zu/%zu; generic fixtures %zu/%zu within 1e-6 with equal predictions",
               exact_cases - exact_bad, exact_cases, generic_cases - generic_bad, generic_cases));
}

void determinism() {
    const RunConfig cfg = benchmark(300);
    const auto serial = report_to_text(run(cfg));
    const auto parallel = report_to_text(run(cfg, {.threads = 4}));
    const auto again = report_to_text(run(cfg, {.threads = 1}));
    report("determinism", serial == parallel && serial == again,
           fmt("300 episodes, serial vs 4 threads vs repeat: %zu bytes each, %s", serial.size(),
               serial == parallel && serial == again ? "identical" : "DIFFERENT"));
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<void()>> criteria[] = {
        {"oracle equivalence", oracle_equivalence}, {"pipeline invariants", pipeline_invariants},
        {"ablation", ablation},                     {"chance level", chance_level},
        {"DN4 baseline reachability", dn4_baseline}, {"determinism", determinism}};
    for (const auto& [name, body] : criteria) {
        try {
            body();
        } catch (const std::exception& e) {
            report(name, false, std::string("threw: ") + e.what());
        }
    }
    std::printf("%s: %d failing\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
    return failures == 0 ? 0 : 1;
}
