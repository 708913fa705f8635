// Throughput harness: times the forward pass and each post-processing stage
// over repeated runs of one synthetic scene. The assignment stage is the only
// multi-threaded code path in the project; it partitions rows into bands that
// write disjoint output regions, so every thread count produces bit-identical
// maps. Timings are informative, determinism is the contract.
#pragma once

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>
#include <vector>

#include "pano/panofuse.hpp"
#include "pano/pyramidnet.hpp"
#include "pano/synth.hpp"

namespace pano {

inline LabelGrid assign_instances_threaded(const Tensor3& offsets,
                                           const BinaryMask& thing_mask,
                                           const std::vector<DetectedCenter>& centers,
                                           int threads) {
    if (offsets.channels != 2 || offsets.height != thing_mask.height ||
        offsets.width != thing_mask.width)
        throw std::invalid_argument("assign_instances_threaded: offsets/mask shape mismatch");
    if (threads < 1)
        throw std::invalid_argument("assign_instances_threaded: thread count must be positive");
    LabelGrid out(thing_mask.height, thing_mask.width, 0);
    if (centers.empty()) return out;

    const int h = thing_mask.height;
    const int bands = std::min(threads, h);
    if (bands == 1) {
        detail::assign_rows(offsets, thing_mask, centers, 0, h, out);
        return out;
    }
    std::vector<std::thread> pool;
    pool.reserve(bands);
    for (int b = 0; b < bands; ++b) {
        const int y0 = h * b / bands;
        const int y1 = h * (b + 1) / bands;
        pool.emplace_back([&, y0, y1] {
            detail::assign_rows(offsets, thing_mask, centers, y0, y1, out);
        });
    }
    for (std::thread& t : pool) t.join();
    return out;
}

struct StageSeconds {
    double forward = 0.0, nms = 0.0, assign = 0.0, vote = 0.0, construct = 0.0;
};

// fuse_panoptic with a stopwatch around each stage. The semantic argmax and
// thing-mask derivation are charged to the assign stage they feed.
inline FuseResult fuse_panoptic_timed(const PredictionSet& preds,
                                      const std::vector<uint8_t>& class_things,
                                      const FuseConfig& cfg, int threads,
                                      StageSeconds& times) {
    using clock = std::chrono::steady_clock;
    const auto seconds = [](clock::time_point a, clock::time_point b) {
        return std::chrono::duration<double>(b - a).count();
    };
    cfg.validate();

    auto t0 = clock::now();
    const auto centers = nms_centers(preds.center_heatmap, cfg);
    auto t1 = clock::now();
    times.nms = seconds(t0, t1);

    const LabelGrid sem = argmax_channel(preds.sem_logits);
    BinaryMask thing_mask(sem.height, sem.width, false);
    for (size_t i = 0; i < sem.size(); ++i) {
        const uint32_t cls = sem.data[i];
        if (cls < class_things.size() && class_things[cls] != 0) thing_mask.data[i] = 1;
    }
    const LabelGrid ranks = assign_instances_threaded(preds.offsets, thing_mask,
                                                      centers, threads);
    auto t2 = clock::now();
    times.assign = seconds(t1, t2);

    const auto votes = vote_semantics(ranks, sem, class_things);
    auto t3 = clock::now();
    times.vote = seconds(t2, t3);

    FuseResult out = construct_panoptic(sem, ranks, votes, class_things, centers, cfg);
    times.construct = seconds(t3, clock::now());
    return out;
}

struct StageTiming {
    double mean_s = 0.0, stdev_s = 0.0;
};

struct BenchReport {
    int height = 0, width = 0;
    int threads = 1, reps = 0;
    StageTiming forward, nms, assign, vote, construct;
    FuseResult result;  // map from the last repetition, for determinism checks
};

inline BenchReport bench_pipeline(const SceneSpec& spec, const NetConfig& net_cfg,
                                  const FuseConfig& fuse_cfg, int threads, int reps) {
    if (reps < 5) throw std::invalid_argument("bench_pipeline: need at least 5 repetitions");
    if (threads < 1) throw std::invalid_argument("bench_pipeline: thread count must be positive");

    const SynthScene scene = synth_scene(spec);
    const NetParams params = init_params(net_cfg);

    std::vector<StageSeconds> samples;
    BenchReport report;
    report.height = spec.height;
    report.width = spec.width;
    report.threads = threads;
    report.reps = reps;
    for (int r = 0; r < reps; ++r) {
        StageSeconds s;
        const auto t0 = std::chrono::steady_clock::now();
        const PredictionSet preds = model_forward(scene.image, params);
        s.forward = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                        .count();
        report.result = fuse_panoptic_timed(preds, scene.gt.class_things, fuse_cfg,
                                            threads, s);
        samples.push_back(s);
    }

    const auto reduce = [&](double StageSeconds::* field) {
        StageTiming t;
        for (const StageSeconds& s : samples) t.mean_s += s.*field;
        t.mean_s /= samples.size();
        double acc = 0.0;
        for (const StageSeconds& s : samples) {
            const double d = s.*field - t.mean_s;
            acc += d * d;
        }
        t.stdev_s = std::sqrt(acc / (samples.size() - 1));
        return t;
    };
    report.forward = reduce(&StageSeconds::forward);
    report.nms = reduce(&StageSeconds::nms);
    report.assign = reduce(&StageSeconds::assign);
    report.vote = reduce(&StageSeconds::vote);
    report.construct = reduce(&StageSeconds::construct);
    return report;
}

}  // namespace pano
