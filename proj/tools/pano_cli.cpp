// Command-line front end. Every subcommand is a pure function of its input
// files and flags; dense data travels in the tensor container format, RGB
// output in binary PPM. Exit codes: 0 success, 2 malformed input file,
// 3 contract violation (bad flags, failed preconditions).
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pano/bench.hpp"
#include "pano/losses.hpp"
#include "pano/panofuse.hpp"
#include "pano/panometrics.hpp"
#include "pano/ppm.hpp"
#include "pano/pyramidnet.hpp"
#include "pano/render.hpp"
#include "pano/rng.hpp"
#include "pano/synth.hpp"
#include "pano/targetgen.hpp"
#include "pano/tensorfile.hpp"

namespace {

using namespace pano;

// -- shared file schemas ----------------------------------------------------

PanopticMap load_panoptic(const std::vector<StoredTensor>& ts) {
    PanopticMap pan;
    pan.labels = load_labels(find_tensor(ts, "panoptic"));
    pan.class_things = load_bytes(find_tensor(ts, "class_things"));
    validate(pan);
    return pan;
}

void append_panoptic(std::vector<StoredTensor>& ts, const PanopticMap& pan) {
    ts.push_back(store_labels("panoptic", pan.labels));
    ts.push_back(store_bytes("class_things", pan.class_things));
}

TargetSet load_targets(const std::vector<StoredTensor>& ts) {
    TargetSet t;
    t.semantic = load_labels(find_tensor(ts, "semantic"));
    t.center_heatmap = load_tensor3(find_tensor(ts, "center_heatmap"));
    t.offsets = load_tensor3(find_tensor(ts, "offsets"));
    t.offset_weights = load_tensor3(find_tensor(ts, "offset_weights"));
    return t;
}

PredictionSet load_predictions(const std::vector<StoredTensor>& ts) {
    PredictionSet p;
    p.sem_logits = load_tensor3(find_tensor(ts, "sem_logits"));
    p.center_heatmap = load_tensor3(find_tensor(ts, "center_heatmap"));
    p.offsets = load_tensor3(find_tensor(ts, "offsets"));
    return p;
}

std::vector<uint8_t> load_class_table(const std::vector<StoredTensor>& ts) {
    return load_bytes(find_tensor(ts, "class_things"));
}

// parse "HxW" into height and width
void parse_size(const std::string& s, int& h, int& w) {
    const size_t x = s.find('x');
    if (x == std::string::npos || x == 0 || x + 1 == s.size())
        throw std::invalid_argument("size must look like 512x1024");
    try {
        h = std::stoi(s.substr(0, x));
        w = std::stoi(s.substr(x + 1));
    } catch (const std::exception&) {
        throw std::invalid_argument("size must look like 512x1024");
    }
    if (h <= 0 || w <= 0) throw std::invalid_argument("size must be positive");
}

// -- params file ------------------------------------------------------------

void write_params_file(const std::string& path, const NetParams& params) {
    std::vector<StoredTensor> ts;
    StoredTensor cfg;
    cfg.name = "cfg";
    cfg.dims = {5};
    cfg.data = std::vector<uint32_t>{
        static_cast<uint32_t>(params.cfg.pyramid_levels),
        static_cast<uint32_t>(params.cfg.base_channels),
        static_cast<uint32_t>(params.cfg.upsample_channels),
        static_cast<uint32_t>(params.cfg.num_classes),
        params.cfg.share_skip_projections ? 1u : 0u};
    ts.push_back(std::move(cfg));
    for_each_buffer(params, [&](const std::string& name, const std::vector<float>& buf) {
        StoredTensor t;
        t.name = name;
        t.dims = {static_cast<uint32_t>(buf.size())};
        t.data = buf;
        ts.push_back(std::move(t));
    });
    write_tensors(path, ts);
}

NetParams load_params_file(const std::string& path) {
    const auto ts = read_tensors(path);
    const StoredTensor& cfg_t = find_tensor(ts, "cfg");
    if (cfg_t.dtype() != Dtype::u32 || cfg_t.count() != 5)
        throw format_error("params: cfg must be five u32 values");
    const auto& c = cfg_t.u32();
    NetConfig cfg;
    cfg.pyramid_levels = static_cast<int>(c[0]);
    cfg.base_channels = static_cast<int>(c[1]);
    cfg.upsample_channels = static_cast<int>(c[2]);
    cfg.num_classes = static_cast<int>(c[3]);
    cfg.share_skip_projections = c[4] != 0;
    cfg.seed = 0;
    NetParams params = init_params(cfg);
    for_each_buffer(params, [&](const std::string& name, std::vector<float>& buf) {
        const StoredTensor& t = find_tensor(ts, name);
        if (t.dtype() != Dtype::f32 || t.count() != buf.size())
            throw format_error("params: tensor has the wrong shape: " + name);
        buf = t.f32();
    });
    return params;
}

// -- subcommands ------------------------------------------------------------

int run_synth(uint64_t seed, const std::string& size, int min_inst, int max_inst,
              double separation, const std::string& out_path) {
    SceneSpec spec;
    spec.seed = seed;
    parse_size(size, spec.height, spec.width);
    spec.min_instances = min_inst;
    spec.max_instances = max_inst;
    spec.min_separation = separation;
    const SynthScene scene = synth_scene(spec);

    std::vector<StoredTensor> ts;
    ts.push_back(store_tensor3("image", scene.image));
    append_panoptic(ts, scene.gt);
    const std::string gen = kGeneratorName;
    ts.push_back(store_bytes("generator",
                             std::vector<uint8_t>(gen.begin(), gen.end())));
    write_tensors(out_path, ts);
    std::printf("scene %dx%d instances %zu -> %s\n", spec.height, spec.width,
                instance_centroids(scene.gt).size(), out_path.c_str());
    return 0;
}

int run_targets(const std::string& in_path, const std::string& out_path, double sigma,
                int regions) {
    const auto ts = read_tensors(in_path);
    const PanopticMap pan = load_panoptic(ts);
    TargetConfig cfg;
    cfg.sigma = sigma;
    if (regions > 0) cfg.ladder = WeightLadder::geometric(regions);
    const TargetSet targets = make_targets(pan, cfg);

    std::vector<StoredTensor> out;
    out.push_back(store_labels("semantic", targets.semantic));
    out.push_back(store_tensor3("center_heatmap", targets.center_heatmap));
    out.push_back(store_tensor3("offsets", targets.offsets));
    out.push_back(store_tensor3("offset_weights", targets.offset_weights));
    append_panoptic(out, pan);
    write_tensors(out_path, out);
    return 0;
}

int run_params(const std::string& out_path, int levels, int base_channels,
               int up_channels, int classes, uint64_t seed, bool unshared) {
    NetConfig cfg;
    cfg.pyramid_levels = levels;
    cfg.base_channels = base_channels;
    cfg.upsample_channels = up_channels;
    cfg.num_classes = classes;
    cfg.seed = seed;
    cfg.share_skip_projections = !unshared;
    write_params_file(out_path, init_params(cfg));
    return 0;
}

int run_forward(const std::string& image_path, const std::string& params_path,
                int levels, const std::string& out_path) {
    const auto ts = read_tensors(image_path);
    const Tensor3 image = load_tensor3(find_tensor(ts, "image"));
    const NetParams params = load_params_file(params_path);
    if (levels > 0 && levels != params.cfg.pyramid_levels)
        throw std::invalid_argument("forward: --levels disagrees with the params file");

    const PredictionSet preds = model_forward(image, params);
    std::vector<StoredTensor> out;
    out.push_back(store_tensor3("sem_logits", preds.sem_logits));
    out.push_back(store_tensor3("center_heatmap", preds.center_heatmap));
    out.push_back(store_tensor3("offsets", preds.offsets));
    if (const StoredTensor* table = find_tensor_opt(ts, "class_things"))
        out.push_back(*table);
    write_tensors(out_path, out);
    return 0;
}

int run_fuse(const std::string& preds_path, const std::string& oracle_csv,
             const std::string& targets_path, const FuseConfig& cfg,
             const std::string& out_path) {
    if (!oracle_csv.empty() && targets_path.empty())
        throw std::invalid_argument("fuse: --oracle needs --targets");

    const auto ts = read_tensors(preds_path);
    PredictionSet preds = load_predictions(ts);
    std::vector<uint8_t> class_things;
    if (const StoredTensor* table = find_tensor_opt(ts, "class_things"))
        class_things = table->u8();

    if (!oracle_csv.empty()) {
        OracleFlags flags;
        std::string token;
        for (size_t i = 0; i <= oracle_csv.size(); ++i) {
            if (i < oracle_csv.size() && oracle_csv[i] != ',') {
                token.push_back(oracle_csv[i]);
                continue;
            }
            if (token == "sem") {
                flags.semantic = true;
            } else if (token == "cen") {
                flags.centers = true;
            } else if (token == "off") {
                flags.offsets = true;
            } else {
                throw std::invalid_argument("fuse: unknown oracle tensor: " + token);
            }
            token.clear();
        }
        const auto target_ts = read_tensors(targets_path);
        preds = oracle_substitute(preds, load_targets(target_ts), flags);
        if (class_things.empty())
            class_things = load_class_table(target_ts);
    }
    if (class_things.empty())
        throw format_error("fuse: no class_things table in the inputs");

    const FuseResult fused = fuse_panoptic(preds, class_things, cfg);
    std::vector<StoredTensor> out;
    append_panoptic(out, fused.map);
    StoredTensor centers;
    centers.name = "centers";
    centers.dims = {static_cast<uint32_t>(fused.centers.size()), 3};
    std::vector<float> rows;
    for (const DetectedCenter& c : fused.centers) {
        rows.push_back(static_cast<float>(c.row));
        rows.push_back(static_cast<float>(c.col));
        rows.push_back(c.score);
    }
    centers.data = std::move(rows);
    out.push_back(std::move(centers));
    write_tensors(out_path, out);
    std::printf("fused %d instances\n", static_cast<int>(fused.centers.size()));
    return 0;
}

int run_loss(const std::string& preds_path, const std::string& targets_path,
             double lambda_cen, double lambda_baol, int regions) {
    const PredictionSet preds = load_predictions(read_tensors(preds_path));
    const auto target_ts = read_tensors(targets_path);
    TargetSet targets = load_targets(target_ts);
    if (regions > 0)
        targets.offset_weights = make_boundary_weights(
            load_panoptic(target_ts), WeightLadder::geometric(regions));

    LossConfig cfg;
    cfg.lambda_cen = lambda_cen;
    cfg.lambda_baol = lambda_baol;
    const CompoundLoss loss = compound_loss(preds, targets, cfg);
    std::printf("lambda_sem %.17g\n", loss.lambda_sem);
    std::printf("lambda_cen %.17g\n", loss.lambda_cen);
    std::printf("lambda_baol %.17g\n", loss.lambda_off);
    std::printf("sem %.17g\n", loss.sem);
    std::printf("cen %.17g\n", loss.cen);
    std::printf("baol %.17g\n", loss.off);
    std::printf("total %.17g\n", loss.total);
    return 0;
}

int run_eval(const std::string& metric, const std::string& pred_path,
             const std::string& gt_path) {
    const auto pred_ts = read_tensors(pred_path);
    const auto gt_ts = read_tensors(gt_path);
    const PanopticMap pred = load_panoptic(pred_ts);
    const PanopticMap gt = load_panoptic(gt_ts);

    if (metric == "pq") {
        std::fputs(to_text(panoptic_quality(pred, gt)).c_str(), stdout);
        return 0;
    }
    if (metric == "miou") {
        const auto classes_of = [](const PanopticMap& pan) {
            LabelGrid out(pan.height(), pan.width(), 0);
            for (size_t i = 0; i < pan.labels.size(); ++i)
                out.data[i] = class_of(pan.labels.data[i]);
            return out;
        };
        const MiouReport r = miou(classes_of(pred), classes_of(gt),
                                  static_cast<int>(gt.class_things.size()));
        std::fputs(to_text(r).c_str(), stdout);
        return 0;
    }
    if (metric == "ap") {
        std::vector<DetectedCenter> centers;
        if (const StoredTensor* t = find_tensor_opt(pred_ts, "centers")) {
            if (t->dtype() != Dtype::f32 || t->dims.size() != 2 || t->dims[1] != 3)
                throw format_error("eval: centers must be f32 [K,3]");
            const auto& v = t->f32();
            for (uint32_t k = 0; k < t->dims[0]; ++k)
                centers.push_back({static_cast<int>(v[k * 3 + 0]),
                                   static_cast<int>(v[k * 3 + 1]), v[k * 3 + 2],
                                   static_cast<int>(k) + 1});
        }
        const ApReport r =
            average_precision({pred_instances(pred, centers)}, {gt_instances(gt)});
        std::fputs(to_text(r).c_str(), stdout);
        return 0;
    }
    throw std::invalid_argument("eval: metric must be pq, miou or ap");
}

int run_render(const std::string& what, const std::string& in_path,
               const std::string& out_path) {
    const auto ts = read_tensors(in_path);
    if (what == "pan") {
        write_ppm(out_path, render_panoptic(load_panoptic(ts)));
        return 0;
    }
    if (what == "offsets") {
        write_ppm(out_path, render_offsets(load_tensor3(find_tensor(ts, "offsets"))));
        return 0;
    }
    throw std::invalid_argument("render: target must be pan or offsets");
}

int run_bench(const std::string& size, int threads, int reps, uint64_t seed,
              int levels, int base_channels, int up_channels) {
    SceneSpec spec;
    spec.seed = seed;
    parse_size(size, spec.height, spec.width);
    NetConfig net;
    net.pyramid_levels = levels;
    net.base_channels = base_channels;
    net.upsample_channels = up_channels;
    net.num_classes = static_cast<int>(spec.class_things.size());
    net.seed = seed;
    const BenchReport r = bench_pipeline(spec, net, FuseConfig{}, threads, reps);
    std::printf("size %dx%d\nthreads %d\nreps %d\n", r.height, r.width, r.threads,
                r.reps);
    const auto line = [](const char* stage, const StageTiming& t) {
        std::printf("%s mean %.9f stdev %.9f\n", stage, t.mean_s, t.stdev_s);
    };
    line("forward", r.forward);
    line("nms", r.nms);
    line("assign", r.assign);
    line("vote", r.vote);
    line("construct", r.construct);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"panoptic segmentation workbench"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a seeded synthetic scene");
    uint64_t synth_seed = 1;
    std::string synth_size = "64x96", synth_out;
    int synth_min = 3, synth_max = 8;
    double synth_sep = 8.0;
    synth->add_option("--seed", synth_seed, "scene seed");
    synth->add_option("--size", synth_size, "image size HxW");
    synth->add_option("--min-instances", synth_min, "fewest instances");
    synth->add_option("--max-instances", synth_max, "most instances");
    synth->add_option("--separation", synth_sep, "minimum centroid distance");
    synth->add_option("-o,--out", synth_out, "output scene file")->required();

    // targets
    auto* targets = app.add_subcommand("targets", "ground-truth training targets");
    std::string targets_in, targets_out;
    double targets_sigma = 5.0;
    int targets_regions = 0;
    targets->add_option("scene", targets_in, "scene file with a panoptic map")->required();
    targets->add_option("-o,--out", targets_out, "output targets file")->required();
    targets->add_option("--sigma", targets_sigma, "center heatmap spread");
    targets->add_option("--regions", targets_regions, "geometric weight ladder regions");

    // params
    auto* params = app.add_subcommand("params", "initialize network parameters");
    std::string params_out;
    int params_levels = 3, params_base = 8, params_up = 32, params_classes = 5;
    uint64_t params_seed = 1;
    bool params_unshared = false;
    params->add_option("-o,--out", params_out, "output params file")->required();
    params->add_option("--levels", params_levels, "pyramid levels 1..3");
    params->add_option("--base-channels", params_base, "backbone width");
    params->add_option("--up-channels", params_up, "upsample path width");
    params->add_option("--classes", params_classes, "semantic classes");
    params->add_option("--seed", params_seed, "init seed");
    params->add_flag("--unshared-skips", params_unshared,
                     "per-level skip projections");

    // forward
    auto* forward = app.add_subcommand("forward", "run the network on an image");
    std::string forward_image, forward_params, forward_out;
    int forward_levels = 0;
    forward->add_option("image", forward_image, "file holding an image tensor")->required();
    forward->add_option("--params", forward_params, "params file")->required();
    forward->add_option("--levels", forward_levels, "expected pyramid levels")
        ->check(CLI::Range(1, 3));
    forward->add_option("-o,--out", forward_out, "output predictions file")->required();

    // fuse
    auto* fuse = app.add_subcommand("fuse", "panoptic fusion of predictions");
    std::string fuse_preds, fuse_oracle, fuse_targets, fuse_out;
    FuseConfig fuse_cfg;
    fuse->add_option("preds", fuse_preds, "predictions file")->required();
    fuse->add_option("--oracle", fuse_oracle, "replace tensors: sem,cen,off");
    fuse->add_option("--targets", fuse_targets, "targets file for oracle tensors");
    fuse->add_option("--nms-window", fuse_cfg.nms_window, "nms window size");
    fuse->add_option("--nms-threshold", fuse_cfg.nms_threshold, "peak threshold");
    fuse->add_option("--max-centers", fuse_cfg.max_centers, "detection cap");
    fuse->add_option("--min-stuff-area", fuse_cfg.min_stuff_area,
                     "small stuff regions go void");
    fuse->add_option("-o,--out", fuse_out, "output panoptic file")->required();

    // loss
    auto* loss = app.add_subcommand("loss", "compound loss of predictions");
    std::string loss_preds, loss_targets;
    double loss_lambda_cen = 200.0, loss_lambda_baol = 0.0025;
    int loss_regions = 0;
    loss->add_option("preds", loss_preds, "predictions file")->required();
    loss->add_option("targets", loss_targets, "targets file")->required();
    loss->add_option("--lambda-cen", loss_lambda_cen, "center loss weight");
    loss->add_option("--lambda-baol", loss_lambda_baol, "offset loss weight");
    loss->add_option("--regions", loss_regions,
                     "rebuild boundary weights with this many regions");

    // eval
    auto* eval = app.add_subcommand("eval", "metrics between two panoptic files");
    std::string eval_metric, eval_pred, eval_gt;
    eval->add_option("metric", eval_metric, "pq, miou or ap")->required();
    eval->add_option("pred", eval_pred, "predicted panoptic file")->required();
    eval->add_option("gt", eval_gt, "ground-truth panoptic file")->required();

    // render
    auto* render = app.add_subcommand("render", "visualize maps or offsets");
    std::string render_what, render_in, render_out;
    render->add_option("what", render_what, "pan or offsets")->required();
    render->add_option("input", render_in, "input tensor file")->required();
    render->add_option("-o,--out", render_out, "output ppm")->required();

    // bench
    auto* bench = app.add_subcommand("bench", "pipeline throughput");
    std::string bench_size = "128x256";
    int bench_threads = 1, bench_reps = 5, bench_levels = 1, bench_base = 4,
        bench_up = 16;
    uint64_t bench_seed = 1;
    bench->add_option("--size", bench_size, "image size HxW");
    bench->add_option("--threads", bench_threads, "assignment threads");
    bench->add_option("--reps", bench_reps, "repetitions, at least 5");
    bench->add_option("--seed", bench_seed, "scene and params seed");
    bench->add_option("--levels", bench_levels, "pyramid levels 1..3");
    bench->add_option("--base-channels", bench_base, "backbone width");
    bench->add_option("--up-channels", bench_up, "upsample path width");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 3;
    }

    try {
        if (*synth)
            return run_synth(synth_seed, synth_size, synth_min, synth_max, synth_sep,
                             synth_out);
        if (*targets)
            return run_targets(targets_in, targets_out, targets_sigma, targets_regions);
        if (*params)
            return run_params(params_out, params_levels, params_base, params_up,
                              params_classes, params_seed, params_unshared);
        if (*forward)
            return run_forward(forward_image, forward_params, forward_levels, forward_out);
        if (*fuse) return run_fuse(fuse_preds, fuse_oracle, fuse_targets, fuse_cfg, fuse_out);
        if (*loss)
            return run_loss(loss_preds, loss_targets, loss_lambda_cen, loss_lambda_baol,
                            loss_regions);
        if (*eval) return run_eval(eval_metric, eval_pred, eval_gt);
        if (*render) return run_render(render_what, render_in, render_out);
        if (*bench)
            return run_bench(bench_size, bench_threads, bench_reps, bench_seed,
                             bench_levels, bench_base, bench_up);
    } catch (const io_error& e) {
        std::fprintf(stderr, "pano: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "pano: %s\n", e.what());
        return 3;
    }
    return 3;
}
