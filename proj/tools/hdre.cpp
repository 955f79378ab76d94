#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hdre/checkpoint.hpp"
#include "hdre/errors.hpp"
#include "hdre/fusion.hpp"
#include "hdre/hdr_io.hpp"
#include "hdre/metrics.hpp"
#include "hdre/png_io.hpp"
#include "hdre/rng.hpp"
#include "hdre/synth.hpp"
#include "hdre/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIntegrity = 3;

bool g_json_log = false;

void log_line(const std::string& event, const json& fields) {
    if (g_json_log) {
        json j = fields;
        j["event"] = event;
        std::cerr << j.dump() << "\n";
    } else {
        std::cerr << event;
        for (const auto& [k, v] : fields.items())
            std::cerr << " " << k << "=" << (v.is_string() ? v.get<std::string>() : v.dump());
        std::cerr << "\n";
    }
}

// Config file values fill in flags the user did not pass; flags win.
json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream f(path);
    if (!f) throw hdre::InputError("cannot open config file: " + path);
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw hdre::InputError("config file is not valid JSON: " + std::string(e.what()));
    }
}

template <typename T>
void fill_from_config(const json& cfg, const CLI::Option* opt, const char* key, T& value) {
    if (opt->count() > 0) return;
    auto it = cfg.find(key);
    if (it == cfg.end()) return;
    try {
        value = it->get<T>();
    } catch (const json::exception&) {
        throw hdre::InputError(std::string("config key has the wrong type: ") + key);
    }
}

struct Corpus {
    std::vector<hdre::img::HdrImage> images;
    std::vector<std::string> ids;
};

Corpus load_hdr_dir(const std::string& dir) {
    if (!fs::is_directory(dir)) throw hdre::InputError("not a directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".hdr")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    Corpus corpus;
    for (const fs::path& p : files) {
        try {
            corpus.images.push_back(hdre::img::read_radiance_hdr_file(p));
            corpus.ids.push_back(p.stem().string());
        } catch (const hdre::Error& e) {
            log_line("warning", {{"file", p.string()}, {"reason", e.what()}});
        }
    }
    if (corpus.images.empty()) throw hdre::InputError("no readable .hdr files in " + dir);
    return corpus;
}

int cmd_synth(const std::string& hdr_dir, const std::string& out_dir, int count,
              std::uint64_t seed, int size) {
    Corpus corpus = load_hdr_dir(hdr_dir);
    fs::create_directories(out_dir);
    for (int i = 0; i < count; ++i) {
        const std::size_t src = static_cast<std::size_t>(i) % corpus.images.size();
        const auto pair = hdre::synth::generate_pair(
            corpus.images[src], hdre::util::Rng::derive(seed, static_cast<std::uint64_t>(i)),
            corpus.ids[src], size);
        char id[16];
        std::snprintf(id, sizeof(id), "%06d", i);
        const fs::path base = fs::path(out_dir) / id;
        hdre::img::write_png_file(pair.input, base.string() + "_x.png");
        hdre::img::write_png_file(pair.target, base.string() + "_y.png");
        std::ofstream(base.string() + ".json") << hdre::synth::provenance_to_json(pair.prov);
    }
    log_line("synth_done", {{"pairs", count}, {"dir", out_dir}});
    return kExitOk;
}

int cmd_train(const std::string& hdr_dir, const hdre::train::TrainConfig& cfg) {
    Corpus corpus = load_hdr_dir(hdr_dir);
    const auto result = hdre::train::train(corpus.images, corpus.ids, cfg, &std::cerr);
    log_line("train_done", {{"steps", result.steps},
                            {"final_loss", result.final_loss},
                            {"checkpoint", result.final_checkpoint}});
    return kExitOk;
}

int cmd_enhance(const std::string& ckpt, const std::string& input, const std::string& output) {
    hdre::nn::Network net = hdre::nn::load_checkpoint(ckpt);

    std::vector<std::pair<fs::path, fs::path>> jobs;
    if (fs::is_directory(input)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(input))
            if (entry.is_regular_file() && entry.path().extension() == ".png")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw hdre::InputError("no .png files in " + input);
        fs::create_directories(output);
        for (const fs::path& f : files) jobs.emplace_back(f, fs::path(output) / f.filename());
    } else {
        jobs.emplace_back(input, output);
    }

    for (const auto& [in_path, out_path] : jobs) {
        const hdre::img::LdrImage src = hdre::img::read_png_file(in_path);
        hdre::img::write_png_file(hdre::nn::enhance_image(net, src), out_path);
        log_line("enhanced", {{"input", in_path.string()}, {"output", out_path.string()}});
    }
    return kExitOk;
}

int cmd_eval(const std::string& hdr_dir, const std::string& ckpt, const std::string& methods_csv,
             std::uint64_t seed, int size, const std::string& report_path,
             const std::string& aggregate_path) {
    hdre::metrics::EvalConfig cfg;
    cfg.seed = seed;
    cfg.size = size;
    cfg.methods.clear();
    std::string token;
    for (char c : methods_csv + ",") {
        if (c == ',') {
            if (!token.empty()) cfg.methods.push_back(token);
            token.clear();
        } else {
            token += c;
        }
    }
    if (cfg.methods.empty()) throw hdre::InputError("no methods requested");

    const bool wants_net = std::find(cfg.methods.begin(), cfg.methods.end(), "proposed") !=
                           cfg.methods.end();
    hdre::nn::Network* net = nullptr;
    std::unique_ptr<hdre::nn::Network> owned;
    if (wants_net) {
        if (ckpt.empty()) throw hdre::ConfigError("'proposed' requires --ckpt");
        owned = std::make_unique<hdre::nn::Network>(hdre::nn::load_checkpoint(ckpt));
        net = owned.get();
    }

    Corpus corpus = load_hdr_dir(hdr_dir);
    const auto report = hdre::metrics::evaluate(corpus.images, corpus.ids, cfg, net);
    std::ofstream(report_path) << hdre::metrics::report_to_csv(report);
    std::ofstream(aggregate_path) << hdre::metrics::aggregates_to_json(report);
    log_line("eval_done", {{"rows", report.rows.size()},
                           {"report", report_path},
                           {"aggregate", aggregate_path}});
    return kExitOk;
}

int cmd_fuse(const std::vector<std::string>& inputs, const std::string& output) {
    std::vector<hdre::img::HdrImage> floats;
    for (const std::string& p : inputs)
        floats.push_back(hdre::img::to_float(hdre::img::read_png_file(p)));
    const hdre::img::HdrImage fused = hdre::fusion::exposure_fuse(floats);
    hdre::img::write_png_file(hdre::img::quantize(fused), output);
    log_line("fuse_done", {{"inputs", inputs.size()}, {"output", output}});
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"HDR-supervised low-light image enhancement toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; explicit flags win");
    app.add_flag("--json-log", g_json_log, "machine-readable progress lines on stderr");

    // synth
    auto* synth = app.add_subcommand("synth", "Synthesize training pairs from HDR images");
    std::string s_hdr, s_out = "dataset";
    int s_count = 16, s_size = 256;
    std::uint64_t s_seed = 0;
    auto* s_hdr_o = synth->add_option("--hdr-dir", s_hdr, "directory of .hdr files");
    auto* s_out_o = synth->add_option("--out", s_out, "output directory");
    auto* s_count_o = synth->add_option("--count", s_count, "number of pairs");
    auto* s_seed_o = synth->add_option("--seed", s_seed, "master seed");
    auto* s_size_o = synth->add_option("--size", s_size, "patch resolution");

    // train
    auto* train = app.add_subcommand("train", "Train the enhancement network");
    std::string t_hdr, t_out = "run";
    hdre::train::TrainConfig tc;
    bool t_no_global = false;
    auto* t_hdr_o = train->add_option("--hdr-dir", t_hdr, "directory of .hdr files");
    auto* t_out_o = train->add_option("--out", t_out, "output directory");
    auto* t_epochs_o = train->add_option("--epochs", tc.epochs, "training epochs");
    auto* t_iters_o = train->add_option("--iters", tc.iterations_per_epoch, "iterations per epoch");
    auto* t_batch_o = train->add_option("--batch", tc.batch_size, "batch size");
    auto* t_ws_o = train->add_option("--width-scale", tc.width_scale, "channel width multiplier");
    auto* t_seed_o = train->add_option("--seed", tc.seed, "master seed");
    auto* t_ck_o = train->add_option("--ckpt-every", tc.checkpoint_every, "checkpoint cadence");
    auto* t_patch_o = train->add_option("--patch", tc.patch_size, "training patch size");
    auto* t_ng_o = train->add_flag("--no-global-encoder", t_no_global, "ablate the global branch");
    auto* t_pre_o = train->add_flag("--precompute", tc.precompute, "fixed pre-synthesized pool");

    // enhance
    auto* enhance = app.add_subcommand("enhance", "Enhance PNG images with a checkpoint");
    std::string e_ckpt, e_input, e_output = "enhanced.png";
    auto* e_ckpt_o = enhance->add_option("--ckpt", e_ckpt, "checkpoint file");
    auto* e_in_o = enhance->add_option("--input", e_input, "input PNG or directory");
    auto* e_out_o = enhance->add_option("--out", e_output, "output PNG or directory");

    // eval
    auto* eval = app.add_subcommand("eval", "Score methods on synthesized test renderings");
    std::string v_hdr, v_ckpt, v_methods = "input,he", v_report = "report.csv",
                           v_agg = "aggregate.json";
    std::uint64_t v_seed = 0;
    int v_size = 512;
    auto* v_hdr_o = eval->add_option("--hdr-dir", v_hdr, "directory of .hdr files");
    auto* v_ckpt_o = eval->add_option("--ckpt", v_ckpt, "checkpoint for 'proposed'");
    auto* v_methods_o = eval->add_option("--methods", v_methods, "comma list: input,he,proposed");
    auto* v_seed_o = eval->add_option("--seed", v_seed, "master seed");
    auto* v_size_o = eval->add_option("--size", v_size, "test rendering resolution");
    auto* v_report_o = eval->add_option("--report", v_report, "per-image CSV path");
    auto* v_agg_o = eval->add_option("--aggregate", v_agg, "aggregate JSON path");

    // fuse
    auto* fuse = app.add_subcommand("fuse", "Exposure-fuse PNG renderings");
    std::vector<std::string> f_inputs;
    std::string f_out = "fused.png";
    fuse->add_option("--inputs", f_inputs, "input PNG files")->expected(-1);
    auto* f_out_o = fuse->add_option("--out", f_out, "output PNG");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        const json cfg = load_config(config_path);
        if (synth->parsed()) {
            fill_from_config(cfg, s_hdr_o, "hdr_dir", s_hdr);
            fill_from_config(cfg, s_out_o, "out", s_out);
            fill_from_config(cfg, s_count_o, "count", s_count);
            fill_from_config(cfg, s_seed_o, "seed", s_seed);
            fill_from_config(cfg, s_size_o, "size", s_size);
            if (s_hdr.empty()) throw hdre::InputError("--hdr-dir is required");
            return cmd_synth(s_hdr, s_out, s_count, s_seed, s_size);
        }
        if (train->parsed()) {
            fill_from_config(cfg, t_hdr_o, "hdr_dir", t_hdr);
            fill_from_config(cfg, t_out_o, "out", t_out);
            fill_from_config(cfg, t_epochs_o, "epochs", tc.epochs);
            fill_from_config(cfg, t_iters_o, "iterations_per_epoch", tc.iterations_per_epoch);
            fill_from_config(cfg, t_batch_o, "batch_size", tc.batch_size);
            fill_from_config(cfg, t_ws_o, "width_scale", tc.width_scale);
            fill_from_config(cfg, t_seed_o, "seed", tc.seed);
            fill_from_config(cfg, t_ck_o, "checkpoint_every", tc.checkpoint_every);
            fill_from_config(cfg, t_patch_o, "patch_size", tc.patch_size);
            bool cfg_no_global = false;
            fill_from_config(cfg, t_ng_o, "no_global_encoder", cfg_no_global);
            t_no_global = t_no_global || cfg_no_global;
            bool cfg_pre = false;
            fill_from_config(cfg, t_pre_o, "precompute", cfg_pre);
            tc.precompute = tc.precompute || cfg_pre;
            if (t_hdr.empty()) throw hdre::InputError("--hdr-dir is required");
            tc.use_global_encoder = !t_no_global;
            tc.out_dir = t_out;
            return cmd_train(t_hdr, tc);
        }
        if (enhance->parsed()) {
            fill_from_config(cfg, e_ckpt_o, "ckpt", e_ckpt);
            fill_from_config(cfg, e_in_o, "input", e_input);
            fill_from_config(cfg, e_out_o, "out", e_output);
            if (e_ckpt.empty() || e_input.empty())
                throw hdre::InputError("--ckpt and --input are required");
            return cmd_enhance(e_ckpt, e_input, e_output);
        }
        if (eval->parsed()) {
            fill_from_config(cfg, v_hdr_o, "hdr_dir", v_hdr);
            fill_from_config(cfg, v_ckpt_o, "ckpt", v_ckpt);
            fill_from_config(cfg, v_methods_o, "methods", v_methods);
            fill_from_config(cfg, v_seed_o, "seed", v_seed);
            fill_from_config(cfg, v_size_o, "size", v_size);
            fill_from_config(cfg, v_report_o, "report", v_report);
            fill_from_config(cfg, v_agg_o, "aggregate", v_agg);
            if (v_hdr.empty()) throw hdre::InputError("--hdr-dir is required");
            return cmd_eval(v_hdr, v_ckpt, v_methods, v_seed, v_size, v_report, v_agg);
        }
        if (fuse->parsed()) {
            fill_from_config(cfg, f_out_o, "out", f_out);
            if (f_inputs.empty()) throw hdre::InputError("--inputs is required");
            return cmd_fuse(f_inputs, f_out);
        }
    } catch (const hdre::IntegrityError& e) {
        log_line("error", {{"kind", "integrity"}, {"message", e.what()}});
        return kExitIntegrity;
    } catch (const hdre::ConfigError& e) {
        log_line("error", {{"kind", "config"}, {"message", e.what()}});
        return kExitUsage;
    } catch (const hdre::FormatError& e) {
        log_line("error", {{"kind", "format"}, {"message", e.what()}});
        return kExitUsage;
    } catch (const hdre::Error& e) {
        log_line("error", {{"kind", "input"}, {"message", e.what()}});
        return kExitUsage;
    } catch (const std::exception& e) {
        log_line("error", {{"kind", "internal"}, {"message", e.what()}});
        return kExitUsage;
    }
    return kExitOk;
}
