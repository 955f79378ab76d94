#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hdre/adam.hpp"
#include "hdre/errors.hpp"
#include "hdre/network.hpp"
#include "hdre/train.hpp"
#include "support/checks.hpp"
#include "support/scene_gen.hpp"

using namespace hdre;
using nn::Tensor;

namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / "hdre_train_test" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

struct TinyParams {
    Tensor theta{1, 1, 2, 2};
    Tensor grad{1, 1, 2, 2};
    std::vector<nn::Param> view{{"theta", &theta, &grad}};
};

} // namespace

TEST_CASE("adam leaves parameters alone under zero gradient") {
    TinyParams p;
    p.theta.data = {1.0f, -2.0f, 3.0f, 0.5f};
    const auto before = p.theta.data;
    nn::AdamState state;
    nn::adam_step(p.view, state);
    nn::adam_step(p.view, state);
    CHECK(p.theta.data == before);
    CHECK(state.t == 2);
}

TEST_CASE("first adam step moves by alpha in the gradient direction") {
    TinyParams p;
    p.theta.data = {1.0f, 1.0f, 1.0f, 1.0f};
    p.grad.data = {0.5f, -0.25f, 3.0f, -8.0f};
    nn::AdamState state;
    nn::adam_step(p.view, state);
    for (std::size_t i = 0; i < 4; ++i) {
        const double sign = p.grad.data[i] > 0 ? 1.0 : -1.0;
        CHECK(p.theta.data[i] == doctest::Approx(1.0 - sign * state.cfg.alpha).epsilon(1e-5));
    }
}

TEST_CASE("adam steps stay bounded by twice the learning rate") {
    TinyParams p;
    util::Rng rng(4);
    test::fill_uniform(p.theta, rng, -1.0, 1.0);
    nn::AdamState state;
    for (int step = 0; step < 25; ++step) {
        const auto before = p.theta.data;
        for (float& g : p.grad.data)
            g = static_cast<float>(rng.normal(0.0, 1.0));
        nn::adam_step(p.view, state);
        for (std::size_t i = 0; i < 4; ++i)
            CHECK(std::abs(p.theta.data[i] - before[i]) <= 2.0f * 0.002f + 1e-9f);
    }
}

TEST_CASE("adam is deterministic across reruns") {
    const auto run = [] {
        TinyParams p;
        util::Rng rng(11);
        test::fill_uniform(p.theta, rng, -1.0, 1.0);
        nn::AdamState state;
        for (int step = 0; step < 10; ++step) {
            for (float& g : p.grad.data)
                g = static_cast<float>(rng.normal(0.0, 0.3));
            nn::adam_step(p.view, state);
        }
        return p.theta.data;
    };
    CHECK(run() == run());
}

TEST_CASE("adam rejects a resized parameter list") {
    TinyParams p;
    nn::AdamState state;
    nn::adam_step(p.view, state);
    Tensor extra{1, 1, 1, 1}, gextra{1, 1, 1, 1};
    auto longer = p.view;
    longer.push_back({"extra", &extra, &gextra});
    CHECK_THROWS_AS(nn::adam_step(longer, state), Error);
}

TEST_CASE("training writes the loss log, config echo and checkpoints") {
    const auto corpus = test::make_scenes(100, 4, 64, 64);
    const std::vector<std::string> ids = {"a", "b", "c", "d"};

    train::TrainConfig cfg;
    cfg.epochs = 2;
    cfg.iterations_per_epoch = 2;
    cfg.batch_size = 2;
    cfg.seed = 1;
    cfg.width_scale = 0.125f;
    cfg.checkpoint_every = 1;
    cfg.patch_size = 32;
    const fs::path dir = fresh_dir("basic");
    cfg.out_dir = dir.string();

    std::ostringstream progress;
    const train::TrainResult res = train::train(corpus, ids, cfg, &progress);
    CHECK(res.steps == 4);
    CHECK(std::isfinite(res.final_loss));
    CHECK(res.final_checkpoint == (dir / "ckpt_epoch2.nncp").string());
    CHECK(fs::exists(dir / "ckpt_epoch1.nncp"));
    CHECK(fs::exists(dir / "ckpt_epoch2.nncp"));
    CHECK(fs::exists(dir / "train_config.json"));

    const std::string log = slurp(dir / "loss.csv");
    std::istringstream lines(log);
    std::string line;
    REQUIRE(std::getline(lines, line));
    CHECK(line == "epoch,iter,loss");
    int rows = 0;
    while (std::getline(lines, line)) {
        ++rows;
        const auto last_comma = line.rfind(',');
        const double v = std::stod(line.substr(last_comma + 1));
        CHECK(std::isfinite(v));
    }
    CHECK(rows == 4);

    const std::string echoed = slurp(dir / "train_config.json");
    CHECK(echoed.find("\"batch_size\": 2") != std::string::npos);
    CHECK(echoed.find("\"corpus_size\": 4") != std::string::npos);
}

TEST_CASE("training is bit-reproducible for a fixed seed") {
    const auto corpus = test::make_scenes(200, 3, 48, 48);
    const std::vector<std::string> ids = {"x", "y", "z"};

    train::TrainConfig cfg;
    cfg.epochs = 2;
    cfg.iterations_per_epoch = 1;
    cfg.batch_size = 3;
    cfg.seed = 7;
    cfg.width_scale = 0.125f;
    cfg.checkpoint_every = 2;
    cfg.patch_size = 32;

    const fs::path d1 = fresh_dir("rep1"), d2 = fresh_dir("rep2");
    cfg.out_dir = d1.string();
    (void)train::train(corpus, ids, cfg, nullptr);
    cfg.out_dir = d2.string();
    (void)train::train(corpus, ids, cfg, nullptr);

    CHECK(slurp(d1 / "loss.csv") == slurp(d2 / "loss.csv"));
    CHECK(slurp(d1 / "ckpt_epoch2.nncp") == slurp(d2 / "ckpt_epoch2.nncp"));
}

TEST_CASE("a corpus smaller than the batch shrinks the batch with a warning") {
    const auto corpus = test::make_scenes(300, 2, 48, 48);
    const std::vector<std::string> ids = {"p", "q"};

    train::TrainConfig cfg;
    cfg.epochs = 1;
    cfg.iterations_per_epoch = 5;
    cfg.batch_size = 8;
    cfg.seed = 3;
    cfg.width_scale = 0.125f;
    cfg.patch_size = 16;
    cfg.out_dir = fresh_dir("small").string();

    std::ostringstream progress;
    const train::TrainResult res = train::train(corpus, ids, cfg, &progress);
    CHECK(res.steps == 1); // two images, batch shrunk to 2, one batch per epoch
    CHECK(progress.str().find("warning") != std::string::npos);
}

TEST_CASE("precomputed pools train deterministically") {
    const auto corpus = test::make_scenes(400, 2, 48, 48);
    const std::vector<std::string> ids = {"m", "n"};

    train::TrainConfig cfg;
    cfg.epochs = 3;
    cfg.iterations_per_epoch = 1;
    cfg.batch_size = 2;
    cfg.seed = 5;
    cfg.width_scale = 0.125f;
    cfg.checkpoint_every = 3;
    cfg.patch_size = 16;
    cfg.precompute = true;

    const fs::path d1 = fresh_dir("pre1"), d2 = fresh_dir("pre2");
    cfg.out_dir = d1.string();
    const auto r1 = train::train(corpus, ids, cfg, nullptr);
    cfg.out_dir = d2.string();
    const auto r2 = train::train(corpus, ids, cfg, nullptr);
    CHECK(r1.steps == 3);
    CHECK(r1.final_loss == r2.final_loss);
    CHECK(slurp(d1 / "ckpt_epoch3.nncp") == slurp(d2 / "ckpt_epoch3.nncp"));
}

TEST_CASE("invalid training configurations are rejected up front") {
    const auto corpus = test::make_scenes(500, 1, 48, 48);
    const std::vector<std::string> ids = {"only"};
    train::TrainConfig cfg;
    cfg.width_scale = 0.125f;
    cfg.out_dir = fresh_dir("bad").string();

    cfg.batch_size = 0;
    CHECK_THROWS_AS((void)train::train(corpus, ids, cfg, nullptr), ConfigError);
    cfg.batch_size = 1;
    cfg.patch_size = 20;
    CHECK_THROWS_AS((void)train::train(corpus, ids, cfg, nullptr), ConfigError);
    cfg.patch_size = 16;
    CHECK_THROWS_AS((void)train::train({}, {}, cfg, nullptr), InputError);
}

TEST_CASE("training reduces the loss on a fixed pool") {
    const auto corpus = test::make_scenes(600, 2, 64, 64);
    const std::vector<std::string> ids = {"u", "v"};

    train::TrainConfig cfg;
    cfg.epochs = 40;
    cfg.iterations_per_epoch = 1;
    cfg.batch_size = 2;
    cfg.seed = 9;
    cfg.width_scale = 0.125f;
    cfg.checkpoint_every = 40;
    cfg.patch_size = 16;
    cfg.precompute = true;
    cfg.out_dir = fresh_dir("descent").string();

    const auto res = train::train(corpus, ids, cfg, nullptr);

    const std::string log = slurp(fs::path(cfg.out_dir) / "loss.csv");
    std::istringstream lines(log);
    std::string line;
    std::getline(lines, line); // header
    double first = 0.0;
    bool have_first = false;
    while (std::getline(lines, line)) {
        const double v = std::stod(line.substr(line.rfind(',') + 1));
        if (!have_first) {
            first = v;
            have_first = true;
        }
    }
    REQUIRE(have_first);
    CHECK(res.final_loss < first);
}
