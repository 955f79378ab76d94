#include "hdre/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "hdre/adam.hpp"
#include "hdre/checkpoint.hpp"
#include "hdre/errors.hpp"
#include "hdre/loss.hpp"
#include "hdre/rng.hpp"
#include "hdre/synth.hpp"

namespace hdre::nn {

LossResult mse_loss(const Tensor& pred, const Tensor& target) {
    if (!pred.same_shape(target)) throw InputError("mse_loss: shape mismatch");
    LossResult r;
    r.grad = Tensor::zeros_like(pred);
    const double count = static_cast<double>(pred.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double d = static_cast<double>(pred.data[i]) - target.data[i];
        acc += d * d;
        r.grad.data[i] = static_cast<float>(2.0 * d / count);
    }
    r.value = acc / count;
    return r;
}

void adam_step(const std::vector<Param>& params, AdamState& state) {
    if (state.m.empty()) {
        for (const Param& p : params) {
            state.m.push_back(Tensor::zeros_like(*p.value));
            state.v.push_back(Tensor::zeros_like(*p.value));
        }
    }
    if (state.m.size() != params.size()) throw Error("adam_step: parameter list changed size");

    state.t += 1;
    const double b1 = state.cfg.beta1;
    const double b2 = state.cfg.beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.t));

    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& theta = *params[i].value;
        const Tensor& g = *params[i].grad;
        if (!g.same_shape(theta)) throw Error("adam_step: gradient missing for " + params[i].name);
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        for (std::size_t k = 0; k < theta.data.size(); ++k) {
            const double gk = g.data[k];
            const double mk = b1 * m.data[k] + (1.0 - b1) * gk;
            const double vk = b2 * v.data[k] + (1.0 - b2) * gk * gk;
            m.data[k] = static_cast<float>(mk);
            v.data[k] = static_cast<float>(vk);
            const double mhat = mk / corr1;
            const double vhat = vk / corr2;
            theta.data[k] =
                static_cast<float>(theta.data[k] - state.cfg.alpha * mhat / (std::sqrt(vhat) + state.cfg.eps));
        }
    }
}

} // namespace hdre::nn

namespace hdre::train {
namespace {

void fill_sample(nn::Tensor& x, nn::Tensor& t, int slot, const synth::SamplePair& pair) {
    const int h = x.h(), w = x.w();
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
            const std::uint8_t* pi = pair.input.pixel(xx, y);
            const std::uint8_t* pt = pair.target.pixel(xx, y);
            for (int c = 0; c < 3; ++c) {
                x.at(slot, c, y, xx) = img::code_to_float(pi[c]);
                t.at(slot, c, y, xx) = img::code_to_float(pt[c]);
            }
        }
}

} // namespace

TrainResult train(const std::vector<img::HdrImage>& corpus, const std::vector<std::string>& ids,
                  const TrainConfig& cfg, std::ostream* progress) {
    if (corpus.empty()) throw InputError("train: corpus is empty");
    if (cfg.epochs < 1 || cfg.iterations_per_epoch < 1 || cfg.batch_size < 1)
        throw ConfigError("train: epochs, iterations and batch size must be >= 1");
    if (cfg.patch_size < 16 || cfg.patch_size % 16 != 0)
        throw ConfigError("train: patch size must be a positive multiple of 16");

    std::filesystem::create_directories(cfg.out_dir);
    const auto out = [&](const std::string& name) {
        return (std::filesystem::path(cfg.out_dir) / name).string();
    };

    {
        nlohmann::json echo;
        echo["epochs"] = cfg.epochs;
        echo["iterations_per_epoch"] = cfg.iterations_per_epoch;
        echo["batch_size"] = cfg.batch_size;
        echo["seed"] = cfg.seed;
        echo["width_scale"] = cfg.width_scale;
        echo["use_global_encoder"] = cfg.use_global_encoder;
        echo["checkpoint_every"] = cfg.checkpoint_every;
        echo["patch_size"] = cfg.patch_size;
        echo["precompute"] = cfg.precompute;
        echo["corpus_size"] = corpus.size();
        std::ofstream f(out("train_config.json"));
        f << echo.dump(2) << "\n";
    }

    const int corpus_size = static_cast<int>(corpus.size());
    int batch = cfg.batch_size;
    if (corpus_size < batch) {
        if (progress)
            *progress << "warning: corpus (" << corpus_size << ") smaller than batch size (" << batch
                      << "); using batch of " << corpus_size << "\n";
        batch = corpus_size;
    }
    const int iters = std::min(cfg.iterations_per_epoch, corpus_size / batch);

    nn::ArchitectureConfig arch;
    arch.use_global_encoder = cfg.use_global_encoder;
    arch.width_scale = cfg.width_scale;
    nn::Network net(arch, cfg.seed);
    nn::AdamState adam;

    util::Rng shuffle_rng(util::Rng::derive(cfg.seed, 0));
    std::uint64_t sample_counter = 1;

    // fixed pool: one pair per corpus image, same seeds an online first epoch would use
    std::vector<synth::SamplePair> pool;
    if (cfg.precompute) {
        for (int i = 0; i < corpus_size; ++i) {
            const std::string id = i < static_cast<int>(ids.size()) ? ids[i] : std::to_string(i);
            pool.push_back(synth::generate_pair(corpus[static_cast<std::size_t>(i)],
                                                util::Rng::derive(cfg.seed, sample_counter++), id,
                                                cfg.patch_size));
        }
    }

    std::ofstream loss_csv(out("loss.csv"), std::ios::trunc);
    loss_csv << "epoch,iter,loss\n";

    std::vector<int> order(static_cast<std::size_t>(corpus_size));
    TrainResult result;
    std::string last_ckpt;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (int i = 0; i < corpus_size; ++i) order[static_cast<std::size_t>(i)] = i;
        for (int i = corpus_size - 1; i > 0; --i)
            std::swap(order[static_cast<std::size_t>(i)],
                      order[static_cast<std::size_t>(shuffle_rng.uniform_int(0, i))]);

        double epoch_loss = 0.0;
        for (int it = 0; it < iters; ++it) {
            nn::Tensor x(batch, 3, cfg.patch_size, cfg.patch_size);
            nn::Tensor t(batch, 3, cfg.patch_size, cfg.patch_size);
            for (int s = 0; s < batch; ++s) {
                const int idx = order[static_cast<std::size_t>(it * batch + s)];
                if (cfg.precompute) {
                    fill_sample(x, t, s, pool[static_cast<std::size_t>(idx)]);
                } else {
                    const std::string id =
                        idx < static_cast<int>(ids.size()) ? ids[static_cast<std::size_t>(idx)]
                                                           : std::to_string(idx);
                    const synth::SamplePair pair =
                        synth::generate_pair(corpus[static_cast<std::size_t>(idx)],
                                             util::Rng::derive(cfg.seed, sample_counter++), id,
                                             cfg.patch_size);
                    fill_sample(x, t, s, pair);
                }
            }

            nn::Tensor pred = net.forward(x, true);
            nn::LossResult loss = nn::mse_loss(pred, t);
            net.backward(loss.grad);
            nn::adam_step(net.parameters(), adam);

            loss_csv << epoch << "," << it + 1 << "," << loss.value << "\n";
            epoch_loss = loss.value;
            result.final_loss = loss.value;
            ++result.steps;
        }
        net.release_caches();

        if (progress)
            *progress << "epoch " << epoch << "/" << cfg.epochs << " loss " << epoch_loss << "\n";

        if (epoch % cfg.checkpoint_every == 0 || epoch == cfg.epochs) {
            last_ckpt = out("ckpt_epoch" + std::to_string(epoch) + ".nncp");
            nn::save_checkpoint(net, last_ckpt);
        }
    }

    result.final_checkpoint = last_ckpt;
    return result;
}

} // namespace hdre::train
