#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "hdre/image.hpp"
#include "hdre/network.hpp"

namespace hdre::train {

struct TrainConfig {
    int epochs = 500;
    int iterations_per_epoch = 51;
    int batch_size = 16;
    std::uint64_t seed = 0;
    float width_scale = 1.0f;
    bool use_global_encoder = true;
    int checkpoint_every = 50; // epochs
    int patch_size = 256;
    bool precompute = false; // synthesize one fixed pool up front instead of per epoch
    std::string out_dir = ".";
};

struct TrainResult {
    std::string final_checkpoint;
    double final_loss = 0.0;
    int steps = 0;
};

/// Runs the full loop: per-epoch shuffle, batches without replacement, fresh
/// pair synthesis (or the precomputed pool), MSE + Adam. Writes loss.csv,
/// train_config.json and ckpt_epoch{N}.nncp under cfg.out_dir.
TrainResult train(const std::vector<img::HdrImage>& corpus, const std::vector<std::string>& ids,
                  const TrainConfig& cfg, std::ostream* progress = nullptr);

} // namespace hdre::train
