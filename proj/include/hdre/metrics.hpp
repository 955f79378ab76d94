#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hdre/image.hpp"
#include "hdre/network.hpp"
#include "hdre/tmqi.hpp"

namespace hdre::metrics {

/// Shannon entropy in bits of the Rec. 709 gray histogram.
double discrete_entropy(const img::LdrImage& image);

/// Global equalization of the gray channel with min-CDF normalization
/// (constant images are fixed points); RGB follows the gray ratio.
img::LdrImage histogram_equalize(const img::LdrImage& image);

struct MetricRow {
    std::string id;
    std::string method;
    double tmqi = 0.0, tmqi_s = 0.0, tmqi_n = 0.0;
    double entropy = 0.0;
};

struct MethodAggregate {
    std::string method;
    double tmqi = 0.0, tmqi_s = 0.0, tmqi_n = 0.0;
    double entropy = 0.0;
    int count = 0;
};

struct MetricReport {
    std::vector<MetricRow> rows;
    std::vector<MethodAggregate> aggregates; // arithmetic means per method
};

struct EvalConfig {
    std::uint64_t seed = 0;
    int size = 512;                                       // synthesized test resolution
    std::vector<std::string> methods = {"input", "he"};   // subset of input/he/proposed
};

/// Synthesizes one seeded dark rendering per HDR image, applies each method and
/// scores entropy plus TMQI against the HDR patch. `net` is required when
/// "proposed" is among the methods.
MetricReport evaluate(const std::vector<img::HdrImage>& corpus,
                      const std::vector<std::string>& ids, const EvalConfig& cfg,
                      nn::Network* net);

std::string report_to_csv(const MetricReport& report);
std::string aggregates_to_json(const MetricReport& report);

} // namespace hdre::metrics
