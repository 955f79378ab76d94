#include "hdre/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "hdre/errors.hpp"
#include "hdre/synth.hpp"

namespace hdre::metrics {
namespace {

int gray_code(const std::uint8_t* px) {
    const double lum = img::kLumaR * px[0] + img::kLumaG * px[1] + img::kLumaB * px[2];
    return std::clamp(static_cast<int>(std::lround(lum)), 0, 255);
}

} // namespace

double discrete_entropy(const img::LdrImage& image) {
    img::validate(image);
    std::uint64_t hist[256] = {};
    const std::size_t pixels = static_cast<std::size_t>(image.width) * image.height;
    for (std::size_t p = 0; p < pixels; ++p) hist[gray_code(image.data.data() + 3 * p)]++;

    double h = 0.0;
    for (std::uint64_t c : hist) {
        if (c == 0) continue;
        const double prob = static_cast<double>(c) / static_cast<double>(pixels);
        h -= prob * std::log2(prob);
    }
    return h;
}

img::LdrImage histogram_equalize(const img::LdrImage& image) {
    img::validate(image);
    const std::size_t pixels = static_cast<std::size_t>(image.width) * image.height;

    std::vector<int> gray(pixels);
    std::uint64_t hist[256] = {};
    for (std::size_t p = 0; p < pixels; ++p) {
        gray[p] = gray_code(image.data.data() + 3 * p);
        hist[gray[p]]++;
    }

    double cdf[256];
    double run = 0.0;
    for (int i = 0; i < 256; ++i) {
        run += static_cast<double>(hist[i]) / static_cast<double>(pixels);
        cdf[i] = run;
    }
    double cdf_min = 0.0;
    for (int i = 0; i < 256; ++i)
        if (hist[i]) {
            cdf_min = cdf[i];
            break;
        }

    int remap[256];
    const double denom = 1.0 - cdf_min;
    for (int i = 0; i < 256; ++i)
        remap[i] = denom > 0.0
                       ? static_cast<int>(std::lround(255.0 * (cdf[i] - cdf_min) / denom))
                       : i;

    img::LdrImage out;
    out.width = image.width;
    out.height = image.height;
    out.data.resize(image.data.size());
    for (std::size_t p = 0; p < pixels; ++p) {
        const int g = gray[p];
        const int g2 = remap[g];
        const double ratio = g > 0 ? static_cast<double>(g2) / g : 0.0;
        for (int c = 0; c < 3; ++c) {
            const double v = image.data[3 * p + c] * ratio;
            out.data[3 * p + c] =
                static_cast<std::uint8_t>(std::clamp(static_cast<int>(std::lround(v)), 0, 255));
        }
    }
    return out;
}

MetricReport evaluate(const std::vector<img::HdrImage>& corpus,
                      const std::vector<std::string>& ids, const EvalConfig& cfg,
                      nn::Network* net) {
    if (corpus.empty()) throw InputError("evaluate: corpus is empty");
    for (const std::string& m : cfg.methods)
        if (m != "input" && m != "he" && m != "proposed")
            throw ConfigError("evaluate: unknown method " + m);
    const bool wants_net =
        std::find(cfg.methods.begin(), cfg.methods.end(), "proposed") != cfg.methods.end();
    if (wants_net && !net) throw ConfigError("evaluate: 'proposed' needs a model checkpoint");

    MetricReport report;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const std::string id = i < ids.size() ? ids[i] : std::to_string(i);
        const synth::EvalSample sample = synth::generate_eval_sample(
            corpus[i], util::Rng::derive(cfg.seed, static_cast<std::uint64_t>(i)), id, cfg.size);

        for (const std::string& method : cfg.methods) {
            img::LdrImage rendered;
            if (method == "input") rendered = sample.input;
            else if (method == "he") rendered = histogram_equalize(sample.input);
            else rendered = nn::enhance_image(*net, sample.input);

            MetricRow row;
            row.id = id;
            row.method = method;
            const TmqiResult t = tmqi(sample.patch, rendered);
            row.tmqi = t.q;
            row.tmqi_s = t.s;
            row.tmqi_n = t.n;
            row.entropy = discrete_entropy(rendered);
            report.rows.push_back(std::move(row));
        }
    }

    for (const std::string& method : cfg.methods) {
        MethodAggregate agg;
        agg.method = method;
        for (const MetricRow& row : report.rows) {
            if (row.method != method) continue;
            agg.tmqi += row.tmqi;
            agg.tmqi_s += row.tmqi_s;
            agg.tmqi_n += row.tmqi_n;
            agg.entropy += row.entropy;
            agg.count += 1;
        }
        if (agg.count > 0) {
            agg.tmqi /= agg.count;
            agg.tmqi_s /= agg.count;
            agg.tmqi_n /= agg.count;
            agg.entropy /= agg.count;
        }
        report.aggregates.push_back(std::move(agg));
    }
    return report;
}

std::string report_to_csv(const MetricReport& report) {
    std::string out = "id,method,tmqi,tmqi_s,tmqi_n,entropy\n";
    char buf[256];
    for (const MetricRow& r : report.rows) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%.17g,%.17g,%.17g\n", r.id.c_str(),
                      r.method.c_str(), r.tmqi, r.tmqi_s, r.tmqi_n, r.entropy);
        out += buf;
    }
    return out;
}

std::string aggregates_to_json(const MetricReport& report) {
    nlohmann::json j;
    for (const MethodAggregate& a : report.aggregates) {
        j[a.method] = {{"tmqi", a.tmqi},
                       {"tmqi_s", a.tmqi_s},
                       {"tmqi_n", a.tmqi_n},
                       {"entropy", a.entropy},
                       {"count", a.count}};
    }
    return j.dump(2) + "\n";
}

} // namespace hdre::metrics
