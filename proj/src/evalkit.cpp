#include "ssfer/evalkit.hpp"

#include <algorithm>
#include <cmath>

#include "ssfer/supervised.hpp"
#include "ssfer/threading.hpp"

namespace ssfer::evalkit {

int predict(const nn::ModelState& s, const Image& img, Vec* probs) {
    const Vec logits = nn::classify(s, img);
    if (probs) *probs = nn::softmax(logits);
    int best = 0;
    for (int c = 1; c < logits.size(); ++c)
        if (logits(c) > logits(best)) best = c;
    return best;
}

MetricsReport evaluate(const nn::ModelState& s, const std::vector<ImageSample>& samples) {
    check(!samples.empty(), "evaluate: empty sample set");
    const int classes = s.config().class_count;

    const int n = static_cast<int>(samples.size());
    std::vector<int> preds(n);
    parallel_chunks(n, [&](int, int begin, int end) {
        for (int i = begin; i < end; ++i) preds[i] = predict(s, samples[i].pixels);
    });

    MetricsReport r;
    r.confusion.assign(classes, std::vector<int>(classes, 0));
    int correct = 0;
    for (int i = 0; i < n; ++i) {
        check(samples[i].label.has_value(),
              "evaluate: unlabeled sample '" + samples[i].id + "'");
        const int t = *samples[i].label;
        check(t >= 0 && t < classes, "evaluate: label out of range on '" + samples[i].id + "'");
        r.confusion[t][preds[i]] += 1;
        if (preds[i] == t) ++correct;
    }
    r.total = n;
    r.accuracy = static_cast<double>(correct) / n;
    r.per_class_accuracy.assign(classes, 0.0);
    for (int c = 0; c < classes; ++c) {
        int row = 0;
        for (int p = 0; p < classes; ++p) row += r.confusion[c][p];
        if (row > 0) r.per_class_accuracy[c] = static_cast<double>(r.confusion[c][c]) / row;
    }
    return r;
}

std::vector<uint8_t> SaliencyMap::focused_mask() const { return threshold_mask(*this, threshold); }

SaliencyMap gradient_saliency(const Image& input_grad) {
    SaliencyMap m;
    m.height = input_grad.height;
    m.width = input_grad.width;
    m.values.assign(static_cast<size_t>(m.height) * m.width, 0.0);
    double peak = 0.0;
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            double acc = 0.0;
            for (int c = 0; c < input_grad.channels; ++c)
                acc += std::abs(static_cast<double>(input_grad.at(y, x, c)));
            const double v = acc / input_grad.channels;
            m.values[static_cast<size_t>(y) * m.width + x] = v;
            peak = std::max(peak, v);
        }
    if (peak > 0.0)
        for (double& v : m.values) v /= peak;
    return m;
}

std::vector<uint8_t> threshold_mask(const SaliencyMap& m, double threshold) {
    std::vector<uint8_t> mask(m.values.size());
    for (size_t i = 0; i < m.values.size(); ++i) mask[i] = m.values[i] > threshold ? 1 : 0;
    return mask;
}

namespace {

// loss gradient at the true label, shaped like the input
Image input_gradient(const nn::ModelState& s, const ImageSample& sample) {
    check(sample.label.has_value(), "saliency: unlabeled sample '" + sample.id + "'");
    nn::VitCache cache;
    const Vec logits = nn::classify_forward(s, sample.pixels, cache);
    const int classes = s.config().class_count;
    const Vec dlogits = supervised::soft_ce_grad(
        logits, supervised::one_hot(*sample.label, classes));
    nn::ModelGrads scratch(s);
    Image g;
    nn::classify_backward(s, cache, dlogits, scratch, &g);
    return g;
}

}  // namespace

SaliencyMap saliency(const nn::ModelState& s, const ImageSample& sample) {
    return gradient_saliency(input_gradient(s, sample));
}

SaliencyMap GradientSaliency::saliency(const nn::ModelState& s, const ImageSample& sample) const {
    return evalkit::saliency(s, sample);
}

Image fgsm_attack(const Image& x, const Image& grad, double eps,
                  const std::vector<uint8_t>& region_mask) {
    check(eps >= 0.0, "fgsm: epsilon must be >= 0");
    check(x.same_shape(grad), "fgsm: gradient shape mismatch");
    check(region_mask.size() == static_cast<size_t>(x.height) * x.width,
          "fgsm: region mask size mismatch");
    Image out = x;
    for (int y = 0; y < x.height; ++y)
        for (int x0 = 0; x0 < x.width; ++x0) {
            if (!region_mask[static_cast<size_t>(y) * x.width + x0]) continue;
            for (int c = 0; c < x.channels; ++c) {
                const double g = grad.at(y, x0, c);
                const double sign = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
                out.at(y, x0, c) = clamp01(static_cast<float>(x.at(y, x0, c) + eps * sign));
            }
        }
    return out;
}

Image fgsm_attack(const nn::ModelState& s, const ImageSample& sample, double eps,
                  const std::vector<uint8_t>& region_mask) {
    return fgsm_attack(sample.pixels, input_gradient(s, sample), eps, region_mask);
}

std::vector<double> default_attack_epsilons() {
    return {0.0, 0.02, 0.04, 0.06, 0.08, 0.10};
}

AttackResult attack_experiment(const nn::ModelState& s, const std::vector<ImageSample>& samples,
                               const std::vector<double>& epsilons,
                               const SaliencyProvider* provider, double threshold) {
    check(!samples.empty(), "attack: empty sample set");
    check(!epsilons.empty(), "attack: no epsilon values");

    const int n = static_cast<int>(samples.size());
    const int ne = static_cast<int>(epsilons.size());

    // one gradient per image drives the saliency region and every
    // perturbation strength
    const int nchunks = chunk_count(n);
    std::vector<std::vector<std::vector<int>>> chunk_correct(
        nchunks, std::vector<std::vector<int>>(2, std::vector<int>(ne, 0)));

    parallel_chunks(n, [&](int ci, int begin, int end) {
        for (int i = begin; i < end; ++i) {
            const ImageSample& sample = samples[i];
            const Image grad = input_gradient(s, sample);
            SaliencyMap sal = provider ? provider->saliency(s, sample)
                                       : gradient_saliency(grad);
            sal.threshold = threshold;
            check(sal.height == sample.pixels.height && sal.width == sample.pixels.width,
                  "attack: saliency map shape mismatch on '" + sample.id + "'");
            const std::vector<uint8_t> focused = sal.focused_mask();
            std::vector<uint8_t> unfocused(focused.size());
            for (size_t k = 0; k < focused.size(); ++k) unfocused[k] = focused[k] ? 0 : 1;

            for (int e = 0; e < ne; ++e) {
                const Image xf = fgsm_attack(sample.pixels, grad, epsilons[e], focused);
                const Image xu = fgsm_attack(sample.pixels, grad, epsilons[e], unfocused);
                if (predict(s, xf) == *sample.label) chunk_correct[ci][0][e] += 1;
                if (predict(s, xu) == *sample.label) chunk_correct[ci][1][e] += 1;
            }
        }
    });

    AttackResult res;
    res.epsilons = epsilons;
    res.focused_acc.assign(ne, 0.0);
    res.unfocused_acc.assign(ne, 0.0);
    for (int ci = 0; ci < nchunks; ++ci)
        for (int e = 0; e < ne; ++e) {
            res.focused_acc[e] += chunk_correct[ci][0][e];
            res.unfocused_acc[e] += chunk_correct[ci][1][e];
        }
    for (int e = 0; e < ne; ++e) {
        res.focused_acc[e] /= n;
        res.unfocused_acc[e] /= n;
    }
    return res;
}

}  // namespace ssfer::evalkit
