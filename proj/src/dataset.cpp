#include "ssfer/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "ssfer/csv.hpp"
#include "ssfer/png_io.hpp"
#include "ssfer/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace ssfer::data {

namespace {

int infer_class_count(const std::vector<ImageSample>& samples) {
    int maxl = -1;
    for (const auto& s : samples) {
        check(s.label.has_value(), "samples must all be labeled, sample '" + s.id + "' is not");
        check(*s.label >= 0, "negative label on sample '" + s.id + "'");
        maxl = std::max(maxl, *s.label);
    }
    check(maxl >= 0, "empty sample set");
    return maxl + 1;
}

std::vector<std::vector<int>> group_by_class(const std::vector<ImageSample>& samples,
                                             int class_count) {
    std::vector<std::vector<int>> groups(class_count);
    for (int i = 0; i < static_cast<int>(samples.size()); ++i)
        groups[*samples[i].label].push_back(i);
    return groups;
}

// largest-remainder quotas: per-class floor(f*n_c), then +1 by descending
// fractional part (ties -> lower class id) until the rounded total is met
std::vector<int> fraction_quotas(const std::vector<std::vector<int>>& groups, double fraction,
                                 int total) {
    const int target = static_cast<int>(std::llround(fraction * total));
    std::vector<int> quota(groups.size());
    std::vector<std::pair<double, int>> rem;
    int assigned = 0;
    for (size_t c = 0; c < groups.size(); ++c) {
        const double q = fraction * static_cast<double>(groups[c].size());
        quota[c] = static_cast<int>(std::floor(q));
        assigned += quota[c];
        rem.emplace_back(q - quota[c], static_cast<int>(c));
    }
    std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (const auto& [frac, c] : rem) {
        if (assigned >= target) break;
        if (quota[c] < static_cast<int>(groups[c].size())) {
            ++quota[c];
            ++assigned;
        }
    }
    return quota;
}

std::vector<int> pick_stratified(const std::vector<ImageSample>& samples,
                                 const std::vector<int>& quota,
                                 const std::vector<std::vector<int>>& groups, uint64_t seed) {
    Rng rng(seed);
    std::vector<int> picked;
    for (size_t c = 0; c < groups.size(); ++c) {
        std::vector<int> idx = groups[c];
        rng.shuffle(idx);
        picked.insert(picked.end(), idx.begin(), idx.begin() + quota[c]);
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

}  // namespace

DatasetSplit subsample_labels(const std::vector<ImageSample>& samples, const LabelBudget& budget,
                              uint64_t seed) {
    check(!samples.empty(), "subsample_labels: empty sample set");
    const int class_count = infer_class_count(samples);
    const auto groups = group_by_class(samples, class_count);

    std::vector<int> quota(class_count);
    if (budget.kind == LabelBudget::Kind::per_class) {
        const int k = static_cast<int>(std::llround(budget.value));
        check(k >= 1 && std::abs(budget.value - k) < 1e-9,
              "subsample_labels: per-class budget must be a positive integer");
        for (int c = 0; c < class_count; ++c) {
            if (static_cast<int>(groups[c].size()) < k)
                fail("subsample_labels: class ", std::to_string(c), " has only ",
                     std::to_string(groups[c].size()), " samples, need ", std::to_string(k));
            quota[c] = k;
        }
    } else {
        check(budget.value >= 0.0 && budget.value <= 1.0,
              "subsample_labels: fraction must be in [0,1]");
        quota = fraction_quotas(groups, budget.value, static_cast<int>(samples.size()));
    }

    const std::vector<int> picked = pick_stratified(samples, quota, groups, seed);
    std::vector<char> is_picked(samples.size(), 0);
    for (int i : picked) is_picked[i] = 1;

    DatasetSplit split;
    split.class_count = class_count;
    for (int i = 0; i < static_cast<int>(samples.size()); ++i) {
        if (is_picked[i]) {
            split.labeled.push_back(samples[i]);
        } else {
            ImageSample s = samples[i];
            s.label.reset();
            split.unlabeled.push_back(std::move(s));
        }
    }
    return split;
}

DatasetSplit inject_label_noise(const DatasetSplit& split, double ratio, uint64_t seed) {
    check(ratio >= 0.0 && ratio <= 1.0, "inject_label_noise: ratio must be in [0,1]");
    DatasetSplit out = split;
    const int n = static_cast<int>(out.labeled.size());
    const int flips = static_cast<int>(std::llround(ratio * n));
    if (flips == 0) return out;
    check(out.class_count >= 2, "inject_label_noise: need at least two classes");

    Rng rng(seed);
    const std::vector<int> victims = rng.sample_without_replacement(n, flips);
    for (int i : victims) {
        const int old = *out.labeled[i].label;
        const int r = static_cast<int>(rng.uniform_index(out.class_count - 1));
        out.labeled[i].label = r >= old ? r + 1 : r;  // never the original class
    }
    return out;
}

std::vector<FoldPair> kfold_split(const std::vector<ImageSample>& samples, int k, uint64_t seed) {
    check(k >= 2, "kfold_split: k must be >= 2");
    check(static_cast<int>(samples.size()) >= k, "kfold_split: fewer samples than folds");
    Rng rng(seed);
    std::vector<int> order(samples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    rng.shuffle(order);

    std::vector<FoldPair> folds(k);
    for (int f = 0; f < k; ++f) {
        for (size_t i = 0; i < order.size(); ++i) {
            if (static_cast<int>(i % k) == f)
                folds[f].validation.push_back(samples[order[i]]);
            else
                folds[f].train.push_back(samples[order[i]]);
        }
    }
    return folds;
}

std::pair<std::vector<ImageSample>, std::vector<ImageSample>> split_holdout(
    const std::vector<ImageSample>& samples, double fraction, int class_count, uint64_t seed) {
    check(fraction >= 0.0 && fraction < 1.0, "split_holdout: fraction must be in [0,1)");
    check(!samples.empty(), "split_holdout: empty sample set");
    bool all_labeled = true;
    for (const auto& s : samples)
        if (!s.label.has_value()) all_labeled = false;

    std::vector<char> held(samples.size(), 0);
    if (all_labeled) {
        const auto groups = group_by_class(samples, class_count);
        const auto quota = fraction_quotas(groups, fraction, static_cast<int>(samples.size()));
        for (int i : pick_stratified(samples, quota, groups, seed)) held[i] = 1;
    } else {
        Rng rng(seed);
        const int n = static_cast<int>(samples.size());
        const int h = static_cast<int>(std::llround(fraction * n));
        for (int i : rng.sample_without_replacement(n, h)) held[i] = 1;
    }
    std::pair<std::vector<ImageSample>, std::vector<ImageSample>> out;
    for (size_t i = 0; i < samples.size(); ++i)
        (held[i] ? out.second : out.first).push_back(samples[i]);
    return out;
}

FaceBox face_box(const BoxProvider& provider, const ImageSample& sample) {
    if (std::holds_alternative<StoredBoxes>(provider)) {
        if (!sample.face_box.has_value())
            fail("face_box: sample '", sample.id, "' carries no stored box");
        return *sample.face_box;
    }
    if (std::holds_alternative<FullImageBoxes>(provider)) {
        return FaceBox{0.0, 0.0, static_cast<double>(sample.pixels.width),
                       static_cast<double>(sample.pixels.height)};
    }
    const auto& sidecar = std::get<SidecarBoxes>(provider);
    auto it = sidecar.boxes.find(sample.id);
    if (it == sidecar.boxes.end()) {
        log_warn("no sidecar box for sample '" + sample.id + "', using full image");
        return FaceBox{0.0, 0.0, static_cast<double>(sample.pixels.width),
                       static_cast<double>(sample.pixels.height)};
    }
    return it->second;
}

SidecarBoxes load_box_sidecar(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("load_box_sidecar: cannot open ", path);
    SidecarBoxes out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string id;
        FaceBox box;
        if (!(ss >> id >> box.x0 >> box.y0 >> box.x1 >> box.y1))
            fail("load_box_sidecar: malformed line ", std::to_string(lineno), " in ", path);
        if (!box.valid())
            fail("load_box_sidecar: degenerate box on line ", std::to_string(lineno), " in ",
                 path);
        out.boxes[id] = box;
    }
    return out;
}

void save_box_sidecar(const std::string& path, const std::vector<ImageSample>& samples) {
    std::ofstream out(path);
    check(out.good(), "save_box_sidecar: cannot open " + path);
    for (const auto& s : samples) {
        if (!s.face_box.has_value()) continue;
        const FaceBox& b = *s.face_box;
        out << s.id << ' ' << fmt_num(b.x0) << ' ' << fmt_num(b.y0) << ' ' << fmt_num(b.x1) << ' '
            << fmt_num(b.y1) << '\n';
    }
}

void save_manifest(const std::string& manifest_path, const std::vector<ImageSample>& samples,
                   bool inline_pixels) {
    const fs::path mpath(manifest_path);
    const fs::path dir = mpath.parent_path().empty() ? fs::path(".") : mpath.parent_path();
    const std::string img_dirname = mpath.stem().string() + "_images";
    if (!inline_pixels) fs::create_directories(dir / img_dirname);

    json arr = json::array();
    for (const auto& s : samples) {
        json e;
        e["id"] = s.id;
        if (s.label.has_value()) e["label"] = *s.label;
        if (s.face_box.has_value())
            e["box"] = {s.face_box->x0, s.face_box->y0, s.face_box->x1, s.face_box->y1};
        if (inline_pixels) {
            json px;
            px["height"] = s.pixels.height;
            px["width"] = s.pixels.width;
            px["channels"] = s.pixels.channels;
            px["data"] = s.pixels.data;
            e["pixels"] = std::move(px);
        } else {
            const std::string rel = img_dirname + "/" + s.id + ".png";
            write_png((dir / rel).string(), s.pixels);
            e["path"] = rel;
        }
        arr.push_back(std::move(e));
    }
    std::ofstream out(manifest_path);
    check(out.good(), "save_manifest: cannot open " + manifest_path);
    out << arr.dump(2) << '\n';
}

std::vector<ImageSample> load_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) fail("load_manifest: cannot open ", manifest_path);
    json arr;
    try {
        in >> arr;
    } catch (const json::exception& e) {
        fail("load_manifest: invalid JSON in ", manifest_path, ": ", e.what());
    }
    check(arr.is_array(), "load_manifest: top level must be an array");
    const fs::path dir = fs::path(manifest_path).parent_path();

    std::vector<ImageSample> out;
    int entry_no = 0;
    for (const auto& e : arr) {
        const std::string where = "entry " + std::to_string(entry_no++);
        check(e.is_object(), "load_manifest: " + where + " is not an object");
        for (const auto& [key, _] : e.items())
            if (key != "id" && key != "label" && key != "box" && key != "path" && key != "pixels")
                fail("load_manifest: unknown key '", key, "' in ", where);
        check(e.contains("id") && e["id"].is_string(), "load_manifest: missing id in " + where);

        ImageSample s;
        s.id = e["id"].get<std::string>();
        if (e.contains("label")) {
            check(e["label"].is_number_integer(), "load_manifest: bad label in " + where);
            s.label = e["label"].get<int>();
        }
        if (e.contains("box")) {
            const auto& b = e["box"];
            check(b.is_array() && b.size() == 4, "load_manifest: box must be [x0,y0,x1,y1] in " +
                                                     where);
            s.face_box = FaceBox{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                                 b[3].get<double>()};
            check(s.face_box->valid(), "load_manifest: degenerate box in " + where);
        }
        check(e.contains("path") != e.contains("pixels"),
              "load_manifest: need exactly one of path/pixels in " + where);
        if (e.contains("path")) {
            s.pixels = read_png((dir / e["path"].get<std::string>()).string());
        } else {
            const auto& px = e["pixels"];
            check(px.is_object() && px.contains("height") && px.contains("width") &&
                      px.contains("channels") && px.contains("data"),
                  "load_manifest: malformed pixels in " + where);
            Image img(px["height"].get<int>(), px["width"].get<int>(), px["channels"].get<int>());
            const auto& data = px["data"];
            check(data.is_array() && data.size() == img.data.size(),
                  "load_manifest: pixel data size mismatch in " + where);
            for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = data[i].get<float>();
            s.pixels = std::move(img);
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace ssfer::data
