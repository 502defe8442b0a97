#pragma once

// Test-only fixtures and independent oracles. Nothing here calls into the
// code path it is used to check.

#include <apvqa/apvqa.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <unistd.h>
#include <string>
#include <vector>

namespace apvqa::testing {

// Region/cell by explicit rectangle membership: band i covers
// [i*extent/n, (i+1)*extent/n), the last band also owns the far edge.
inline int band_by_membership(double v, double extent, int n) {
  int hit = -1;
  for (int i = 0; i < n; ++i) {
    const double lo = i * extent / n;
    const double hi = (i + 1) * extent / n;
    const bool inside = (v >= lo && v < hi) || (i == n - 1 && v == extent);
    if (inside) {
      if (hit != -1) return -2;  // overlapping bands would be a partition bug
      hit = i;
    }
  }
  return hit;
}

// Integer-exact variant for pixel coordinates: pixel x is in band i iff
// i*extent <= x*n < (i+1)*extent.
inline int pixel_band_by_membership(long long x, long long extent, int n) {
  for (int i = 0; i < n; ++i) {
    if (i * extent <= x * n && x * n < (i + 1) * extent) return i;
  }
  return -1;
}

inline std::size_t count_color(const Image& img, Rgb c) {
  std::size_t n = 0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) n += img.at(x, y) == c;
  }
  return n;
}

inline std::size_t count_non_black(const Image& img) {
  return img.width * img.height - count_color(img, Rgb{0, 0, 0});
}

// Unique temp directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) {
    path = std::filesystem::temp_directory_path() /
           ("apvqa_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

// ---------------------------------------------------------------------------
// Predictors

inline std::vector<Prediction> text_predictions(const Dataset& d, auto&& answer) {
  std::vector<Prediction> out;
  out.reserve(d.samples.size());
  for (const auto& s : d.samples) out.push_back(Prediction{s.id, std::string(answer(s)), std::nullopt});
  return out;
}

inline std::vector<Prediction> gold_predictions(const Dataset& d) {
  return text_predictions(d, [](const VqaSample& s) { return std::string(to_string(s.gold)); });
}

inline std::vector<Prediction> constant_predictions(const Dataset& d, std::string text) {
  return text_predictions(d, [&](const VqaSample&) { return text; });
}

inline std::vector<Prediction> random_predictions(const Dataset& d, std::uint64_t seed) {
  Rng rng(seed);
  return text_predictions(d, [&](const VqaSample&) { return std::string(kLabelNames[rng.below(9)]); });
}

// ---------------------------------------------------------------------------
// Retrieval

struct EmbeddingSet {
  std::vector<float> image;
  std::vector<std::vector<float>> candidates;
};

inline EmbeddingSet random_embedding_set(Rng& rng, std::size_t dim) {
  EmbeddingSet e;
  const auto draw = [&] {
    std::vector<float> v(dim);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    return v;
  };
  e.image = draw();
  for (int k = 0; k < kNumLabels; ++k) e.candidates.push_back(draw());
  return e;
}

// Double loop over candidates and components; first strict maximum wins.
inline std::size_t brute_force_cosine_argmax(const EmbeddingSet& e) {
  std::size_t best = 0;
  double best_sim = -2.0;
  for (std::size_t k = 0; k < e.candidates.size(); ++k) {
    double num = 0.0, ni = 0.0, nc = 0.0;
    for (std::size_t j = 0; j < e.image.size(); ++j) {
      num += double(e.image[j]) * double(e.candidates[k][j]);
      ni += double(e.image[j]) * double(e.image[j]);
      nc += double(e.candidates[k][j]) * double(e.candidates[k][j]);
    }
    const double sim = num / (std::sqrt(ni) * std::sqrt(nc));
    if (sim > best_sim) {
      best = k;
      best_sim = sim;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// COCO fixtures

// One image per (category, region, copy) with a single instance centered in
// that region; availability of category c in region r is supply(c, r).
inline AnnotationIndex coco_fixture(int categories, auto&& supply, int width = 640, int height = 480) {
  AnnotationIndex idx;
  std::int64_t next_image = 1;
  for (int c = 0; c < categories; ++c) {
    char name[32];
    std::snprintf(name, sizeof name, "cat%02d", c);
    idx.categories[c + 1] = name;
  }
  for (int c = 0; c < categories; ++c) {
    for (int r = 0; r < kNumLabels; ++r) {
      const int copies = supply(c, r);
      for (int k = 0; k < copies; ++k) {
        CocoImage img{next_image++, "img" + std::to_string(next_image) + ".jpg", width, height};
        const double cx = (r % 3 + 0.5) * width / 3.0;
        const double cy = (r / 3 + 0.5) * height / 3.0;
        idx.images[img.id] = img;
        idx.instances[img.id].push_back(CocoInstance{c + 1, BBox{cx - 10, cy - 8, 20, 16}, false});
      }
    }
  }
  return idx;
}

// Serializes an index back to the COCO instances layout.
inline std::string coco_annotations_json(const AnnotationIndex& idx) {
  nlohmann::json j;
  j["images"] = nlohmann::json::array();
  j["annotations"] = nlohmann::json::array();
  j["categories"] = nlohmann::json::array();
  for (const auto& [id, img] : idx.images) {
    j["images"].push_back({{"id", id}, {"file_name", img.file_name}, {"width", img.width}, {"height", img.height}});
  }
  for (const auto& [id, name] : idx.categories) j["categories"].push_back({{"id", id}, {"name", name}});
  std::int64_t ann = 1;
  for (const auto& [image_id, list] : idx.instances) {
    for (const auto& inst : list) {
      j["annotations"].push_back({{"id", ann++},
                                  {"image_id", image_id},
                                  {"category_id", inst.category_id},
                                  {"bbox", {inst.bbox.x, inst.bbox.y, inst.bbox.w, inst.bbox.h}},
                                  {"iscrowd", inst.crowd ? 1 : 0},
                                  {"segmentation", {{1, 2, 3, 4, 5, 6}}}});
    }
  }
  return j.dump();
}

// Expected per-category counts for one region under round-robin selection,
// computed by water-filling: the largest level L with sum(min(a_i, L)) <= quota,
// then the remainder goes one each to the categories above L in visiting order.
inline std::map<std::string, std::size_t> water_fill(std::vector<std::pair<std::string, std::size_t>> avail,
                                                     std::size_t quota) {
  std::sort(avail.begin(), avail.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  const auto filled = [&](std::size_t level) {
    std::size_t s = 0;
    for (const auto& [_, a] : avail) s += std::min(a, level);
    return s;
  };
  std::size_t level = 0;
  std::size_t max_avail = 0;
  for (const auto& [_, a] : avail) max_avail = std::max(max_avail, a);
  while (level < max_avail && filled(level + 1) <= quota) ++level;
  std::map<std::string, std::size_t> out;
  std::size_t remainder = quota - std::min(quota, filled(level));
  for (const auto& [name, a] : avail) {
    std::size_t take = std::min(a, level);
    if (remainder > 0 && a > level) {
      ++take;
      --remainder;
    }
    if (take) out[name] = take;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Probe fixtures

inline std::vector<double> cluster_center(int label, std::size_t dim, double distance) {
  std::vector<double> c(dim, 0.0);
  c[static_cast<std::size_t>(label) % dim] = distance / std::sqrt(2.0);
  return c;
}

// `per_class` records per label: signal * center(label) + N(0, 1) noise.
inline HiddenDump gaussian_dump(int layer, std::size_t dim, int per_class, double distance, double signal,
                                std::uint64_t seed) {
  HiddenDump d;
  d.layer_index = layer;
  d.dim = static_cast<std::uint32_t>(dim);
  Rng rng(seed);
  for (int l = 0; l < kNumLabels; ++l) {
    const auto center = cluster_center(l, dim, distance);
    for (int i = 0; i < per_class; ++i) {
      ProbeRecord r;
      r.sample_id = "s" + std::to_string(l) + "_" + std::to_string(i);
      r.label = kAllLabels[l];
      for (std::size_t j = 0; j < dim; ++j) r.features.push_back(static_cast<float>(signal * center[j] + rng.normal()));
      d.records.push_back(std::move(r));
    }
  }
  return d;
}

inline HiddenDump shuffle_labels(HiddenDump d, std::uint64_t seed) {
  std::vector<PositionLabel> labels;
  for (const auto& r : d.records) labels.push_back(r.label);
  Rng rng(seed);
  rng.shuffle(std::span<PositionLabel>(labels));
  for (std::size_t i = 0; i < labels.size(); ++i) d.records[i].label = labels[i];
  return d;
}

// Signal strength per layer for the noise -> separable fixture.
inline const std::vector<double>& layered_signal() {
  static const std::vector<double> s = {0.0, 0.12, 0.25, 0.5, 1.0, 1.0, 1.0, 1.0};
  return s;
}

inline std::vector<HiddenDump> layered_fixture(std::uint64_t seed) {
  std::vector<HiddenDump> dumps;
  const auto& signal = layered_signal();
  for (std::size_t l = 0; l < signal.size(); ++l) {
    dumps.push_back(gaussian_dump(static_cast<int>(l), 16, 40, 20.0, signal[l], derive_seed(seed, l)));
  }
  return dumps;
}

}  // namespace apvqa::testing
